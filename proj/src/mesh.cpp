#include "airfuse/mesh.hpp"

#include <limits>

namespace airfuse {

Vec3 TriangleMesh::triangle_normal(std::size_t t) const {
    const auto& tri = triangles[t];
    const Vec3& a = vertices[tri[0]];
    return (vertices[tri[1]] - a).cross(vertices[tri[2]] - a);
}

double TriangleMesh::triangle_area(std::size_t t) const { return 0.5 * triangle_normal(t).norm(); }

double TriangleMesh::total_area() const {
    double sum = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t)
        sum += triangle_area(t);
    return sum;
}

void TriangleMesh::remove_unreferenced_vertices() {
    constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(vertices.size(), unset);
    for (const auto& tri : triangles)
        for (auto v : tri)
            remap[v] = 0;
    std::size_t next = 0;
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        if (remap[v] == unset)
            continue;
        remap[v] = static_cast<std::uint32_t>(next);
        vertices[next] = vertices[v];
        source[next] = source[v];
        ++next;
    }
    vertices.resize(next);
    source.resize(next);
    for (auto& tri : triangles)
        for (auto& v : tri)
            v = remap[v];
}

}  // namespace airfuse
