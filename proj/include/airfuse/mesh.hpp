#pragma once

#include "airfuse/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace airfuse {

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh with a per-vertex acquisition source.
struct TriangleMesh {
    std::vector<Point3> vertices;
    std::vector<Source> source;
    std::vector<Triangle> triangles;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    bool empty() const { return triangles.empty(); }

    double triangle_area(std::size_t t) const;
    Vec3 triangle_normal(std::size_t t) const;  // unnormalized, right-handed
    double total_area() const;

    /// Drops vertices not referenced by any triangle; the rest keep their
    /// relative order.
    void remove_unreferenced_vertices();
};

}  // namespace airfuse
