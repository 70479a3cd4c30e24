#include "airfuse/postprocess.hpp"

#include "airfuse/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace airfuse::post {
namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

/// Triangle-edge connectivity: component id per triangle, numbered by first triangle.
std::vector<std::uint32_t> triangle_components(const TriangleMesh& mesh, std::size_t& count) {
    const std::size_t n = mesh.triangle_count();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    std::unordered_map<std::uint64_t, std::uint32_t> first_on_edge;
    first_on_edge.reserve(3 * n);
    for (std::uint32_t t = 0; t < n; ++t)
        for (int e = 0; e < 3; ++e) {
            const auto& tri = mesh.triangles[t];
            const auto [it, inserted] = first_on_edge.try_emplace(edge_key(tri[e], tri[(e + 1) % 3]), t);
            if (!inserted) {
                const std::uint32_t a = find(t), b = find(it->second);
                if (a != b)
                    parent[std::max(a, b)] = std::min(a, b);
            }
        }
    std::vector<std::uint32_t> id(n);
    std::unordered_map<std::uint32_t, std::uint32_t> root_id;
    for (std::uint32_t t = 0; t < n; ++t) {
        const auto [it, inserted] = root_id.try_emplace(find(t), static_cast<std::uint32_t>(root_id.size()));
        id[t] = it->second;
    }
    count = root_id.size();
    return id;
}

}  // namespace

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, std::size_t iterations) {
    TriangleMesh out = mesh;
    if (iterations == 0)
        return out;
    const std::size_t nv = mesh.vertex_count();
    std::vector<std::vector<std::uint32_t>> ring(nv);
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            ring[tri[e]].push_back(tri[(e + 1) % 3]);
            ring[tri[(e + 1) % 3]].push_back(tri[e]);
        }
    for (auto& r : ring) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
    std::vector<Point3> next(nv);
    for (std::size_t it = 0; it < iterations; ++it) {
        parallel_for(nv, [&](std::size_t v) {
            if (ring[v].empty()) {
                next[v] = out.vertices[v];
                return;
            }
            Vec3 sum = Vec3::Zero();
            for (std::uint32_t u : ring[v])
                sum += out.vertices[u];
            next[v] = sum / static_cast<double>(ring[v].size());
        });
        out.vertices.swap(next);
    }
    return out;
}

TriangleMesh largest_component(const TriangleMesh& mesh) {
    if (mesh.empty())
        return mesh;
    std::size_t count = 0;
    const auto comp = triangle_components(mesh, count);
    std::vector<std::size_t> tris(count, 0);
    std::vector<double> area(count, 0.0);
    for (std::size_t t = 0; t < comp.size(); ++t) {
        ++tris[comp[t]];
        area[comp[t]] += mesh.triangle_area(t);
    }
    // Components are numbered by their first triangle, so the lowest id wins the final tie.
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < count; ++c)
        if (tris[c] > tris[best] || (tris[c] == tris[best] && area[c] > area[best]))
            best = c;
    TriangleMesh out;
    out.vertices = mesh.vertices;
    out.source = mesh.source;
    for (std::size_t t = 0; t < comp.size(); ++t)
        if (comp[t] == best)
            out.triangles.push_back(mesh.triangles[t]);
    out.remove_unreferenced_vertices();
    return out;
}

std::size_t count_components(const TriangleMesh& mesh) {
    std::size_t count = 0;
    triangle_components(mesh, count);
    return count;
}

TopologyReport validate(const TriangleMesh& mesh) {
    TopologyReport r;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_count;
    std::unordered_map<std::uint64_t, std::uint32_t> directed;
    edge_count.reserve(3 * mesh.triangle_count());
    directed.reserve(3 * mesh.triangle_count());
    for (const auto& tri : mesh.triangles) {
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            ++r.degenerate_triangles;
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = tri[e], b = tri[(e + 1) % 3];
            ++edge_count[edge_key(a, b)];
            ++directed[(static_cast<std::uint64_t>(a) << 32) | b];
        }
    }
    for (const auto& [key, c] : edge_count) {
        r.boundary_edges += c == 1;
        r.nonmanifold_edges += c > 2;
    }
    r.watertight = r.boundary_edges == 0 && r.nonmanifold_edges == 0 && r.degenerate_triangles == 0;
    r.oriented = std::all_of(directed.begin(), directed.end(), [](const auto& kv) { return kv.second == 1; });
    r.components = count_components(mesh);

    // Each vertex's link (opposite edges of its triangles) must be one cycle.
    bool fans_ok = r.watertight;
    if (fans_ok) {
        std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> link(mesh.vertex_count());
        for (const auto& tri : mesh.triangles)
            for (int c = 0; c < 3; ++c)
                link[tri[c]].emplace_back(tri[(c + 1) % 3], tri[(c + 2) % 3]);
        for (const auto& edges : link) {
            if (edges.empty())
                continue;
            std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> adj;
            for (const auto& [a, b] : edges) {
                adj[a].push_back(b);
                adj[b].push_back(a);
            }
            if (std::any_of(adj.begin(), adj.end(), [](const auto& kv) { return kv.second.size() != 2; })) {
                fans_ok = false;
                break;
            }
            // Walk the cycle from one link vertex; it must visit every link vertex.
            const std::uint32_t start = edges.front().first;
            std::uint32_t prev = start, cur = adj[start][0];
            std::size_t steps = 1;
            while (cur != start && steps <= adj.size()) {
                const auto& nb = adj[cur];
                const std::uint32_t next = nb[0] == prev ? nb[1] : nb[0];
                prev = cur;
                cur = next;
                ++steps;
            }
            if (cur != start || steps != adj.size()) {
                fans_ok = false;
                break;
            }
        }
    }
    r.manifold = fans_ok;
    return r;
}

}  // namespace airfuse::post
