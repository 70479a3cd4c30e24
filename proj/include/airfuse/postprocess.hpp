#pragma once

#include "airfuse/mesh.hpp"

#include <cstddef>

namespace airfuse::post {

/// Jacobi-style umbrella smoothing: every iteration moves each vertex to the
/// mean of its 1-ring neighbors from the previous iterate. Vertices without
/// neighbors stay in place.
TriangleMesh laplacian_smooth(const TriangleMesh& mesh, std::size_t iterations);

/// Keeps the edge-connected component with the most triangles (ties: larger
/// area, then lowest first triangle). Triangle order is preserved and unused
/// vertices are dropped.
TriangleMesh largest_component(const TriangleMesh& mesh);

struct TopologyReport {
    bool watertight = false;  // every edge has exactly two triangles
    bool manifold = false;    // watertight and every vertex fan is a single cycle
    bool oriented = false;    // every directed edge is used once
    std::size_t components = 0;
    std::size_t boundary_edges = 0;     // edges with one triangle
    std::size_t nonmanifold_edges = 0;  // edges with more than two triangles
    std::size_t degenerate_triangles = 0;  // repeated vertex index
};

TopologyReport validate(const TriangleMesh& mesh);

/// Number of edge-connected components.
std::size_t count_components(const TriangleMesh& mesh);

}  // namespace airfuse::post
