#pragma once

#include "airfuse/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace airfuse::delaunay {

/// Marks the outer region beyond a hull face and INFINITE traversal steps.
inline constexpr std::uint32_t INFINITE = std::numeric_limits<std::uint32_t>::max();

/// Vertices of face i of a tet (the face opposite vertex i), ordered so the
/// face normal (b-a)x(c-a) points out of the tet.
inline constexpr std::array<std::array<int, 3>, 4> kFaceVertices{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

/// 3D Delaunay tetrahedralization of a point cloud. Finite tets only; the
/// outer region is implicit behind INFINITE neighbor entries.
struct Tetrahedralization {
    std::vector<Point3> vertices;
    std::vector<Source> source;  // street if any merged point was street
    std::vector<std::vector<std::uint32_t>> visibility;
    std::vector<std::array<std::uint32_t, 4>> tets;  // positively oriented
    /// neighbors[t][i] is the tet across the face opposite tets[t][i], or INFINITE.
    std::vector<std::array<std::uint32_t, 4>> neighbors;
    /// Input point index -> vertex index (exact duplicates share a vertex).
    std::vector<std::uint32_t> point_to_vertex;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_tets() const { return tets.size(); }

    /// Tets incident to vertex v, in ascending order.
    std::span<const std::uint32_t> incident_tets(std::uint32_t v) const {
        return {incident_.data() + incident_offset_[v], incident_.data() + incident_offset_[v + 1]};
    }

    std::array<Point3, 3> face(std::uint32_t t, int i) const;
    double face_area(std::uint32_t t, int i) const;
    Point3 centroid(std::uint32_t t) const;

    /// Rebuilds the per-vertex incident-tet lists after editing `tets`.
    void build_incidence();

private:
    std::vector<std::uint32_t> incident_offset_;
    std::vector<std::uint32_t> incident_;
};

/// Delaunay tetrahedralization of all points. Exact duplicates are merged
/// (visibility union). Degenerate cospherical and coplanar configurations
/// are resolved by symbolic perturbation, so the result is deterministic.
/// `seed` only drives the point-location walk; the triangulation itself does
/// not depend on it.
/// Throws InvalidInput("degenerate input: no 3D hull") when all points are coplanar.
Tetrahedralization tetrahedralize(const PointCloud& cloud, std::uint64_t seed = 12345);

/// Rewrites ray origins from point indices to vertex indices, dropping
/// repeated (vertex, sensor) pairs created by duplicate merging.
std::vector<Ray> remap_rays(const Tetrahedralization& dt, const std::vector<Ray>& rays);

/// Plain-text dump: "v x y z" lines then "t a b c d" lines (0-based).
void write_ascii(const Tetrahedralization& dt, const std::filesystem::path& path);

enum class Direction { toward_sensor, inverted };

struct TraversalStep {
    std::uint32_t tet;     // INFINITE for the outer region
    double exit_distance;  // from the ray origin
};

/// Tets pierced by the segment starting at the ray's origin vertex.
///
/// toward_sensor follows the ray up to the sensor or max_distance, whichever
/// is closer; inverted goes the opposite way for max_distance (must be
/// finite). The last finite step of a walk that ends inside a tet has
/// exit_distance equal to the segment length. Leaving the hull appends a
/// final INFINITE step whose exit_distance is the hull crossing distance.
/// Throws InvalidInput if the origin is not a vertex.
std::vector<TraversalStep> walk(const Tetrahedralization& dt, const Ray& ray, Direction direction,
                                double max_distance);

/// Same as walk() but appends into `out` (cleared first) to reuse storage.
void walk(const Tetrahedralization& dt, const Ray& ray, Direction direction, double max_distance,
          std::vector<TraversalStep>& out);

}  // namespace airfuse::delaunay
