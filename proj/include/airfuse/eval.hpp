#pragma once

#include "airfuse/mesh.hpp"
#include "airfuse/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace airfuse::eval {

/// Distance from every reference vertex to the closest point of the
/// candidate surface. Throws InvalidInput if the candidate has no triangles.
std::vector<double> mesh_distance(const TriangleMesh& reference, const TriangleMesh& candidate);

/// Same for arbitrary query points.
std::vector<double> point_distances(const std::vector<Point3>& points, const TriangleMesh& candidate);

struct CdfSample {
    double distance;
    double fraction;  // share of samples with distance <= `distance`
};

struct ErrorStats {
    std::optional<double> mean_aerial;
    std::optional<double> mean_street;
    std::optional<double> frac_street_gt_10cm;
    std::optional<double> frac_street_gt_50cm;
    std::size_t aerial_count = 0;
    std::size_t street_count = 0;
    std::vector<CdfSample> cdf_street;
    std::vector<CdfSample> cdf_aerial;
};

/// Per-region means and the street-region shares of distances strictly above
/// 0.10 m and 0.50 m. Regions without samples are reported as absent.
ErrorStats partition_stats(const std::vector<double>& distances, const std::vector<Source>& tags);

/// Fraction of `values` strictly greater than `threshold`.
double fraction_above(const std::vector<double>& values, double threshold);

/// CSV "region,distance,fraction", at most 200 rows per region.
void write_cdf_csv(const std::string& path, const ErrorStats& stats);

/// Linear-interpolated percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

struct Misalignment {
    double median = 0.0, p90 = 0.0, p99 = 0.0;
    std::size_t pairs = 0;
};

struct MutualPair {
    std::uint32_t a, b;
};

/// Mutual nearest neighbors between two clouds (each is the other's nearest).
std::vector<MutualPair> mutual_nearest_neighbors(const PointCloud& a, const PointCloud& b);

/// |(p_a - p_b) . n(p_a)| over mutual nearest neighbors whose A point has a
/// valid normal. `a` needs normals.
/// Throws InvalidInput("clouds do not overlap") without any mutual pair.
Misalignment misalignment(const PointCloud& a, const PointCloud& b);

}  // namespace airfuse::eval
