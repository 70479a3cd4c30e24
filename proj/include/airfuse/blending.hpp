#pragma once

#include "airfuse/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace airfuse::blending {

struct BlendParams {
    double sigma_b = 2.0;      // vicinity scale, meters
    double lambda_b = 1.0;     // smoothness weight
    std::size_t k_graph = 10;  // neighbors in the aerial smoothing graph

    /// Throws InvalidInput unless sigma_b > 0, lambda_b >= 0, k_graph >= 1.
    void validate() const;
};

struct SubstituteScore {
    double phi = 0.0;  // exp(-d^2 / (2 sigma_b^2)) * max(0, cos_theta)
    std::uint32_t nn_index = 0;
    double distance = 0.0;
    double cos_theta = 0.0;  // 0 when either normal is invalid
};

/// For every aerial point, the nearest street point and how well it could
/// replace the aerial point. An empty street cloud gives phi = 0 everywhere.
std::vector<SubstituteScore> substitute_likelihood(const PointCloud& aerial, const PointCloud& street,
                                                   const BlendParams& params);

/// exp(-d / median_d); throws InvalidInput unless median_d > 0.
double pairwise_weight(double d, double median_d);

struct BlendResult {
    PointCloud cloud;                   // street points, then kept aerial points
    std::vector<std::uint8_t> labels;   // per aerial point: 0 removed, 1 kept
    std::vector<SubstituteScore> scores;
    double energy = 0.0;
    std::size_t removed = 0;
};

/// Removes aerial points that have street substitutes by minimizing
///   sum_i [l_i = 0](1 - phi_i) + [l_i = 1] phi_i + lambda_b sum_(i,j) psi_ij [l_i != l_j]
/// over the symmetrized k-NN graph of the aerial cloud. Both clouds need
/// normals and must index one shared sensor set. Ties keep the point.
BlendResult blend(const PointCloud& aerial, const PointCloud& street, const BlendParams& params);

/// CSV with one row per aerial point: index,phi,distance,cos_theta,nn_index,label.
void write_debug_csv(const std::string& path, const BlendResult& result);

}  // namespace airfuse::blending
