#include "airfuse/blending.hpp"

#include "airfuse/kdtree.hpp"
#include "airfuse/mincut.hpp"
#include "airfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace airfuse::blending {

void BlendParams::validate() const {
    if (!(sigma_b > 0.0) || !std::isfinite(sigma_b))
        throw InvalidInput("blend: sigma_b must be > 0");
    if (!(lambda_b >= 0.0) || !std::isfinite(lambda_b))
        throw InvalidInput("blend: lambda_b must be >= 0");
    if (k_graph < 1)
        throw InvalidInput("blend: k_graph must be >= 1");
}

std::vector<SubstituteScore> substitute_likelihood(const PointCloud& aerial, const PointCloud& street,
                                                   const BlendParams& params) {
    params.validate();
    std::vector<SubstituteScore> scores(aerial.size());
    if (street.empty() || aerial.empty())
        return scores;
    if (!aerial.has_normals() || !street.has_normals())
        throw InvalidInput("blend: both clouds need normals");
    const KdTree tree(street.points);
    const double two_sigma2 = 2.0 * params.sigma_b * params.sigma_b;
    parallel_for(aerial.size(), [&](std::size_t i) {
        const Neighbor nn = tree.nearest(aerial.points[i]);
        SubstituteScore& s = scores[i];
        s.nn_index = nn.index;
        s.distance = std::sqrt(nn.dist2);
        s.cos_theta = aerial.normal_valid(i) && street.normal_valid(nn.index)
                          ? aerial.normals[i].dot(street.normals[nn.index])
                          : 0.0;
        s.phi = std::exp(-nn.dist2 / two_sigma2) * std::max(0.0, s.cos_theta);
    });
    return scores;
}

double pairwise_weight(double d, double median_d) {
    if (!(median_d > 0.0))
        throw InvalidInput("blend: median k-NN distance is zero (coincident aerial cloud)");
    return std::exp(-d / median_d);
}

BlendResult blend(const PointCloud& aerial, const PointCloud& street, const BlendParams& params) {
    params.validate();
    BlendResult result;
    result.scores = substitute_likelihood(aerial, street, params);
    const std::size_t n = aerial.size();

    mincut::BinaryEnergy energy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = result.scores[i].phi;
        energy.set_unary(static_cast<std::uint32_t>(i), 1.0 - phi, phi);
    }

    const std::size_t k = std::min(params.k_graph, n > 0 ? n - 1 : 0);
    if (k > 0 && params.lambda_b > 0.0) {
        const KdTree tree(aerial.points);
        std::vector<std::vector<Neighbor>> nbrs(n);
        parallel_for(n, [&](std::size_t i) { tree.knn(aerial.points[i], k + 1, nbrs[i]); });

        std::vector<double> dists;
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        dists.reserve(n * k);
        edges.reserve(n * k);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t taken = 0;
            for (const Neighbor& nb : nbrs[i]) {
                if (nb.index == i || taken == k)
                    continue;
                ++taken;
                dists.push_back(std::sqrt(nb.dist2));
                const auto a = static_cast<std::uint32_t>(i);
                edges.emplace_back(std::min(a, nb.index), std::max(a, nb.index));
            }
        }
        std::vector<double> sorted = dists;
        const std::size_t mid = sorted.size() / 2;
        std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
        double median = sorted[mid];
        if (sorted.size() % 2 == 0) {
            const double lower = *std::max_element(sorted.begin(), sorted.begin() + mid);
            median = 0.5 * (median + lower);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (const auto& [i, j] : edges)
            energy.add_pairwise(i, j,
                                params.lambda_b *
                                    pairwise_weight((aerial.points[i] - aerial.points[j]).norm(), median));
    }

    const mincut::Solution sol = mincut::solve(energy);
    result.labels = sol.labels;
    result.energy = sol.energy;

    result.cloud = street;
    const bool normals = aerial.has_normals() && (street.empty() || street.has_normals());
    if (!normals)
        result.cloud.normals.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (result.labels[i] == 0) {
            ++result.removed;
            continue;
        }
        result.cloud.push_back(aerial.points[i], aerial.source[i], aerial.visibility[i]);
        if (normals)
            result.cloud.normals.push_back(aerial.normals[i]);
    }
    return result;
}

void write_debug_csv(const std::string& path, const BlendResult& result) {
    std::ofstream os(path);
    if (!os)
        throw Error("cannot write " + path);
    os.precision(10);
    os << "index,phi,distance,cos_theta,nn_index,label\n";
    for (std::size_t i = 0; i < result.scores.size(); ++i) {
        const auto& s = result.scores[i];
        os << i << ',' << s.phi << ',' << s.distance << ',' << s.cos_theta << ',' << s.nn_index << ','
           << int(result.labels[i]) << '\n';
    }
    if (!os)
        throw Error("write failed: " + path);
}

}  // namespace airfuse::blending
