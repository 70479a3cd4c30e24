#pragma once

#include "airfuse/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace airfuse::mincut {

struct PairwiseTerm {
    std::uint32_t i, j;
    double weight;  // paid when labels differ
};

/// First-order binary energy with non-negative unary costs and Potts
/// pairwise terms:  E(l) = sum_i unary_i(l_i) + sum_(i,j) w_ij [l_i != l_j].
class BinaryEnergy {
public:
    BinaryEnergy() = default;
    explicit BinaryEnergy(std::size_t n_nodes) : unary_(n_nodes, {0.0, 0.0}) {}

    std::size_t size() const { return unary_.size(); }

    /// Replaces node i's unary costs. Throws InvalidInput on negative or non-finite costs.
    void set_unary(std::uint32_t i, double cost0, double cost1);
    void add_unary(std::uint32_t i, double cost0, double cost1);

    /// Throws InvalidInput for i == j, out-of-range nodes, or a negative or
    /// non-finite weight. Duplicate undirected edges are rejected by solve().
    void add_pairwise(std::uint32_t i, std::uint32_t j, double weight);

    const std::array<double, 2>& unary(std::uint32_t i) const { return unary_[i]; }
    const std::vector<std::array<double, 2>>& unaries() const { return unary_; }
    const std::vector<PairwiseTerm>& pairwise() const { return pairwise_; }

    /// Energy of a complete labeling (one 0/1 entry per node).
    double evaluate(const std::vector<std::uint8_t>& labels) const;

private:
    std::vector<std::array<double, 2>> unary_;
    std::vector<PairwiseTerm> pairwise_;
};

struct Solution {
    std::vector<std::uint8_t> labels;
    double energy = 0.0;    // recomputed from labels
    double max_flow = 0.0;  // flow through the reduced graph
    double constant = 0.0;  // sum_i min(unary_i(0), unary_i(1)) removed before the cut
};

/// Exact global minimizer via s/t max-flow (Boykov-Kolmogorov augmenting
/// paths with tree reuse). Label 0 is the source side. Among optimal
/// labelings the one with the smallest source set is returned, so nodes
/// without any preference end up with label 1.
Solution solve(const BinaryEnergy& energy);

}  // namespace airfuse::mincut
