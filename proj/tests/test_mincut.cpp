#include "airfuse/mincut.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <set>

using namespace airfuse;
using mincut::BinaryEnergy;

namespace {

double brute_force_min(const BinaryEnergy& e) {
    const std::size_t n = e.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> labels(n);
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
        for (std::size_t i = 0; i < n; ++i)
            labels[i] = (mask >> i) & 1u;
        best = std::min(best, e.evaluate(labels));
    }
    return best;
}

BinaryEnergy random_energy(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_dist(1, 15);
    std::uniform_real_distribution<double> cost(0.0, 10.0);
    const int n = n_dist(rng);
    BinaryEnergy e(n);
    for (int i = 0; i < n; ++i)
        e.set_unary(i, cost(rng), cost(rng));
    const int max_edges = std::min(30, n * (n - 1) / 2);
    std::uniform_int_distribution<int> m_dist(0, max_edges);
    const int m = m_dist(rng);
    std::set<std::pair<int, int>> used;
    std::uniform_int_distribution<int> node(0, n - 1);
    while (static_cast<int>(used.size()) < m) {
        int i = node(rng), j = node(rng);
        if (i == j)
            continue;
        if (!used.insert({std::min(i, j), std::max(i, j)}).second)
            continue;
        e.add_pairwise(i, j, cost(rng));
    }
    return e;
}

}  // namespace

TEST_CASE("single node") {
    BinaryEnergy e(1);
    e.set_unary(0, 0.2, 0.8);
    const auto s = mincut::solve(e);
    CHECK(s.labels == std::vector<std::uint8_t>{0});
    CHECK(s.energy == doctest::Approx(0.2));
}

TEST_CASE("strong coupling picks one of the two optima") {
    BinaryEnergy e(2);
    e.set_unary(0, 0, 10);
    e.set_unary(1, 10, 0);
    e.add_pairwise(0, 1, 100);
    const auto s = mincut::solve(e);
    CHECK(s.labels[0] == s.labels[1]);
    CHECK(s.energy == doctest::Approx(10));
}

TEST_CASE("nodes without preference get label 1") {
    BinaryEnergy e(3);
    e.add_pairwise(0, 1, 1.0);
    const auto s = mincut::solve(e);
    CHECK(s.labels == std::vector<std::uint8_t>{1, 1, 1});
    CHECK(s.energy == 0.0);
}

TEST_CASE("invalid energies are rejected") {
    BinaryEnergy e(3);
    CHECK_THROWS_AS(e.set_unary(0, -1, 0), InvalidInput);
    CHECK_THROWS_AS(e.set_unary(0, std::numeric_limits<double>::quiet_NaN(), 0), InvalidInput);
    CHECK_THROWS_AS(e.set_unary(0, std::numeric_limits<double>::infinity(), 0), InvalidInput);
    CHECK_THROWS_AS(e.set_unary(5, 0, 0), InvalidInput);
    CHECK_THROWS_AS(e.add_pairwise(1, 1, 1.0), InvalidInput);
    CHECK_THROWS_AS(e.add_pairwise(0, 1, -0.5), InvalidInput);
    CHECK_THROWS_AS(e.add_pairwise(0, 3, 1.0), InvalidInput);
    e.add_pairwise(0, 1, 1.0);
    e.add_pairwise(1, 0, 2.0);
    CHECK_THROWS_AS(mincut::solve(e), InvalidInput);
}

TEST_CASE("random instances match exhaustive enumeration") {
    std::mt19937_64 rng(2024);
    const auto t0 = std::chrono::steady_clock::now();
    for (int seed = 0; seed < 1000; ++seed) {
        const BinaryEnergy e = random_energy(rng);
        const auto s = mincut::solve(e);
        const double best = brute_force_min(e);
        REQUIRE(std::abs(s.energy - best) <= 1e-9 * std::max(1.0, std::abs(best)));
        // Max-flow equals the cut energy minus the constant of the reduction.
        CHECK(std::abs(s.max_flow + s.constant - s.energy) <= 1e-9 * std::max(1.0, s.energy));
        CHECK(std::abs(e.evaluate(s.labels) - s.energy) <= 1e-12 * std::max(1.0, s.energy));
        // Deterministic.
        CHECK(mincut::solve(e).labels == s.labels);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 10.0);
}

TEST_CASE("larger grid instance agrees with energy bookkeeping") {
    // 2D grid with random unaries; cut value must equal recomputed energy.
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> cost(0.0, 1.0);
    const int w = 80, h = 80;
    BinaryEnergy e(w * h);
    for (int i = 0; i < w * h; ++i)
        e.set_unary(i, cost(rng), cost(rng));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w)
                e.add_pairwise(y * w + x, y * w + x + 1, 0.3 * cost(rng));
            if (y + 1 < h)
                e.add_pairwise(y * w + x, (y + 1) * w + x, 0.3 * cost(rng));
        }
    const auto s = mincut::solve(e);
    CHECK(std::abs(s.max_flow + s.constant - s.energy) <= 1e-9 * s.energy);
    // No single flip improves a global optimum.
    auto labels = s.labels;
    for (std::size_t i = 0; i < labels.size(); i += 37) {
        labels[i] ^= 1u;
        CHECK(e.evaluate(labels) >= s.energy - 1e-9);
        labels[i] ^= 1u;
    }
}
