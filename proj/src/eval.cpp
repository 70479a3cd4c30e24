#include "airfuse/eval.hpp"

#include "airfuse/aabb_tree.hpp"
#include "airfuse/kdtree.hpp"
#include "airfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace airfuse::eval {

std::vector<double> point_distances(const std::vector<Point3>& points, const TriangleMesh& candidate) {
    if (candidate.empty())
        throw InvalidInput("mesh_distance: candidate mesh has no triangles");
    const AabbTree tree(candidate);
    std::vector<double> d(points.size());
    parallel_for(points.size(), [&](std::size_t i) { d[i] = tree.distance(points[i]); });
    return d;
}

std::vector<double> mesh_distance(const TriangleMesh& reference, const TriangleMesh& candidate) {
    return point_distances(reference.vertices, candidate);
}

double fraction_above(const std::vector<double>& values, double threshold) {
    if (values.empty())
        return 0.0;
    const auto n = std::count_if(values.begin(), values.end(), [&](double v) { return v > threshold; });
    return static_cast<double>(n) / static_cast<double>(values.size());
}

namespace {

std::vector<CdfSample> cdf_of(std::vector<double> values, std::size_t max_rows = 200) {
    std::vector<CdfSample> out;
    if (values.empty())
        return out;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t rows = std::min(n, max_rows);
    for (std::size_t r = 1; r <= rows; ++r) {
        const std::size_t idx = (r * n + rows - 1) / rows - 1;  // last sample of this bucket
        out.push_back({values[idx], static_cast<double>(idx + 1) / static_cast<double>(n)});
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ErrorStats partition_stats(const std::vector<double>& distances, const std::vector<Source>& tags) {
    if (distances.size() != tags.size())
        throw InvalidInput("partition_stats: one tag per distance required");
    std::vector<double> street, aerial;
    for (std::size_t i = 0; i < distances.size(); ++i)
        (tags[i] == Source::street ? street : aerial).push_back(distances[i]);
    ErrorStats s;
    s.aerial_count = aerial.size();
    s.street_count = street.size();
    if (!aerial.empty())
        s.mean_aerial = mean_of(aerial);
    if (!street.empty()) {
        s.mean_street = mean_of(street);
        s.frac_street_gt_10cm = fraction_above(street, 0.10);
        s.frac_street_gt_50cm = fraction_above(street, 0.50);
    }
    s.cdf_street = cdf_of(street);
    s.cdf_aerial = cdf_of(aerial);
    return s;
}

void write_cdf_csv(const std::string& path, const ErrorStats& stats) {
    std::ofstream os(path);
    if (!os)
        throw Error("cannot write " + path);
    os.precision(10);
    os << "region,distance,fraction\n";
    for (const auto& c : stats.cdf_street)
        os << "street," << c.distance << ',' << c.fraction << '\n';
    for (const auto& c : stats.cdf_aerial)
        os << "aerial," << c.distance << ',' << c.fraction << '\n';
    if (!os)
        throw Error("write failed: " + path);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty())
        throw InvalidInput("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<MutualPair> mutual_nearest_neighbors(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty())
        return {};
    const KdTree ta(a.points), tb(b.points);
    std::vector<std::uint32_t> nn_ab(a.size()), nn_ba(b.size());
    parallel_for(a.size(), [&](std::size_t i) { nn_ab[i] = tb.nearest(a.points[i]).index; });
    parallel_for(b.size(), [&](std::size_t j) { nn_ba[j] = ta.nearest(b.points[j]).index; });
    std::vector<MutualPair> pairs;
    for (std::uint32_t i = 0; i < a.size(); ++i)
        if (nn_ba[nn_ab[i]] == i)
            pairs.push_back({i, nn_ab[i]});
    return pairs;
}

Misalignment misalignment(const PointCloud& a, const PointCloud& b) {
    if (!a.has_normals())
        throw InvalidInput("misalignment: first cloud needs normals");
    const auto pairs = mutual_nearest_neighbors(a, b);
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& p : pairs)
        if (a.normal_valid(p.a))
            d.push_back(std::abs((a.points[p.a] - b.points[p.b]).dot(a.normals[p.a])));
    if (d.empty())
        throw InvalidInput("clouds do not overlap");
    Misalignment m;
    m.pairs = d.size();
    m.median = percentile(d, 50);
    m.p90 = percentile(d, 90);
    m.p99 = percentile(d, 99);
    return m;
}

}  // namespace airfuse::eval
