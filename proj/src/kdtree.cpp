#include "airfuse/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace airfuse {
namespace {
constexpr std::uint32_t kLeafSize = 8;

double box_dist2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = q[k] < lo[k] ? lo[k] - q[k] : (q[k] > hi[k] ? q[k] - hi[k] : 0.0);
        d2 += d * d;
    }
    return d2;
}
}  // namespace

KdTree::KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        node.lo = node.lo.cwiseMin(points_[order_[i]]);
        node.hi = node.hi.cwiseMax(points_[order_[i]]);
    }
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize)
        return id;

    Vec3 extent = node.hi - node.lo;
    int axis = 0;
    extent.maxCoeff(&axis);
    if (extent[axis] == 0.0)
        return id;  // all coincident
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(std::int32_t id, const Point3& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    if (heap.size() == k && box_dist2(q, node.lo, node.hi) > heap.front().dist2)
        return;
    if (node.left < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t idx = order_[i];
            const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    const bool go_left = q[node.axis] < node.split;
    search(go_left ? node.left : node.right, q, k, heap);
    search(go_left ? node.right : node.left, q, k, heap);
}

void KdTree::knn(const Point3& query, std::size_t k, std::vector<Neighbor>& out) const {
    out.clear();
    if (points_.empty())
        throw InvalidInput("knn on an empty point set");
    if (k > points_.size())
        throw InvalidInput("knn: k exceeds the number of points");
    if (k == 0)
        return;
    out.reserve(k);
    search(0, query, k, out);
    std::sort_heap(out.begin(), out.end());
}

std::vector<Neighbor> KdTree::knn(const Point3& query, std::size_t k) const {
    std::vector<Neighbor> out;
    knn(query, k, out);
    return out;
}

Neighbor KdTree::nearest(const Point3& query) const {
    std::vector<Neighbor> out;
    knn(query, 1, out);
    return out.front();
}

std::vector<std::uint32_t> knn(const PointCloud& cloud, const Point3& query, std::size_t k) {
    if (cloud.empty())
        throw InvalidInput("knn on an empty cloud");
    const KdTree tree(cloud.points);
    std::vector<std::uint32_t> ids;
    for (const auto& n : tree.knn(query, k))
        ids.push_back(n.index);
    return ids;
}

}  // namespace airfuse
