#pragma once

#include "airfuse/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace airfuse {

struct Neighbor {
    std::uint32_t index;
    double dist2;

    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Static kd-tree for exact Euclidean k-nearest-neighbor queries.
///
/// Results are ordered by ascending distance; equal distances are ordered
/// by ascending point index. Immutable after construction, so concurrent
/// queries are safe.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::span<const Point3> points);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Point3& point(std::uint32_t i) const { return points_[i]; }

    /// Fills `out` (cleared first). Requires k <= size().
    void knn(const Point3& query, std::size_t k, std::vector<Neighbor>& out) const;
    std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;
    Neighbor nearest(const Point3& query) const;

private:
    struct Node {
        std::uint32_t begin, end;       // range into order_
        std::int32_t left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
        Vec3 lo, hi;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::int32_t node, const Point3& q, std::size_t k, std::vector<Neighbor>& heap) const;

    std::vector<Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

/// k nearest point indices of `query` in `cloud`, ascending distance.
std::vector<std::uint32_t> knn(const PointCloud& cloud, const Point3& query, std::size_t k);

}  // namespace airfuse
