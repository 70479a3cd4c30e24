#include "airfuse/aabb_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace airfuse {

Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
    // Voronoi-region walk over vertices, edges and the face.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0)
        return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3)
        return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
        return a + ab * (d1 / (d1 - d3));
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6)
        return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
        return a + ac * (d2 / (d2 - d6));
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    const double denom = va + vb + vc;
    if (!(denom > 0.0)) {
        // Degenerate (zero-area) triangle: closest of its three edges.
        auto on_segment = [&](const Point3& s, const Point3& t) {
            const Vec3 d = t - s;
            const double len2 = d.squaredNorm();
            const double u = len2 > 0.0 ? std::clamp((p - s).dot(d) / len2, 0.0, 1.0) : 0.0;
            return Point3(s + u * d);
        };
        Point3 best = on_segment(a, b);
        for (const Point3& q : {on_segment(b, c), on_segment(c, a)})
            if ((q - p).squaredNorm() < (best - p).squaredNorm())
                best = q;
        return best;
    }
    const double v = vb / denom, w = vc / denom;
    return a + ab * v + ac * w;
}

namespace {
constexpr std::uint32_t kLeafSize = 4;

double box_dist2(const Point3& q, const Vec3& lo, const Vec3& hi) {
    return (q - q.cwiseMax(lo).cwiseMin(hi)).squaredNorm();
}
}  // namespace

AabbTree::AabbTree(const TriangleMesh& mesh) {
    tris_.reserve(mesh.triangle_count());
    for (const auto& t : mesh.triangles)
        tris_.push_back({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]});
    centers_.reserve(tris_.size());
    for (const auto& t : tris_)
        centers_.push_back((t[0] + t[1] + t[2]) / 3.0);
    order_.resize(tris_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!tris_.empty()) {
        nodes_.reserve(2 * tris_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(tris_.size()));
    }
}

std::int32_t AabbTree::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    Vec3 clo = node.lo, chi = node.hi;
    for (std::uint32_t i = begin; i < end; ++i) {
        for (const auto& p : tris_[order_[i]]) {
            node.lo = node.lo.cwiseMin(p);
            node.hi = node.hi.cwiseMax(p);
        }
        clo = clo.cwiseMin(centers_[order_[i]]);
        chi = chi.cwiseMax(centers_[order_[i]]);
    }
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize)
        return id;
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return centers_[a][axis] < centers_[b][axis]; });
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

AabbTree::Hit AabbTree::closest(const Point3& q) const {
    if (tris_.empty())
        throw InvalidInput("closest point query on an empty mesh");
    Hit best{0, Point3::Zero(), std::numeric_limits<double>::infinity()};
    std::vector<std::int32_t> stack{0};
    stack.reserve(64);
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (box_dist2(q, node.lo, node.hi) > best.dist2)
            continue;
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t t = order_[i];
                const Point3 c = closest_point_on_triangle(q, tris_[t][0], tris_[t][1], tris_[t][2]);
                const double d2 = (c - q).squaredNorm();
                if (d2 < best.dist2 || (d2 == best.dist2 && t < best.triangle))
                    best = {t, c, d2};
            }
            continue;
        }
        // Visit the nearer child first.
        const double dl = box_dist2(q, nodes_[node.left].lo, nodes_[node.left].hi);
        const double dr = box_dist2(q, nodes_[node.right].lo, nodes_[node.right].hi);
        if (dl <= dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return best;
}

double AabbTree::distance(const Point3& q) const { return std::sqrt(closest(q).dist2); }

}  // namespace airfuse
