#pragma once

#include "airfuse/mesh.hpp"

#include <cstdint>
#include <vector>

namespace airfuse {

/// Closest point to p on triangle abc.
Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c);

/// Bounding-volume hierarchy over the triangles of a mesh for exact
/// closest-point queries. Holds a copy of the geometry.
class AabbTree {
public:
    explicit AabbTree(const TriangleMesh& mesh);

    struct Hit {
        std::uint32_t triangle;
        Point3 point;
        double dist2;
    };

    /// Nearest triangle; the mesh must have at least one triangle.
    Hit closest(const Point3& q) const;
    double distance(const Point3& q) const;

private:
    struct Node {
        Vec3 lo, hi;
        std::uint32_t begin, end;  // range into order_
        std::int32_t left = -1, right = -1;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<std::array<Point3, 3>> tris_;
    std::vector<Point3> centers_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace airfuse
