#include "airfuse/types.hpp"

#include <cmath>

namespace airfuse {

const char* to_string(Source s) { return s == Source::street ? "street" : "aerial"; }

ParseError::ParseError(const std::string& path, std::size_t record, const std::string& what)
    : Error(path + ": record " + std::to_string(record) + ": " + what), record_(record) {}

void PointCloud::reserve(std::size_t n) {
    points.reserve(n);
    source.reserve(n);
    visibility.reserve(n);
}

void PointCloud::push_back(const Point3& p, Source s, std::vector<std::uint32_t> vis) {
    points.push_back(p);
    source.push_back(s);
    visibility.push_back(std::move(vis));
}

void PointCloud::check(std::size_t sensor_count) const {
    const std::size_t n = points.size();
    if (source.size() != n || visibility.size() != n || (!normals.empty() && normals.size() != n))
        throw InvalidInput("point cloud arrays have mismatched lengths");
    for (std::size_t i = 0; i < n; ++i) {
        if (!points[i].allFinite())
            throw InvalidInput("point " + std::to_string(i) + " has a non-finite coordinate");
        if (!normals.empty()) {
            const double len = normals[i].norm();
            if (len != 0.0 && std::abs(len - 1.0) > 1e-6)
                throw InvalidInput("normal of point " + std::to_string(i) + " is not unit length");
        }
        for (std::uint32_t s : visibility[i])
            if (s >= sensor_count)
                throw InvalidInput("sensor index out of range: point " + std::to_string(i) +
                                   " references sensor " + std::to_string(s) + " of " +
                                   std::to_string(sensor_count));
    }
}

PointCloud concat(const PointCloud& a, const PointCloud& b, std::uint32_t b_sensor_offset) {
    PointCloud out = a;
    out.reserve(a.size() + b.size());
    const bool normals = a.has_normals() && b.has_normals();
    if (!normals)
        out.normals.clear();
    for (std::size_t i = 0; i < b.size(); ++i) {
        std::vector<std::uint32_t> vis = b.visibility[i];
        for (auto& s : vis)
            s += b_sensor_offset;
        out.push_back(b.points[i], b.source[i], std::move(vis));
        if (normals)
            out.normals.push_back(b.normals[i]);
    }
    return out;
}

SensorSet concat(const SensorSet& a, const SensorSet& b) {
    SensorSet out = a;
    out.positions.insert(out.positions.end(), b.positions.begin(), b.positions.end());
    return out;
}

}  // namespace airfuse
