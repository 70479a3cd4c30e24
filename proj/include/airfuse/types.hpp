#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace airfuse {

using Vec3 = Eigen::Vector3d;
using Point3 = Vec3;

/// Acquisition source of a point or mesh vertex.
enum class Source : std::uint8_t { aerial = 0, street = 1 };

const char* to_string(Source s);

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the offending line (ASCII) or record (binary).
class ParseError : public Error {
public:
    ParseError(const std::string& path, std::size_t record, const std::string& what);
    std::size_t record() const { return record_; }

private:
    std::size_t record_;
};

/// Parameter or data outside an operation's contract.
class InvalidInput : public Error {
public:
    using Error::Error;
};

struct SensorSet {
    std::vector<Point3> positions;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
};

/// Parallel-array point cloud. A normal of (0,0,0) marks a point whose
/// neighborhood was too degenerate to fit a plane.
struct PointCloud {
    std::vector<Point3> points;
    std::vector<Vec3> normals;  // empty, or one per point
    std::vector<Source> source;
    std::vector<std::vector<std::uint32_t>> visibility;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_normals() const { return !normals.empty(); }
    bool normal_valid(std::size_t i) const { return has_normals() && normals[i].squaredNorm() > 0.0; }

    void reserve(std::size_t n);
    void push_back(const Point3& p, Source s, std::vector<std::uint32_t> vis);

    /// Throws InvalidInput if arrays disagree in length, a coordinate is not
    /// finite, a valid normal is not unit length, or a visibility index is
    /// out of range of `sensor_count`.
    void check(std::size_t sensor_count) const;
};

/// Concatenates `b` after `a`; b's visibility indices are shifted by `b_sensor_offset`.
PointCloud concat(const PointCloud& a, const PointCloud& b, std::uint32_t b_sensor_offset);

SensorSet concat(const SensorSet& a, const SensorSet& b);

/// Line of sight from a point (or triangulation vertex) to a sensor position.
struct Ray {
    std::uint32_t origin;
    std::uint32_t sensor_index;
    Point3 sensor;
};

}  // namespace airfuse
