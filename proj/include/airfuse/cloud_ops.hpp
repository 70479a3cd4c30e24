#pragma once

#include "airfuse/types.hpp"

#include <cstddef>
#include <vector>

namespace airfuse {

/// Fits a total-least-squares plane to each point and its k nearest
/// neighbors and stores the unit plane normal, oriented toward the mean of
/// the point's visible sensors. Points whose neighborhood is collinear or
/// coincident get a zero normal (see PointCloud::normal_valid).
///
/// Requires cloud.size() >= k + 1.
PointCloud estimate_normals(PointCloud cloud, const SensorSet& sensors, std::size_t k = 10);

/// Voxel-grid decimation anchored at the world origin.
///
/// Each occupied voxel (index floor(p / voxel_size) per axis) becomes one
/// point at the centroid of its members, with the union of their
/// visibility lists and the majority source tag (ties go to street).
/// Output order follows the first member of each voxel in input order.
/// Normals are dropped; the caller re-estimates them. voxel_size == 0
/// returns the input unchanged.
PointCloud decimate(const PointCloud& cloud, double voxel_size);

struct RaySet {
    std::vector<Ray> rays;
    std::size_t skipped_points = 0;  // points without any visible sensor
};

/// One ray per (point, visible sensor) pair, or with `reduce_to_one` only the
/// ray whose direction is closest to the point normal (lowest sensor index on
/// ties). Ray origins are point indices. Sensors coinciding with their point
/// are dropped.
RaySet build_rays(const PointCloud& cloud, const SensorSet& sensors, bool reduce_to_one);

}  // namespace airfuse
