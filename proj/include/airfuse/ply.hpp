#pragma once

#include "airfuse/mesh.hpp"
#include "airfuse/types.hpp"

#include <string>

namespace airfuse {

enum class PlyFormat { ascii, binary_little_endian };

/// Reads a point cloud from a PLY file.
///
/// Vertices must carry x, y, z and a list property `visibility` of sensor
/// indices with at least one entry each; nx, ny, nz are optional. Every
/// point is tagged with `tag` regardless of any `source` property in the
/// file. Visibility indices are validated against `sensors`.
///
/// ParseError::record() is the line number for ASCII syntax errors, the
/// record index for binary ones, and the vertex index for content errors
/// (empty visibility, sensor out of range, non-finite coordinate).
PointCloud load_point_cloud(const std::string& path, Source tag, const SensorSet& sensors);

/// Writes x, y, z (float64), optional nx, ny, nz (float64), source (uchar)
/// and visibility (list uint uint).
void save_point_cloud(const std::string& path, const PointCloud& cloud,
                      PlyFormat format = PlyFormat::binary_little_endian);

/// Sensor positions, one "x y z" triple per line. Blank lines and lines
/// starting with '#' are skipped.
SensorSet load_sensors(const std::string& path);
void save_sensors(const std::string& path, const SensorSet& sensors);

/// Reads a triangle mesh; the optional vertex property `source` (uchar,
/// 1 = street) restores per-vertex tags, otherwise all vertices are aerial.
TriangleMesh load_mesh(const std::string& path);

/// Writes a triangle mesh with its per-vertex source tag. With `colors`,
/// street vertices are written orange and aerial vertices light gray.
void save_mesh(const std::string& path, const TriangleMesh& mesh,
               PlyFormat format = PlyFormat::binary_little_endian, bool colors = true);

}  // namespace airfuse
