#pragma once

#include "airfuse/mesh.hpp"
#include "airfuse/types.hpp"

#include <cstdint>
#include <vector>

namespace airfuse::eval {

/// Axis-aligned box building standing on the ground plane z = 0.
struct Building {
    double cx = 0.0, cy = 0.0;   // footprint center
    double sx = 10.0, sy = 10.0; // footprint size
    double height = 8.0;
};

struct SceneParams {
    double ground_half_extent = 20.0;
    std::vector<Building> buildings{Building{}};

    double aerial_ground_density = 15.0;  // points per m^2
    double aerial_roof_density = 15.0;
    double aerial_facade_density = 2.0;
    double aerial_noise = 0.05;  // isotropic Gaussian sigma, meters
    /// Outward facade offset at the foot of a wall, fading linearly to 0 at the roof.
    double facade_bulge = 0.0;
    int aerial_ring_sensors = 12;
    double aerial_ring_radius = 30.0;
    double aerial_height = 60.0;

    bool street = true;
    double street_facade_density = 100.0;
    double street_max_height = 6.0;  // facades are covered up to this height
    double street_noise = 0.05;
    double street_offset = 6.0;  // sensor path distance from the walls
    double street_sensor_height = 2.0;
    double street_sensor_spacing = 2.0;
    double street_range = 15.0;

    void validate() const;
};

enum class SurfaceKind : std::uint8_t { ground, roof, facade };

/// Planar rectangle origin + a*u + b*v, a, b in [0, 1]; u and v orthogonal.
struct Rect {
    Point3 origin;
    Vec3 u, v;
    Vec3 normal;  // outward, unit
    SurfaceKind kind;

    double area() const { return u.cross(v).norm(); }
};

struct SurfaceSample {
    Point3 point;
    Vec3 normal;
    SurfaceKind kind;
    bool street_covered;  // facade part seen by the street-level scan
};

struct SyntheticScene {
    SceneParams params;
    std::vector<Rect> faces;  // ground (one rectangle) then walls and roofs
    SensorSet aerial_sensors, street_sensors;
    PointCloud aerial, street;  // each indexes its own sensor set
    std::vector<Point3> aerial_footpoints, street_footpoints;  // noise- and bulge-free

    /// True if the open segment from `from` to `to` crosses a scene face.
    bool occluded(const Point3& from, const Point3& to) const;

    /// Exact distance to the analytic surface (ground outside footprints, walls, roofs).
    double distance_to_surface(const Point3& p) const;

    /// Deterministic grid samples of the visible surface at the given spacing
    /// (ground under buildings excluded).
    std::vector<SurfaceSample> sample_surface(double spacing) const;

    /// Triangulated analytic surface with street tags on covered facade parts.
    TriangleMesh ground_truth_mesh(double spacing) const;
};

/// Deterministic for a fixed seed.
SyntheticScene generate_scene(const SceneParams& params, std::uint64_t seed);

}  // namespace airfuse::eval
