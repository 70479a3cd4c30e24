#include "airfuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace airfuse::eval {
namespace {

constexpr double kSegmentEps = 1e-9;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }
bool nonneg_finite(double x) { return std::isfinite(x) && x >= 0.0; }

bool in_footprint(const Building& b, double x, double y) {
    return std::abs(x - b.cx) <= 0.5 * b.sx && std::abs(y - b.cy) <= 0.5 * b.sy;
}

double rect_distance(const Rect& r, const Point3& p) {
    const Vec3 d = p - r.origin;
    const double a = std::clamp(d.dot(r.u) / r.u.squaredNorm(), 0.0, 1.0);
    const double b = std::clamp(d.dot(r.v) / r.v.squaredNorm(), 0.0, 1.0);
    return (r.origin + a * r.u + b * r.v - p).norm();
}

std::size_t expected_count(double density, double area) {
    return static_cast<std::size_t>(std::llround(density * area));
}

// Four walls with outward normals, then the roof.
void add_building_faces(const Building& b, std::vector<Rect>& faces) {
    const double x0 = b.cx - 0.5 * b.sx, x1 = b.cx + 0.5 * b.sx;
    const double y0 = b.cy - 0.5 * b.sy, y1 = b.cy + 0.5 * b.sy;
    const Vec3 up(0, 0, b.height);
    faces.push_back({{x1, y0, 0}, {0, b.sy, 0}, up, {1, 0, 0}, SurfaceKind::facade});
    faces.push_back({{x1, y1, 0}, {-b.sx, 0, 0}, up, {0, 1, 0}, SurfaceKind::facade});
    faces.push_back({{x0, y1, 0}, {0, -b.sy, 0}, up, {-1, 0, 0}, SurfaceKind::facade});
    faces.push_back({{x0, y0, 0}, {b.sx, 0, 0}, up, {0, -1, 0}, SurfaceKind::facade});
    faces.push_back({{x0, y0, b.height}, {b.sx, 0, 0}, {0, b.sy, 0}, {0, 0, 1}, SurfaceKind::roof});
}

class Generator {
public:
    Generator(SyntheticScene& scene, std::uint64_t seed) : scene_(scene), rng_(seed) {}

    Point3 uniform_on(const Rect& r) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double a = unit(rng_);
        const double b = unit(rng_);
        return r.origin + a * r.u + b * r.v;
    }

    Vec3 noise(double sigma) {
        if (sigma == 0.0)
            return Vec3::Zero();
        std::normal_distribution<double> n(0.0, sigma);
        const double x = n(rng_);
        const double y = n(rng_);
        const double z = n(rng_);
        return {x, y, z};
    }

    std::vector<std::uint32_t> visible(const Point3& p, const Vec3& normal, const SensorSet& sensors,
                                       double range) const {
        std::vector<std::uint32_t> vis;
        for (std::size_t s = 0; s < sensors.size(); ++s) {
            const Vec3 d = sensors.positions[s] - p;
            if (d.dot(normal) <= 0.0 || d.norm() > range)
                continue;
            if (!scene_.occluded(p, sensors.positions[s]))
                vis.push_back(static_cast<std::uint32_t>(s));
        }
        return vis;
    }

    void emit(PointCloud& cloud, std::vector<Point3>& footpoints, const Point3& foot, const Vec3& normal,
              const Vec3& offset, double sigma, Source tag, const SensorSet& sensors, double range) {
        auto vis = visible(foot, normal, sensors, range);
        const Vec3 eps = noise(sigma);  // drawn even for dropped points to keep streams aligned
        if (vis.empty())
            return;
        cloud.push_back(foot + offset + eps, tag, std::move(vis));
        footpoints.push_back(foot);
    }

    std::mt19937_64& rng() { return rng_; }

private:
    SyntheticScene& scene_;
    std::mt19937_64 rng_;
};

}  // namespace

void SceneParams::validate() const {
    if (!positive_finite(ground_half_extent))
        throw InvalidInput("scene: ground_half_extent must be > 0");
    for (std::size_t i = 0; i < buildings.size(); ++i) {
        const Building& b = buildings[i];
        if (!positive_finite(b.sx) || !positive_finite(b.sy) || !positive_finite(b.height) ||
            !std::isfinite(b.cx) || !std::isfinite(b.cy))
            throw InvalidInput("scene: building " + std::to_string(i) + " has a non-positive size");
        if (std::abs(b.cx) + 0.5 * b.sx >= ground_half_extent || std::abs(b.cy) + 0.5 * b.sy >= ground_half_extent)
            throw InvalidInput("scene: building " + std::to_string(i) + " extends past the ground patch");
        for (std::size_t j = 0; j < i; ++j) {
            const Building& o = buildings[j];
            if (std::abs(b.cx - o.cx) <= 0.5 * (b.sx + o.sx) && std::abs(b.cy - o.cy) <= 0.5 * (b.sy + o.sy))
                throw InvalidInput("scene: buildings " + std::to_string(j) + " and " + std::to_string(i) + " touch");
        }
    }
    for (double d : {aerial_ground_density, aerial_roof_density, aerial_facade_density, street_facade_density})
        if (!nonneg_finite(d))
            throw InvalidInput("scene: densities must be finite and >= 0");
    if (!nonneg_finite(aerial_noise) || !nonneg_finite(street_noise) || !nonneg_finite(facade_bulge))
        throw InvalidInput("scene: noise and bulge must be finite and >= 0");
    if (aerial_ring_sensors < 0 || !positive_finite(aerial_ring_radius) || !positive_finite(aerial_height))
        throw InvalidInput("scene: invalid aerial sensor ring");
    if (street && (!positive_finite(street_max_height) || !positive_finite(street_offset) ||
                   !positive_finite(street_sensor_height) || !positive_finite(street_sensor_spacing) ||
                   !positive_finite(street_range)))
        throw InvalidInput("scene: invalid street scan parameters");
}

bool SyntheticScene::occluded(const Point3& from, const Point3& to) const {
    const Vec3 d = to - from;
    for (const Rect& r : faces) {
        const double denom = r.normal.dot(d);
        if (denom == 0.0)
            continue;
        const double t = r.normal.dot(r.origin - from) / denom;
        if (!(t > kSegmentEps && t < 1.0 - kSegmentEps))
            continue;
        const Vec3 q = from + t * d - r.origin;
        const double a = q.dot(r.u) / r.u.squaredNorm();
        const double b = q.dot(r.v) / r.v.squaredNorm();
        if (a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0)
            return true;
    }
    return false;
}

double SyntheticScene::distance_to_surface(const Point3& p) const {
    double best = std::numeric_limits<double>::infinity();
    // Ground with the footprints cut out. Above a footprint the nearest ground
    // point lies on the footprint rim, which is never closer than the wall.
    const bool over_footprint = std::any_of(params.buildings.begin(), params.buildings.end(),
                                            [&](const Building& b) { return in_footprint(b, p.x(), p.y()); });
    if (!over_footprint)
        best = rect_distance(faces.front(), p);
    for (std::size_t i = 1; i < faces.size(); ++i)
        best = std::min(best, rect_distance(faces[i], p));
    return best;
}

std::vector<SurfaceSample> SyntheticScene::sample_surface(double spacing) const {
    if (!positive_finite(spacing))
        throw InvalidInput("sample_surface: spacing must be > 0");
    std::vector<SurfaceSample> out;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Rect& r = faces[f];
        const auto na = static_cast<std::size_t>(std::ceil(r.u.norm() / spacing));
        const auto nb = static_cast<std::size_t>(std::ceil(r.v.norm() / spacing));
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nb; ++j) {
                const Point3 p = r.origin + (i + 0.5) / na * r.u + (j + 0.5) / nb * r.v;
                if (f == 0 && std::any_of(params.buildings.begin(), params.buildings.end(),
                                          [&](const Building& b) { return in_footprint(b, p.x(), p.y()); }))
                    continue;
                bool covered = false;
                if (r.kind == SurfaceKind::facade && params.street && p.z() <= params.street_max_height)
                    for (const Point3& s : street_sensors.positions) {
                        const Vec3 d = s - p;
                        if (d.dot(r.normal) > 0.0 && d.norm() <= params.street_range && !occluded(p, s)) {
                            covered = true;
                            break;
                        }
                    }
                out.push_back({p, r.normal, r.kind, covered});
            }
    }
    return out;
}

TriangleMesh SyntheticScene::ground_truth_mesh(double spacing) const {
    if (!positive_finite(spacing))
        throw InvalidInput("ground_truth_mesh: spacing must be > 0");
    TriangleMesh mesh;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Rect& r = faces[f];
        const auto na = static_cast<std::size_t>(std::ceil(r.u.norm() / spacing));
        const auto nb = static_cast<std::size_t>(std::ceil(r.v.norm() / spacing));
        const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
        auto id = [&](std::size_t i, std::size_t j) { return base + static_cast<std::uint32_t>(i * (nb + 1) + j); };
        for (std::size_t i = 0; i <= na; ++i)
            for (std::size_t j = 0; j <= nb; ++j) {
                const Point3 p = r.origin + double(i) / na * r.u + double(j) / nb * r.v;
                bool street = false;
                if (r.kind == SurfaceKind::facade && params.street && p.z() <= params.street_max_height) {
                    // Probe slightly off the wall so rim vertices are not self-occluded by neighbors.
                    const Point3 probe = p + 1e-6 * r.normal;
                    for (const Point3& s : street_sensors.positions) {
                        const Vec3 d = s - probe;
                        if (d.dot(r.normal) > 0.0 && d.norm() <= params.street_range && !occluded(probe, s)) {
                            street = true;
                            break;
                        }
                    }
                }
                mesh.vertices.push_back(p);
                mesh.source.push_back(street ? Source::street : Source::aerial);
            }
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nb; ++j) {
                if (f == 0) {
                    const Point3 c = r.origin + (i + 0.5) / na * r.u + (j + 0.5) / nb * r.v;
                    if (std::any_of(params.buildings.begin(), params.buildings.end(),
                                    [&](const Building& b) { return in_footprint(b, c.x(), c.y()); }))
                        continue;
                }
                // u x v is the outward normal for every face.
                mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            }
    }
    mesh.remove_unreferenced_vertices();
    return mesh;
}

SyntheticScene generate_scene(const SceneParams& params, std::uint64_t seed) {
    params.validate();
    SyntheticScene scene;
    scene.params = params;
    const double g = params.ground_half_extent;
    scene.faces.push_back({{-g, -g, 0}, {2 * g, 0, 0}, {0, 2 * g, 0}, {0, 0, 1}, SurfaceKind::ground});
    for (const Building& b : params.buildings)
        add_building_faces(b, scene.faces);

    for (int i = 0; i < params.aerial_ring_sensors; ++i) {
        const double a = 2.0 * std::numbers::pi * i / params.aerial_ring_sensors;
        scene.aerial_sensors.positions.emplace_back(params.aerial_ring_radius * std::cos(a),
                                                    params.aerial_ring_radius * std::sin(a), params.aerial_height);
    }
    scene.aerial_sensors.positions.emplace_back(0.0, 0.0, params.aerial_height);

    if (params.street) {
        // A closed path around each building at a fixed offset from its walls.
        for (const Building& b : params.buildings) {
            const double hx = 0.5 * b.sx + params.street_offset, hy = 0.5 * b.sy + params.street_offset;
            const Point3 corners[4] = {{b.cx - hx, b.cy - hy, params.street_sensor_height},
                                       {b.cx + hx, b.cy - hy, params.street_sensor_height},
                                       {b.cx + hx, b.cy + hy, params.street_sensor_height},
                                       {b.cx - hx, b.cy + hy, params.street_sensor_height}};
            for (int k = 0; k < 4; ++k) {
                const Vec3 edge = corners[(k + 1) % 4] - corners[k];
                const auto steps = static_cast<int>(std::ceil(edge.norm() / params.street_sensor_spacing - 1e-9));
                for (int s = 0; s < steps; ++s)
                    scene.street_sensors.positions.push_back(corners[k] + edge * (double(s) / steps));
            }
        }
    }

    Generator gen(scene, seed);
    const double inf = std::numeric_limits<double>::infinity();

    // Aerial: ground, roofs, facades.
    const Rect& ground = scene.faces.front();
    const std::size_t n_ground = expected_count(params.aerial_ground_density, ground.area());
    for (std::size_t i = 0; i < n_ground; ++i) {
        const Point3 p = gen.uniform_on(ground);
        const bool hidden = std::any_of(params.buildings.begin(), params.buildings.end(),
                                        [&](const Building& b) { return in_footprint(b, p.x(), p.y()); });
        if (hidden) {
            gen.noise(params.aerial_noise);
            continue;
        }
        gen.emit(scene.aerial, scene.aerial_footpoints, p, ground.normal, Vec3::Zero(), params.aerial_noise,
                 Source::aerial, scene.aerial_sensors, inf);
    }
    for (std::size_t f = 1; f < scene.faces.size(); ++f) {
        const Rect& r = scene.faces[f];
        const bool roof = r.kind == SurfaceKind::roof;
        const double density = roof ? params.aerial_roof_density : params.aerial_facade_density;
        const std::size_t n = expected_count(density, r.area());
        const double height = r.v.z();
        for (std::size_t i = 0; i < n; ++i) {
            const Point3 p = gen.uniform_on(r);
            const Vec3 offset = roof ? Vec3::Zero() : Vec3(params.facade_bulge * (1.0 - p.z() / height) * r.normal);
            gen.emit(scene.aerial, scene.aerial_footpoints, p, r.normal, offset, params.aerial_noise,
                     Source::aerial, scene.aerial_sensors, inf);
        }
    }

    // Street: lower facades only.
    if (params.street) {
        for (const Rect& r : scene.faces) {
            if (r.kind != SurfaceKind::facade)
                continue;
            Rect lower = r;
            lower.v = r.v * (std::min(params.street_max_height, r.v.z()) / r.v.z());
            const std::size_t n = expected_count(params.street_facade_density, lower.area());
            for (std::size_t i = 0; i < n; ++i) {
                const Point3 p = gen.uniform_on(lower);
                gen.emit(scene.street, scene.street_footpoints, p, r.normal, Vec3::Zero(), params.street_noise,
                         Source::street, scene.street_sensors, params.street_range);
            }
        }
    }
    return scene;
}

}  // namespace airfuse::eval
