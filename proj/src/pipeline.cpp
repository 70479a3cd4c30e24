#include "airfuse/pipeline.hpp"

#include "airfuse/cloud_ops.hpp"
#include "airfuse/delaunay.hpp"
#include "airfuse/parallel.hpp"
#include "airfuse/ply.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <utility>

namespace airfuse::pipeline {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn, adds its wall time to `slot` and tags any failure with the stage name.
template <typename Fn>
auto stage(const char* name, double& slot, Fn&& fn) {
    const auto start = Clock::now();
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            slot += seconds_since(start);
        } else {
            auto out = fn();
            slot += seconds_since(start);
            return out;
        }
    } catch (const StageError&) {
        throw;
    } catch (const std::bad_alloc&) {
        throw StageError(name, "out of memory");
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end())
        out = it->template get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys)
            known = known || key == k;
        if (!known)
            throw InvalidInput("config: unknown key '" + where + key + "'");
    }
}

json topology_json(const post::TopologyReport& t) {
    return {{"watertight", t.watertight},
            {"manifold", t.manifold},
            {"oriented", t.oriented},
            {"components", t.components},
            {"boundary_edges", t.boundary_edges},
            {"nonmanifold_edges", t.nonmanifold_edges},
            {"degenerate_triangles", t.degenerate_triangles}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

StageError::StageError(std::string stage, const std::string& what)
    : Error(stage + ": " + what), stage_(std::move(stage)) {}

double estimate_memory_bytes(std::size_t points) {
    // About 6.5 tets per point; each tet carries its vertex and neighbor
    // lists, votes, a max-flow node and four half-arcs.
    constexpr double kTetsPerPoint = 6.5;
    constexpr double kBytesPerTet = 32 + 20 + 56 + 4 * 24;
    constexpr double kBytesPerPoint = 200;
    return static_cast<double>(points) * (kBytesPerPoint + kTetsPerPoint * kBytesPerTet);
}

void PipelineConfig::validate() const {
    try {
        blend.validate();
        fusion.validate();
    } catch (const InvalidInput& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    if (normal_k < 2)
        throw InvalidInput("config: normal_k must be >= 2");
    if (!std::isfinite(voxel_size) || voxel_size < 0.0)
        throw InvalidInput("config: voxel_size must be finite and >= 0");
    if (!std::isfinite(memory_budget_gb) || memory_budget_gb <= 0.0)
        throw InvalidInput("config: memory_budget_gb must be > 0");
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (!j.is_object())
        throw InvalidInput("config: expected a JSON object");
    reject_unknown(j,
                   {"aerial", "street", "sensors_aerial", "sensors_street", "output", "report", "reference", "cdf",
                    "blend_debug", "blend", "fusion", "normal_k", "voxel_size", "one_ray_per_point",
                    "smooth_iterations", "keep_largest_component", "seed", "threads", "memory_budget_gb",
                    "ascii_output"},
                   "");
    PipelineConfig c;
    try {
        read(j, "aerial", c.aerial_path);
        read(j, "street", c.street_path);
        read(j, "sensors_aerial", c.sensors_aerial_path);
        read(j, "sensors_street", c.sensors_street_path);
        read(j, "output", c.output_path);
        read(j, "report", c.report_path);
        read(j, "reference", c.reference_path);
        read(j, "cdf", c.cdf_path);
        read(j, "blend_debug", c.blend_debug_path);
        if (const auto it = j.find("blend"); it != j.end()) {
            reject_unknown(*it, {"sigma_b", "lambda_b", "k_graph"}, "blend.");
            read(*it, "sigma_b", c.blend.sigma_b);
            read(*it, "lambda_b", c.blend.lambda_b);
            read(*it, "k_graph", c.blend.k_graph);
        }
        if (const auto it = j.find("fusion"); it != j.end()) {
            reject_unknown(*it, {"sigma_in", "sigma_out", "gamma_in", "gamma_out", "lambda", "truncate_rays"},
                           "fusion.");
            read(*it, "sigma_in", c.fusion.sigma_in);
            read(*it, "sigma_out", c.fusion.sigma_out);
            read(*it, "gamma_in", c.fusion.gamma_in);
            read(*it, "gamma_out", c.fusion.gamma_out);
            read(*it, "lambda", c.fusion.lambda);
            read(*it, "truncate_rays", c.fusion.truncate_out);
        }
        read(j, "normal_k", c.normal_k);
        read(j, "voxel_size", c.voxel_size);
        read(j, "one_ray_per_point", c.one_ray_per_point);
        read(j, "smooth_iterations", c.smooth_iterations);
        read(j, "keep_largest_component", c.keep_largest_component);
        read(j, "seed", c.seed);
        read(j, "threads", c.threads);
        read(j, "memory_budget_gb", c.memory_budget_gb);
        read(j, "ascii_output", c.ascii_output);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    return c;
}

json PipelineConfig::to_json() const {
    return {{"aerial", aerial_path},
            {"street", street_path},
            {"sensors_aerial", sensors_aerial_path},
            {"sensors_street", sensors_street_path},
            {"output", output_path},
            {"report", report_path},
            {"reference", reference_path},
            {"cdf", cdf_path},
            {"blend_debug", blend_debug_path},
            {"blend", {{"sigma_b", blend.sigma_b}, {"lambda_b", blend.lambda_b}, {"k_graph", blend.k_graph}}},
            {"fusion",
             {{"sigma_in", fusion.sigma_in},
              {"sigma_out", fusion.sigma_out},
              {"gamma_in", fusion.gamma_in},
              {"gamma_out", fusion.gamma_out},
              {"lambda", fusion.lambda},
              {"truncate_rays", fusion.truncate_out}}},
            {"normal_k", normal_k},
            {"voxel_size", voxel_size},
            {"one_ray_per_point", one_ray_per_point},
            {"smooth_iterations", smooth_iterations},
            {"keep_largest_component", keep_largest_component},
            {"seed", seed},
            {"threads", threads},
            {"memory_budget_gb", memory_budget_gb},
            {"ascii_output", ascii_output}};
}

json Report::to_json(const PipelineConfig& config) const {
    json err = nullptr;
    if (error) {
        err = {{"mean_aerial", optional_json(error->mean_aerial)},
               {"mean_street", optional_json(error->mean_street)},
               {"frac_street_gt_10cm", optional_json(error->frac_street_gt_10cm)},
               {"frac_street_gt_50cm", optional_json(error->frac_street_gt_50cm)},
               {"aerial_count", error->aerial_count},
               {"street_count", error->street_count}};
    }
    const Counts& c = counts;
    const Timings& t = timings;
    return {{"report_version", kReportVersion},
            {"config", config.to_json()},
            {"counts",
             {{"aerial_points", c.aerial_points},
              {"street_points", c.street_points},
              {"removed_aerial", c.removed_aerial},
              {"blended_points", c.blended_points},
              {"decimated_points", c.decimated_points},
              {"rays", c.rays},
              {"skipped_points", c.skipped_points},
              {"infinite_exits", c.infinite_exits},
              {"vertices", c.vertices},
              {"tets", c.tets},
              {"inside_tets", c.inside_tets},
              {"raw_triangles", c.raw_triangles},
              {"mesh_vertices", c.mesh_vertices},
              {"mesh_triangles", c.mesh_triangles}}},
            {"timings",
             {{"tet", t.tet},
              {"ray", t.ray},
              {"gco", t.gco},
              {"total", t.total},
              {"stages",
               {{"normals", t.normals},
                {"blend", t.blend},
                {"decimate", t.decimate},
                {"extract", t.extract},
                {"post", t.post},
                {"eval", t.eval}}}}},
            {"energy", {{"labeling", energy}, {"blend", blend_energy}}},
            {"blended", blended},
            {"topology", {{"raw", topology_json(raw_topology)}, {"final", topology_json(topology)}}},
            {"density", density},
            {"error", err}};
}

Result run(const Input& input, const PipelineConfig& config) {
    const auto start = Clock::now();
    config.validate();
    if (config.threads > 0)
        set_thread_count(config.threads);

    Result result;
    Report& rep = result.report;
    Timings& t = rep.timings;
    double unused = 0.0;

    stage("input", unused, [&] {
        if (input.aerial.empty())
            throw InvalidInput("aerial cloud is empty");
        input.aerial.check(input.aerial_sensors.size());
        input.street.check(input.street_sensors.size());
    });
    rep.counts.aerial_points = input.aerial.size();
    rep.counts.street_points = input.street.size();

    const SensorSet sensors = concat(input.aerial_sensors, input.street_sensors);
    const auto street_offset = static_cast<std::uint32_t>(input.aerial_sensors.size());

    PointCloud aerial, street;
    stage("normals", t.normals, [&] {
        aerial = estimate_normals(input.aerial, input.aerial_sensors, config.normal_k);
        if (!input.street.empty()) {
            street = estimate_normals(input.street, input.street_sensors, config.normal_k);
            for (auto& vis : street.visibility)
                for (auto& s : vis)
                    s += street_offset;
        }
    });

    PointCloud cloud;
    if (!street.empty()) {
        result.blend = stage("blend", t.blend, [&] { return blending::blend(aerial, street, config.blend); });
        rep.blended = true;
        rep.blend_energy = result.blend->energy;
        rep.counts.removed_aerial = result.blend->removed;
        cloud = result.blend->cloud;
    } else {
        cloud = std::move(aerial);
    }
    rep.counts.blended_points = cloud.size();

    if (config.voxel_size > 0.0) {
        stage("decimate", t.decimate, [&] {
            cloud = estimate_normals(decimate(cloud, config.voxel_size), sensors, config.normal_k);
        });
    }
    rep.counts.decimated_points = cloud.size();

    const double budget = config.memory_budget_gb * 1e9;
    const double needed = estimate_memory_bytes(cloud.size());
    if (needed > budget)
        throw StageError("tet", "estimated memory " + std::to_string(needed / 1e9) + " GB exceeds the budget of " +
                                    std::to_string(config.memory_budget_gb) + " GB");

    const auto dt = stage("tet", t.tet, [&] { return delaunay::tetrahedralize(cloud, config.seed); });
    rep.counts.vertices = dt.num_vertices();
    rep.counts.tets = dt.num_tets();

    const auto votes = stage("ray", t.ray, [&] {
        const RaySet set = build_rays(cloud, sensors, config.one_ray_per_point);
        rep.counts.skipped_points = set.skipped_points;
        const auto rays = delaunay::remap_rays(dt, set.rays);
        rep.counts.rays = rays.size();
        return fusion::accumulate_votes(dt, rays, config.fusion);
    });
    rep.counts.infinite_exits = votes.infinite_exits;

    const auto labeling = stage("gco", t.gco, [&] {
        return fusion::solve_labeling(dt, fusion::unary_energy(votes, config.fusion), config.fusion.lambda);
    });
    rep.energy = labeling.energy;
    rep.counts.inside_tets = labeling.inside;

    TriangleMesh raw = stage("extract", t.extract, [&] { return fusion::extract_surface(dt, labeling.labels); });
    rep.raw_topology = post::validate(raw);
    rep.counts.raw_triangles = raw.triangle_count();

    result.mesh = stage("post", t.post, [&] {
        TriangleMesh m = config.keep_largest_component ? post::largest_component(raw) : std::move(raw);
        return post::laplacian_smooth(m, config.smooth_iterations);
    });
    rep.topology = post::validate(result.mesh);
    rep.counts.mesh_vertices = result.mesh.vertex_count();
    rep.counts.mesh_triangles = result.mesh.triangle_count();
    const double area = result.mesh.total_area();
    rep.density = area > 0.0 ? static_cast<double>(input.aerial.size() + input.street.size()) / area : 0.0;

    if (input.reference) {
        rep.error = stage("eval", t.eval, [&] {
            const auto d = eval::mesh_distance(*input.reference, result.mesh);
            return eval::partition_stats(d, input.reference->source);
        });
    }
    t.total = seconds_since(start);
    return result;
}

Report run_files(const PipelineConfig& config) {
    const auto start = Clock::now();
    config.validate();
    if (config.aerial_path.empty() || config.sensors_aerial_path.empty())
        throw InvalidInput("config: aerial and sensors_aerial paths are required");
    if (!config.street_path.empty() && config.sensors_street_path.empty())
        throw InvalidInput("config: a street cloud needs sensors_street");
    if (config.output_path.empty())
        throw InvalidInput("config: output path is required");

    double load_time = 0.0;
    Input input = stage("load", load_time, [&] {
        Input in;
        in.aerial_sensors = load_sensors(config.sensors_aerial_path);
        in.aerial = load_point_cloud(config.aerial_path, Source::aerial, in.aerial_sensors);
        if (!config.street_path.empty()) {
            in.street_sensors = load_sensors(config.sensors_street_path);
            in.street = load_point_cloud(config.street_path, Source::street, in.street_sensors);
        }
        if (!config.reference_path.empty())
            in.reference = load_mesh(config.reference_path);
        return in;
    });

    std::vector<std::filesystem::path> written;
    try {
        Result result = run(input, config);
        double write_time = 0.0;
        stage("write", write_time, [&] {
            const auto format = config.ascii_output ? PlyFormat::ascii : PlyFormat::binary_little_endian;
            written.emplace_back(config.output_path);
            save_mesh(config.output_path, result.mesh, format);
            if (!config.blend_debug_path.empty() && result.blend) {
                written.emplace_back(config.blend_debug_path);
                blending::write_debug_csv(config.blend_debug_path, *result.blend);
            }
            if (!config.cdf_path.empty() && result.report.error) {
                written.emplace_back(config.cdf_path);
                eval::write_cdf_csv(config.cdf_path, *result.report.error);
            }
            result.report.timings.total = seconds_since(start);
            if (!config.report_path.empty()) {
                written.emplace_back(config.report_path);
                std::ofstream out(config.report_path);
                if (!out)
                    throw Error("cannot open " + config.report_path + " for writing");
                out << result.report.to_json(config).dump(2) << '\n';
                if (!out)
                    throw Error("failed writing " + config.report_path);
            }
        });
        return result.report;
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written)
            if (std::filesystem::is_regular_file(p, ec))
                std::filesystem::remove(p, ec);
        throw;
    }
}

}  // namespace airfuse::pipeline
