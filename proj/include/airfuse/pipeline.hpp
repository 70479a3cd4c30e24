#pragma once

#include "airfuse/blending.hpp"
#include "airfuse/eval.hpp"
#include "airfuse/fusion.hpp"
#include "airfuse/mesh.hpp"
#include "airfuse/postprocess.hpp"
#include "airfuse/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace airfuse::pipeline {

inline constexpr int kReportVersion = 1;

struct PipelineConfig {
    std::string aerial_path;
    std::string street_path;  // empty: aerial-only reconstruction
    std::string sensors_aerial_path;
    std::string sensors_street_path;
    std::string output_path = "fused.ply";
    std::string report_path;     // empty: no report file
    std::string reference_path;  // empty: no evaluation
    std::string cdf_path;        // CDF samples, written only with a reference
    std::string blend_debug_path;

    blending::BlendParams blend;
    fusion::FusionParams fusion;
    std::size_t normal_k = 10;
    double voxel_size = 0.0;
    bool one_ray_per_point = false;
    std::size_t smooth_iterations = 1;
    bool keep_largest_component = true;
    std::uint64_t seed = 12345;
    unsigned threads = 0;
    double memory_budget_gb = 4.0;
    bool ascii_output = false;

    /// Throws InvalidInput naming the first offending field.
    void validate() const;

    /// Unknown keys are rejected; missing keys keep their defaults.
    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Input {
    PointCloud aerial;
    PointCloud street;  // may be empty
    SensorSet aerial_sensors;
    SensorSet street_sensors;
    std::optional<TriangleMesh> reference;
};

/// Seconds per stage. tet, ray and gco are the triangulation, the vote
/// accumulation and the min-cut; total also covers untimed glue.
struct Timings {
    double normals = 0, blend = 0, decimate = 0, tet = 0, ray = 0, gco = 0, extract = 0, post = 0, eval = 0;
    double total = 0;
};

struct Counts {
    std::size_t aerial_points = 0, street_points = 0;
    std::size_t removed_aerial = 0, blended_points = 0, decimated_points = 0;
    std::size_t rays = 0, skipped_points = 0, infinite_exits = 0;
    std::size_t vertices = 0, tets = 0, inside_tets = 0;
    std::size_t raw_triangles = 0, mesh_vertices = 0, mesh_triangles = 0;
};

struct Report {
    Counts counts;
    Timings timings;
    double energy = 0.0;        // inside/outside labeling energy
    double blend_energy = 0.0;  // 0 without a street cloud
    bool blended = false;
    post::TopologyReport raw_topology;  // extracted surface before filtering
    post::TopologyReport topology;      // final mesh
    double density = 0.0;               // input points per m^2 of output surface
    std::optional<eval::ErrorStats> error;

    nlohmann::json to_json(const PipelineConfig& config) const;
};

struct Result {
    TriangleMesh mesh;
    Report report;
    std::optional<blending::BlendResult> blend;
};

/// Error raised inside a stage; what() starts with "<stage>: ".
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Runs normals -> blend -> decimate -> rays -> 3DT -> fuse -> postprocess ->
/// evaluate on in-memory data. Street visibility indexes street_sensors.
Result run(const Input& input, const PipelineConfig& config);

/// Loads the configured inputs, runs the pipeline and writes the mesh, report
/// and optional CSVs. Files written by a failed run are removed.
Report run_files(const PipelineConfig& config);

/// Rough peak memory of the triangulation and fusion stages, in bytes.
double estimate_memory_bytes(std::size_t points);

}  // namespace airfuse::pipeline
