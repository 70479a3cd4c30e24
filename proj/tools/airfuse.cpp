// Command-line front end: fuse, generate, eval, misalign.
#include "airfuse/cloud_ops.hpp"
#include "airfuse/eval.hpp"
#include "airfuse/pipeline.hpp"
#include "airfuse/ply.hpp"
#include "airfuse/scene.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using airfuse::pipeline::PipelineConfig;
using json = nlohmann::json;

namespace {

struct FuseArgs {
    std::string config_file;
    std::optional<std::string> aerial, street, sensors_aerial, sensors_street, out, reference, report, cdf;
    std::optional<double> vox, lambda, sigma_in, sigma_out, gamma, sigma_b, lambda_b;
    std::optional<std::size_t> smooth_iters;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool truncate = false, one_ray = false, ascii = false;
};

// Config-file paths are relative to the config file; flag paths to the working directory.
void resolve(std::string& path, const fs::path& base) {
    if (!path.empty() && fs::path(path).is_relative())
        path = (base / path).lexically_normal().string();
}

PipelineConfig build_config(const FuseArgs& a) {
    PipelineConfig c;
    if (!a.config_file.empty()) {
        std::ifstream in(a.config_file);
        if (!in)
            throw airfuse::InvalidInput("cannot open config " + a.config_file);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw airfuse::InvalidInput("config " + a.config_file + ": " + e.what());
        }
        c = PipelineConfig::from_json(j);
        const fs::path base = fs::path(a.config_file).parent_path();
        for (std::string* p : {&c.aerial_path, &c.street_path, &c.sensors_aerial_path, &c.sensors_street_path,
                               &c.output_path, &c.report_path, &c.reference_path, &c.cdf_path, &c.blend_debug_path})
            resolve(*p, base);
    }
    auto set = [](auto& dst, const auto& src) {
        if (src)
            dst = *src;
    };
    set(c.aerial_path, a.aerial);
    set(c.street_path, a.street);
    set(c.sensors_aerial_path, a.sensors_aerial);
    set(c.sensors_street_path, a.sensors_street);
    set(c.output_path, a.out);
    set(c.reference_path, a.reference);
    set(c.report_path, a.report);
    set(c.cdf_path, a.cdf);
    set(c.voxel_size, a.vox);
    set(c.fusion.lambda, a.lambda);
    set(c.fusion.sigma_in, a.sigma_in);
    set(c.fusion.sigma_out, a.sigma_out);
    if (a.gamma)
        c.fusion.gamma_in = c.fusion.gamma_out = *a.gamma;
    set(c.blend.sigma_b, a.sigma_b);
    set(c.blend.lambda_b, a.lambda_b);
    set(c.smooth_iterations, a.smooth_iters);
    set(c.seed, a.seed);
    set(c.threads, a.threads);
    if (a.truncate)
        c.fusion.truncate_out = true;
    if (a.one_ray)
        c.one_ray_per_point = true;
    if (a.ascii)
        c.ascii_output = true;
    return c;
}

int run_fuse(const FuseArgs& args) {
    PipelineConfig config;
    try {
        config = build_config(args);
        config.validate();
    } catch (const airfuse::Error& e) {
        std::cerr << "airfuse fuse: " << e.what() << '\n';
        return 2;
    }
    const auto report = airfuse::pipeline::run_files(config);
    std::cout << report.to_json(config).dump(2) << '\n';
    return 0;
}

struct GenerateArgs {
    std::string out_dir = "scene";
    std::uint64_t seed = 1;
    double noise = 0.05, bulge = 0.0, gt_spacing = 0.25;
    bool no_street = false;
};

int run_generate(const GenerateArgs& a) {
    airfuse::eval::SceneParams params;
    params.aerial_noise = params.street_noise = a.noise;
    params.facade_bulge = a.bulge;
    const auto scene = airfuse::eval::generate_scene(params, a.seed);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    airfuse::save_point_cloud((dir / "aerial.ply").string(), scene.aerial);
    airfuse::save_sensors((dir / "sensors_aerial.txt").string(), scene.aerial_sensors);
    airfuse::save_point_cloud((dir / "street.ply").string(), scene.street);
    airfuse::save_sensors((dir / "sensors_street.txt").string(), scene.street_sensors);
    airfuse::save_mesh((dir / "reference.ply").string(), scene.ground_truth_mesh(a.gt_spacing));

    PipelineConfig c;
    c.aerial_path = "aerial.ply";
    c.sensors_aerial_path = "sensors_aerial.txt";
    if (!a.no_street) {
        c.street_path = "street.ply";
        c.sensors_street_path = "sensors_street.txt";
    }
    c.reference_path = "reference.ply";
    c.output_path = "fused.ply";
    c.report_path = "report.json";
    std::ofstream((dir / "config.json").string()) << c.to_json().dump(2) << '\n';
    std::cout << "aerial points " << scene.aerial.size() << ", street points " << scene.street.size() << " -> "
              << dir.string() << '\n';
    return 0;
}

int run_eval(const std::string& reference, const std::string& mesh, const std::string& cdf) {
    const auto ref = airfuse::load_mesh(reference);
    const auto cand = airfuse::load_mesh(mesh);
    const auto stats = airfuse::eval::partition_stats(airfuse::eval::mesh_distance(ref, cand), ref.source);
    if (!cdf.empty())
        airfuse::eval::write_cdf_csv(cdf, stats);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    std::cout << json{{"mean_aerial", opt(stats.mean_aerial)},
                      {"mean_street", opt(stats.mean_street)},
                      {"frac_street_gt_10cm", opt(stats.frac_street_gt_10cm)},
                      {"frac_street_gt_50cm", opt(stats.frac_street_gt_50cm)},
                      {"aerial_count", stats.aerial_count},
                      {"street_count", stats.street_count}}
                     .dump(2)
              << '\n';
    return 0;
}

int run_misalign(const std::string& a, const std::string& sa, const std::string& b, const std::string& sb,
                 std::size_t k) {
    const auto sensors_a = airfuse::load_sensors(sa);
    const auto sensors_b = airfuse::load_sensors(sb);
    auto cloud_a = airfuse::load_point_cloud(a, airfuse::Source::aerial, sensors_a);
    const auto cloud_b = airfuse::load_point_cloud(b, airfuse::Source::street, sensors_b);
    if (!cloud_a.has_normals())
        cloud_a = airfuse::estimate_normals(std::move(cloud_a), sensors_a, k);
    const auto m = airfuse::eval::misalignment(cloud_a, cloud_b);
    std::cout << json{{"median", m.median}, {"p90", m.p90}, {"p99", m.p99}, {"pairs", m.pairs}}.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"airfuse: fuse aerial and street point clouds into a watertight mesh"};
    app.require_subcommand(1);

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "run the reconstruction pipeline");
    fuse->add_option("config", fa.config_file, "JSON config file")->check(CLI::ExistingFile);
    fuse->add_option("--aerial", fa.aerial, "aerial point cloud (PLY)");
    fuse->add_option("--street", fa.street, "street point cloud (PLY)");
    fuse->add_option("--sensors-aerial", fa.sensors_aerial, "aerial sensor positions");
    fuse->add_option("--sensors-street", fa.sensors_street, "street sensor positions");
    fuse->add_option("--out", fa.out, "output mesh (PLY)");
    fuse->add_option("--vox", fa.vox, "voxel size for decimation, 0 disables");
    fuse->add_flag("--truncate-rays", fa.truncate, "stop forward walks at 3 sigma_out");
    fuse->add_flag("--one-ray-per-point", fa.one_ray, "keep only the ray closest to the normal");
    fuse->add_option("--lambda", fa.lambda, "surface area weight");
    fuse->add_option("--sigma-in", fa.sigma_in, "inside score scale (m)");
    fuse->add_option("--sigma-out", fa.sigma_out, "outside score scale (m)");
    fuse->add_option("--gamma", fa.gamma, "vote saturation, both sides");
    fuse->add_option("--sigma-b", fa.sigma_b, "blending vicinity scale (m)");
    fuse->add_option("--lambda-b", fa.lambda_b, "blending smoothness weight");
    fuse->add_option("--smooth-iters", fa.smooth_iters, "Laplacian smoothing iterations");
    fuse->add_option("--reference", fa.reference, "reference mesh for evaluation");
    fuse->add_option("--report", fa.report, "JSON run report");
    fuse->add_option("--cdf", fa.cdf, "CSV of error CDF samples");
    fuse->add_option("--seed", fa.seed, "seed for the point-location walk");
    fuse->add_option("--threads", fa.threads, "worker threads, 0 = all cores");
    fuse->add_flag("--ascii", fa.ascii, "write ASCII PLY");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "write the synthetic box scene");
    gen->add_option("--out-dir", ga.out_dir, "output directory")->capture_default_str();
    gen->add_option("--seed", ga.seed, "random seed")->capture_default_str();
    gen->add_option("--noise", ga.noise, "point noise sigma (m)")->capture_default_str();
    gen->add_option("--bulge", ga.bulge, "aerial facade bulge at the wall foot (m)")->capture_default_str();
    gen->add_option("--gt-spacing", ga.gt_spacing, "reference mesh grid spacing (m)")->capture_default_str();
    gen->add_flag("--no-street", ga.no_street, "config without the street cloud");

    std::string ev_ref, ev_mesh, ev_cdf;
    auto* ev = app.add_subcommand("eval", "distance statistics of a mesh against a tagged reference");
    ev->add_option("--reference", ev_ref, "reference mesh")->required()->check(CLI::ExistingFile);
    ev->add_option("--mesh", ev_mesh, "evaluated mesh")->required()->check(CLI::ExistingFile);
    ev->add_option("--cdf", ev_cdf, "CSV of error CDF samples");

    std::string ma, msa, mb, msb;
    std::size_t mk = 10;
    auto* mis = app.add_subcommand("misalign", "mutual-nearest-neighbor offsets between two clouds");
    mis->add_option("--a", ma, "cloud A (normals used)")->required()->check(CLI::ExistingFile);
    mis->add_option("--sensors-a", msa, "sensors of A")->required()->check(CLI::ExistingFile);
    mis->add_option("--b", mb, "cloud B")->required()->check(CLI::ExistingFile);
    mis->add_option("--sensors-b", msb, "sensors of B")->required()->check(CLI::ExistingFile);
    mis->add_option("--k", mk, "neighbors for normals when A has none")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*fuse)
            return run_fuse(fa);
        if (*gen)
            return run_generate(ga);
        if (*ev)
            return run_eval(ev_ref, ev_mesh, ev_cdf);
        return run_misalign(ma, msa, mb, msb, mk);
    } catch (const std::exception& e) {
        std::cerr << "airfuse: " << e.what() << '\n';
        return 1;
    }
}
