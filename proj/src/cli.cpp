// Copyright 2026 The snerg-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <snerg/baker.hpp>
#include <snerg/bundle.hpp>
#include <snerg/cli.hpp>
#include <snerg/finetune.hpp>
#include <snerg/renderer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

namespace snerg::cli {

namespace {

namespace fs = std::filesystem;

/// Bad flag values detected after parsing; exit code 1.
class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

template <typename Fn>
void as_usage(Fn&& fn)
{
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Vec3 parse_color(const std::vector<double>& v)
{
    if (v.size() != 3) {
        throw UsageError("--background takes three values");
    }
    return {v[0], v[1], v[2]};
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& items)
{
    std::map<std::string, std::string> out;
    for (const std::string& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError("--set expects key=value, got '" + item + "'");
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

DeferredMlp load_mlp_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open MLP file " + path.string());
    }
    return mlp_from_json(nlohmann::json::parse(in));
}

// ---- bake -----------------------------------------------------------------

struct BakeArgs
{
    std::string scene;
    std::vector<std::string> overrides;
    BakeConfig config;
    int cameras = 32;
    double camera_radius = 4.0;
    int dir_bands = DeferredMlp::kDefaultDirectionBands;
    std::uint64_t mlp_seed = 0;
    std::string mlp_file;
    std::vector<double> background{1.0, 1.0, 1.0};
    std::string out;
};

int cmd_bake(const BakeArgs& a)
{
    std::unique_ptr<SceneFunction> scene;
    as_usage([&] {
        a.config.validate();
        scene = make_scene(a.scene, parse_overrides(a.overrides));
        if (a.cameras < 1) {
            throw std::invalid_argument("--cameras must be at least 1");
        }
    });
    ExportOptions opts;
    opts.background = parse_color(a.background);
    const DeferredMlp mlp = a.mlp_file.empty() ? default_shading_mlp(a.dir_bands, a.mlp_seed)
                                               : load_mlp_file(a.mlp_file);

    const Box bounds = a.config.bounds.value_or(scene->bounds());
    const auto rig = default_training_rig(bounds, a.cameras, a.camera_radius);
    BakeStats stats;
    const SnergGrid grid = bake(*scene, rig, a.config, &stats);
    const BundleSummary summary = export_bundle(quantize(grid), mlp, a.out, opts);

    std::cout << "occupied_blocks=" << summary.occupied_blocks << " of " << stats.total_blocks << "\n"
              << "culled_alpha=" << stats.culled_by_alpha << " culled_visibility=" << stats.culled_by_visibility
              << "\n"
              << "bundle_bytes=" << summary.total_bytes << "\n";
    return kExitOk;
}

// ---- render / bench -------------------------------------------------------

struct ViewArgs
{
    int width = 800;
    int height = 800;
    double fov = 39.0;
    double radius = 4.0;
    double elevation = 30.0;
    double step = 0.0;
    double term = 0.005;
    bool no_skip = false;
    bool unpremultiply = false;
};

RenderConfig render_config(const ViewArgs& v, const Vec3& background)
{
    RenderConfig rc;
    if (v.step > 0.0) {
        rc.step_size = v.step;
    }
    rc.termination_transmittance = v.term;
    rc.background = background;
    rc.skip_empty = !v.no_skip;
    rc.unpremultiply = v.unpremultiply;
    rc.width = v.width;
    rc.height = v.height;
    as_usage([&] { rc.validate(); });
    return rc;
}

OrbitSpec orbit_spec(const ViewArgs& v, const Box& bounds)
{
    return OrbitSpec{bounds.center(), v.radius, v.elevation, v.fov};
}

/// "orbit:<i>/<n>" -> (i, n).
std::pair<int, int> parse_orbit_pose(const std::string& pose)
{
    const std::string prefix = "orbit:";
    const auto slash = pose.find('/');
    if (pose.rfind(prefix, 0) != 0 || slash == std::string::npos) {
        throw UsageError("--pose expects orbit:<i>/<n>, got '" + pose + "'");
    }
    int i = -1;
    int n = 0;
    const char* b = pose.data() + prefix.size();
    const char* mid = pose.data() + slash;
    const char* e = pose.data() + pose.size();
    if (std::from_chars(b, mid, i).ptr != mid || std::from_chars(mid + 1, e, n).ptr != e || n < 1 || i < 0 ||
        i >= n) {
        throw UsageError("--pose expects orbit:<i>/<n> with 0 <= i < n, got '" + pose + "'");
    }
    return {i, n};
}

Camera orbit_pose_camera(std::pair<int, int> pose, const ViewArgs& v, const Box& bounds)
{
    const OrbitSpec o = orbit_spec(v, bounds);
    return orbit_camera(o.target, o.radius, o.elevation_deg, 360.0 * pose.first / pose.second,
                        focal_from_fov(o.fov_deg, v.width), v.width, v.height);
}

struct RenderArgs
{
    std::string bundle;
    std::string out;
    std::vector<std::string> poses;
    std::string pose_file;
    std::string reference_scene;
    std::vector<std::string> overrides;
    ViewArgs view;
};

struct ViewList
{
    std::vector<Camera> cameras;
    std::vector<std::string> images;
};

ViewList read_view_list(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot open camera list " + file.string());
    }
    const nlohmann::json j = nlohmann::json::parse(in);
    ViewList out;
    for (const auto& v : j.at("views")) {
        out.cameras.push_back(camera_from_json(v.at("camera")));
        out.images.push_back(v.value("image", std::string{}));
    }
    return out;
}

void write_view_list(const fs::path& file, const ViewList& views)
{
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < views.cameras.size(); ++i) {
        list.push_back({{"camera", camera_to_json(views.cameras[i])}, {"image", views.images[i]}});
    }
    std::ofstream out(file, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    out << nlohmann::json{{"views", list}}.dump(2) << "\n";
}

int cmd_render(const RenderArgs& a)
{
    if (a.poses.empty() && a.pose_file.empty()) {
        throw UsageError("render needs --pose or --pose-file");
    }
    std::unique_ptr<SceneFunction> reference;
    if (!a.reference_scene.empty()) {
        as_usage([&] { reference = make_scene(a.reference_scene, parse_overrides(a.overrides)); });
    }
    std::vector<std::pair<int, int>> orbit;
    for (const std::string& p : a.poses) {
        orbit.push_back(parse_orbit_pose(p));
    }
    render_config(a.view, Vec3::Ones());
    const Bundle bundle = import_bundle(a.bundle);
    const RenderConfig rc = render_config(a.view, bundle.background);
    const Box& bounds = bundle.grid.layout().bounds;

    ViewList views;
    for (const auto& p : orbit) {
        views.cameras.push_back(orbit_pose_camera(p, a.view, bounds));
    }
    if (!a.pose_file.empty()) {
        const ViewList extra = read_view_list(a.pose_file);
        views.cameras.insert(views.cameras.end(), extra.cameras.begin(), extra.cameras.end());
    }

    fs::create_directories(a.out);
    // Direct renders march the scene at the bundle's voxel width.
    const double step = rc.step_size.value_or(bundle.grid.layout().voxel_width());
    for (std::size_t i = 0; i < views.cameras.size(); ++i) {
        const Camera& cam = views.cameras[i];
        const Image img = reference ? render_direct(*reference, bundle.mlp, cam, rc, step)
                                    : render_frame(bundle.grid, bundle.mlp, cam, rc);
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu.png", i);
        save_png(fs::path(a.out) / name, img);
        views.images.emplace_back(name);
    }
    write_view_list(fs::path(a.out) / "cameras.json", views);
    std::cout << "rendered " << views.cameras.size() << " view(s) into " << a.out << "\n";
    return kExitOk;
}

struct BenchArgs
{
    std::string bundle;
    int frames = 150;
    std::string report;
    ViewArgs view;
};

int cmd_bench(const BenchArgs& a)
{
    if (a.frames < 1) {
        throw UsageError("--frames must be at least 1");
    }
    render_config(a.view, Vec3::Ones());
    const Bundle bundle = import_bundle(a.bundle);
    const RenderConfig rc = render_config(a.view, bundle.background);
    const TimingReport r =
        benchmark_orbit(bundle.grid, bundle.mlp, a.frames, rc, orbit_spec(a.view, bundle.grid.layout().bounds));
    if (!a.report.empty()) {
        write_report(a.report, r);
    }
    std::cout << format_report(r);
    return kExitOk;
}

// ---- finetune -------------------------------------------------------------

struct FinetuneArgs
{
    std::string bundle;
    std::string views;
    std::string loss_trace;
    FinetuneOptions options;
    ViewArgs view;
};

int cmd_finetune(const FinetuneArgs& a)
{
    if (a.options.epochs < 0 || a.options.batch_size < 1 || !(a.options.lr > 0.0)) {
        throw UsageError("--epochs >= 0, --batch >= 1 and --lr > 0 required");
    }
    render_config(a.view, Vec3::Ones());
    const Bundle bundle = import_bundle(a.bundle);
    const fs::path dir(a.views);
    const ViewList list = read_view_list(dir / "cameras.json");
    std::vector<View> views;
    for (std::size_t i = 0; i < list.cameras.size(); ++i) {
        if (list.images[i].empty()) {
            throw std::runtime_error("camera list entry " + std::to_string(i) + " names no image");
        }
        const fs::path img = dir / list.images[i];
        if (!fs::exists(img)) {
            throw std::runtime_error("missing reference image " + img.string());
        }
        views.push_back({list.cameras[i], load_png(img)});
    }
    FinetuneOptions opts = a.options;
    opts.render = render_config(a.view, bundle.background);
    const FinetuneResult result = finetune(bundle.grid, bundle.mlp, views, opts);
    update_bundle_mlp(a.bundle, result.mlp);
    if (!a.loss_trace.empty()) {
        write_loss_trace(a.loss_trace, result.trace);
    }
    std::cout << "loss " << result.trace.front().loss << " -> " << result.trace.back().loss << "\n";
    return kExitOk;
}

// ---- serve ----------------------------------------------------------------

struct ServeArgs
{
    std::string bundle;
    std::string viewer;
    std::string host = "127.0.0.1";
    int port = 8000;
};

BundleServer* g_server = nullptr;

extern "C" void on_signal(int)
{
    if (g_server) {
        g_server->stop();
    }
}

int cmd_serve(const ServeArgs& a)
{
    if (!fs::exists(fs::path(a.bundle) / "manifest.json")) {
        throw std::runtime_error("missing " + (fs::path(a.bundle) / "manifest.json").string());
    }
    BundleServer server(a.bundle, a.viewer.empty() ? std::nullopt : std::optional<fs::path>(a.viewer));
    const int port = server.bind(a.host, a.port);
    std::cout << "serving " << a.bundle << " at http://" << a.host << ":" << port << "/" << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.serve();
    g_server = nullptr;
    return kExitOk;
}

void add_view_flags(CLI::App* cmd, ViewArgs& v)
{
    cmd->add_option("--width", v.width, "Image width in pixels");
    cmd->add_option("--height", v.height, "Image height in pixels");
    cmd->add_option("--fov", v.fov, "Horizontal field of view, degrees");
    cmd->add_option("--radius", v.radius, "Orbit radius");
    cmd->add_option("--elevation", v.elevation, "Orbit elevation, degrees");
    cmd->add_option("--step", v.step, "Ray step in world units (0: one voxel)");
    cmd->add_option("--term-thresh", v.term, "Stop marching below this transmittance");
    cmd->add_flag("--no-skip", v.no_skip, "Step densely through empty macroblocks");
    cmd->add_flag("--unpremultiply", v.unpremultiply, "Saturating alpha unpremultiply before shading");
}

} // namespace

int run(const std::vector<std::string>& args)
{
    CLI::App app{"Bake, render, benchmark, fine-tune and serve sparse neural radiance grids", "snerg"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    BakeArgs bake_args;
    auto* bake_cmd = app.add_subcommand("bake", "Bake a built-in scene into a bundle");
    bake_cmd->add_option("--scene", bake_args.scene, "Scene name")
        ->required()
        ->check(CLI::IsMember(builtin_scene_names()));
    bake_cmd->add_option("--set", bake_args.overrides, "Scene parameter override key=value (repeatable)");
    bake_cmd->add_option("--grid-res", bake_args.config.grid_resolution, "Voxels per axis (N)");
    bake_cmd->add_option("--block-size", bake_args.config.block_size, "Macroblock size (B), must divide N");
    bake_cmd->add_option("--alpha-thresh", bake_args.config.alpha_threshold, "Cull blocks below this max alpha");
    bake_cmd->add_option("--vis-thresh", bake_args.config.visibility_threshold,
                         "Cull blocks below this max visibility (0 disables)");
    bake_cmd->add_option("--supersamples", bake_args.config.supersamples, "Scene samples per voxel");
    bake_cmd->add_option("--seed", bake_args.config.seed, "Supersampling seed");
    bake_cmd->add_option("--cameras", bake_args.cameras, "Training cameras used for visibility");
    bake_cmd->add_option("--camera-radius", bake_args.camera_radius, "Training camera distance from center");
    bake_cmd->add_option("--dir-bands", bake_args.dir_bands, "View direction encoding bands");
    bake_cmd->add_option("--mlp-seed", bake_args.mlp_seed, "Seed of the default shading network");
    bake_cmd->add_option("--mlp-file", bake_args.mlp_file, "Shading network JSON (overrides --dir-bands)");
    bake_cmd->add_option("--background", bake_args.background, "Background RGB")->expected(3);
    bake_cmd->add_option("--out", bake_args.out, "Output bundle directory")->required();

    RenderArgs render_args;
    auto* render_cmd = app.add_subcommand("render", "Render views of a bundle to PNG");
    render_cmd->add_option("--bundle", render_args.bundle, "Bundle directory")->required();
    render_cmd->add_option("--out", render_args.out, "Output directory")->required();
    render_cmd->add_option("--pose", render_args.poses, "orbit:<i>/<n> (repeatable)");
    render_cmd->add_option("--pose-file", render_args.pose_file, "Camera list JSON");
    render_cmd->add_option("--reference-scene", render_args.reference_scene,
                           "Render this scene directly instead of the grid");
    render_cmd->add_option("--set", render_args.overrides, "Reference scene override key=value");
    add_view_flags(render_cmd, render_args.view);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Time an orbit around a bundle");
    bench_cmd->add_option("--bundle", bench_args.bundle, "Bundle directory")->required();
    bench_cmd->add_option("--frames", bench_args.frames, "Orbit frames");
    bench_cmd->add_option("--report", bench_args.report, "Also write the report to this file");
    add_view_flags(bench_cmd, bench_args.view);

    FinetuneArgs ft_args;
    auto* ft_cmd = app.add_subcommand("finetune", "Refit the bundle's shading network to reference views");
    ft_cmd->add_option("--bundle", ft_args.bundle, "Bundle directory (manifest updated in place)")->required();
    ft_cmd->add_option("--views", ft_args.views, "Directory with cameras.json and images")->required();
    ft_cmd->add_option("--epochs", ft_args.options.epochs, "Training epochs");
    ft_cmd->add_option("--lr", ft_args.options.lr, "Adam learning rate");
    ft_cmd->add_option("--batch", ft_args.options.batch_size, "Pixels per minibatch");
    ft_cmd->add_option("--seed", ft_args.options.seed, "Shuffle seed");
    ft_cmd->add_option("--loss-trace", ft_args.loss_trace, "Write epoch,loss lines here");
    add_view_flags(ft_cmd, ft_args.view);

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a bundle (and viewer assets) over HTTP");
    serve_cmd->add_option("--bundle", serve_args.bundle, "Bundle directory")->required();
    serve_cmd->add_option("--viewer", serve_args.viewer, "Viewer asset directory, served under /viewer/");
    serve_cmd->add_option("--host", serve_args.host, "Bind address");
    serve_cmd->add_option("--port", serve_args.port, "TCP port");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (bake_cmd->parsed()) {
            return cmd_bake(bake_args);
        }
        if (render_cmd->parsed()) {
            return cmd_render(render_args);
        }
        if (bench_cmd->parsed()) {
            return cmd_bench(bench_args);
        }
        if (ft_cmd->parsed()) {
            return cmd_finetune(ft_args);
        }
        return cmd_serve(serve_args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace snerg::cli
