#include "facecap/appearance.hpp"
#include "facecap/camera.hpp"
#include "facecap/config.hpp"
#include "facecap/deform.hpp"
#include "facecap/deformer.hpp"
#include "facecap/errors.hpp"
#include "facecap/fwb.hpp"
#include "facecap/image.hpp"
#include "facecap/mesh_io.hpp"
#include "facecap/metrics.hpp"
#include "facecap/model_io.hpp"
#include "facecap/parallel.hpp"
#include "facecap/raster.hpp"
#include "facecap/remesh.hpp"
#include "facecap/synth.hpp"
#include "facecap/track.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <string>

namespace fs = std::filesystem;
using namespace facecap;

namespace {

struct Globals {
    unsigned threads = 1;
    std::string config_path;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;

    double number(const CLI::Option* flag, double value, const std::string& key) const {
        if (flag && flag->count()) return value;
        return config_number(config, key, value);
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ImageU8 quantize_linear(const ImageF& img) {
    ImageU8 out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0) * 255.0));
    return out;
}

std::pair<int, int> parse_size(const std::string& s) {
    static const std::regex re(R"((\d+)x(\d+))");
    std::smatch m;
    if (!std::regex_match(s, m, re)) throw ValidationError("size must look like WxH, got '" + s + "'");
    const long w = std::stol(m[1]), h = std::stol(m[2]);
    if (w < 1 || h < 1 || w > 16384 || h > 16384) throw ValidationError("size out of range: '" + s + "'");
    return {static_cast<int>(w), static_cast<int>(h)};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::size_t count_matching(const fs::path& dir, const std::regex& re) {
    std::size_t n = 0;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (std::regex_match(e.path().filename().string(), re)) ++n;
    if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
    return n;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"facecap: face model posing, rendering, metrics and remeshing"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--config", g.config_path, "key = value overrides");
    auto* global_seed = app.add_option("--seed", g.seed, "Seed for every random draw");

    // pose
    auto* pose = app.add_subcommand("pose", "Write the posed mesh of one frame");
    std::string model_path, track_path, out_path;
    std::size_t frame = 0;
    pose->add_option("--model", model_path)->required();
    pose->add_option("--track", track_path)->required();
    pose->add_option("--frame", frame)->required();
    pose->add_option("--out", out_path)->required();

    // render
    auto* render = app.add_subcommand("render", "Render every frame of a track");
    std::string mode = "shaded", size = "256x256", light_path;
    std::size_t video = 0;
    render->add_option("--model", model_path)->required();
    render->add_option("--track", track_path)->required();
    render->add_option("--mode", mode)->check(CLI::IsMember({"shaded", "semantic", "normals", "depth"}));
    render->add_option("--video-index", video);
    render->add_option("--size", size);
    render->add_option("--light", light_path, "Light networks (shaded mode)");
    render->add_option("--out", out_path)->required();

    // eval-iou / eval-warp
    std::string frames_dir, masks_dir, report_path;
    double interval_ms = 170.0, fps = 30.0, depth_tol = 0.01;
    CLI::Option *interval_flag = nullptr, *fps_flag = nullptr, *tol_flag = nullptr;
    auto* eval_iou = app.add_subcommand("eval-iou", "Per-frame semantic IoU (and landmark L1 when present)");
    auto* eval_warp = app.add_subcommand("eval-warp", "Warp PSNR over frame pairs");
    for (auto* sub : {eval_iou, eval_warp}) {
        sub->add_option("--model", model_path)->required();
        sub->add_option("--track", track_path)->required();
        sub->add_option("--frames", frames_dir)->required();
        sub->add_option("--masks", masks_dir)->required();
        sub->add_option("--report", report_path, "JSON output (stdout when absent)");
    }
    interval_flag = eval_warp->add_option("--interval-ms", interval_ms);
    fps_flag = eval_warp->add_option("--fps", fps);
    tol_flag = eval_warp->add_option("--depth-tolerance", depth_tol);

    // pretrain-deformer
    auto* pretrain = app.add_subcommand("pretrain-deformer", "Fit the deformer to the model's expression basis");
    int freqs = 10, iters = 5000;
    double lr = 2e-4;
    std::string loss_csv;
    pretrain->add_option("--model", model_path)->required();
    auto* freqs_flag = pretrain->add_option("--L", freqs)->check(CLI::NonNegativeNumber);
    auto* iters_flag = pretrain->add_option("--iters", iters)->check(CLI::NonNegativeNumber);
    auto* lr_flag = pretrain->add_option("--lr", lr);
    pretrain->add_option("--out", out_path)->required();
    pretrain->add_option("--loss-csv", loss_csv, "Loss history (default: <out>.loss.csv)");
    auto* pretrain_seed = pretrain->add_option("--seed", g.seed);

    // remesh
    auto* remesh_cmd = app.add_subcommand("remesh", "Remesh the canonical mesh and reproject every table");
    double target_edge = 0.0;
    int remesh_iters = 5;
    std::string prov_path;
    remesh_cmd->add_option("--model", model_path)->required();
    remesh_cmd->add_option("--target-edge", target_edge, "Target edge length (default: current mean)");
    remesh_cmd->add_option("--iterations", remesh_iters)->check(CLI::NonNegativeNumber);
    remesh_cmd->add_option("--provenance", prov_path, "Also write per-vertex provenance");
    remesh_cmd->add_option("--out", out_path)->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic ground-truth sequence");
    SynthOptions so;
    std::string synth_size = "256x256";
    synth->add_option("--out", out_path)->required();
    synth->add_option("--frames", so.frames)->check(CLI::PositiveNumber);
    auto* synth_seed = synth->add_option("--seed", so.seed);
    synth->add_option("--noise-deg", so.noise_deg)->check(CLI::NonNegativeNumber);
    synth->add_option("--size", synth_size);

    // fit
    auto* fit = app.add_subcommand("fit", "Least-squares expression coefficients for a target mesh");
    std::string target_path;
    bool fit_posed = false;
    fit->add_option("--model", model_path)->required();
    fit->add_option("--target", target_path)->required();
    fit->add_option("--out", out_path)->required();
    fit->add_option("--track", track_path, "Fit at the pose of --frame in this track");
    fit->add_option("--frame", frame);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (!g.config_path.empty()) g.config = load_config(g.config_path);

        if (pose->parsed()) {
            const DeformModel model = load_model(model_path);
            const ParamTrack track = load_track(track_path);
            track.validate(model);
            if (frame >= track.size())
                throw ValidationError("frame " + std::to_string(frame) + " is out of range: the track has " +
                                      std::to_string(track.size()) + " frames");
            save_mesh(TriMesh(pose_mesh(model, track.poses[frame], track.expressions[frame]), model.faces), out_path);
        } else if (render->parsed()) {
            const DeformModel model = load_model(model_path);
            const ParamTrack track = load_track(track_path);
            track.validate(model);
            const auto [w, h] = parse_size(size);
            std::optional<LightEvaluator> light;
            std::vector<MaterialSample> materials;
            if (mode == "shaded") {
                if (light_path.empty()) throw ValidationError("shaded mode needs light weights (--light)");
                light = LightEvaluator::load(light_path);
                if (video >= light->video_count())
                    throw ValidationError("video index " + std::to_string(video) + " is out of range: the light file has " +
                                          std::to_string(light->video_count()) + " videos");
                materials = model_materials(model);
            }
            if (mode == "semantic" && !model.semantics) throw ValidationError("semantic mode needs class labels");
            ensure_dir(out_path);
            parallel_for(track.size(), g.threads, [&](std::size_t f) {
                const auto posed = pose_mesh(model, track.poses[f], track.expressions[f]);
                const GBuffer gb = rasterize(model.faces, posed, track.cameras[f], w, h);
                ImageU8 img;
                if (mode == "shaded")
                    img = encode_srgb(render_shaded(gb, model.faces, posed, materials, *light, video, track.cameras[f]));
                else if (mode == "semantic")
                    img = render_semantic(gb, model.faces, *model.semantics);
                else if (mode == "normals")
                    img = quantize_linear(render_normals(gb, model.faces, posed));
                else
                    img = quantize_linear(render_depth(gb));
                char name[64];
                std::snprintf(name, sizeof name, "%s_%06zu.png", mode.c_str(), f);
                save_png(fs::path(out_path) / name, img);
            });
        } else if (eval_iou->parsed() || eval_warp->parsed()) {
            const DeformModel model = load_model(model_path);
            const ParamTrack track = load_track(track_path);
            EvalOptions opts;
            opts.iou = eval_iou->parsed();
            opts.landmarks = eval_iou->parsed();
            opts.warp = eval_warp->parsed();
            opts.threads = g.threads;
            opts.interval_ms = g.number(interval_flag, interval_ms, "interval_ms");
            opts.fps = g.number(fps_flag, fps, "fps");
            opts.depth_tolerance = g.number(tol_flag, depth_tol, "depth_tolerance");
            if (opts.warp) sample_pairs(track.size(), opts.fps, opts.interval_ms);  // rejects k < 1 up front
            const std::size_t masks = count_matching(masks_dir, std::regex(R"(mask_\d{6}\.png)"));
            if (masks != track.size())
                throw ValidationError("track has " + std::to_string(track.size()) + " frames but '" + masks_dir +
                                      "' holds " + std::to_string(masks) + " masks");
            if (opts.warp) {
                const std::size_t frames = count_matching(frames_dir, std::regex(R"(frame_\d{6}\.png)"));
                if (frames != track.size())
                    throw ValidationError("track has " + std::to_string(track.size()) + " frames but '" + frames_dir +
                                          "' holds " + std::to_string(frames) + " frames");
            }
            const MetricReport report = evaluate_sequence(track, model, frames_dir, masks_dir, opts);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
            const std::string json = report_to_json(report);
            if (report_path.empty())
                std::cout << json << '\n';
            else
                write_text(report_path, json + "\n");
        } else if (pretrain->parsed()) {
            const DeformModel model = load_model(model_path);
            SinusoidalEncoding enc;
            enc.frequencies = static_cast<int>(g.number(freqs_flag, freqs, "encoding_frequencies"));
            PretrainOptions po;
            po.iterations = static_cast<int>(g.number(iters_flag, iters, "pretrain_iterations"));
            po.lr = g.number(lr_flag, lr, "pretrain_lr");
            po.threads = g.threads;
            (void)pretrain_seed;
            const auto result = pretrain_deformer(model, make_deformer_net(enc, model.expr_count(), g.seed), enc, po);
            save_deformer(result.net, enc, g.seed, out_path);
            std::string csv = "iteration,loss\n";
            for (std::size_t i = 0; i < result.loss_history.size(); ++i) csv += std::to_string(i) + "," + fmt(result.loss_history[i]) + "\n";
            csv += std::to_string(result.loss_history.size()) + "," + fmt(result.final_loss) + "\n";
            fs::path csv_path = loss_csv.empty() ? fs::path(out_path).replace_extension(".loss.csv") : fs::path(loss_csv);
            write_text(csv_path, csv);
        } else if (remesh_cmd->parsed()) {
            const DeformModel model = load_model(model_path);
            const TriMesh mesh = model.canonical_mesh();
            const double L = target_edge > 0.0 ? target_edge : mean_edge_length(mesh);
            RemeshOptions ro;
            ro.iterations = remesh_iters;
            const RemeshResult r = remesh(mesh, L, ro);
            save_model(reproject_tables(model, r), out_path);
            if (!prov_path.empty()) {
                fwb::Container c;
                put_provenance(c, r.provenance);
                c.write(prov_path);
            }
        } else if (synth->parsed()) {
            if (!synth_seed->count() && global_seed->count()) so.seed = g.seed;
            std::tie(so.width, so.height) = parse_size(synth_size);
            so.threads = g.threads;
            write_synth_dataset(out_path, so);
        } else if (fit->parsed()) {
            const DeformModel model = load_model(model_path);
            const TriMesh target = load_mesh(target_path);
            fit_posed = !track_path.empty();
            ExpressionFit result;
            if (fit_posed) {
                const ParamTrack track = load_track(track_path);
                track.validate(model);
                if (frame >= track.size())
                    throw ValidationError("frame " + std::to_string(frame) + " is out of range: the track has " +
                                          std::to_string(track.size()) + " frames");
                result = fit_expression(model, target.vertices(), track.poses[frame]);
            } else {
                result = fit_expression(model, target.vertices());
            }
            std::string text;
            for (Eigen::Index i = 0; i < result.psi.coeffs.size(); ++i) text += fmt(result.psi.coeffs[i]) + "\n";
            write_text(out_path, text);
        }
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
