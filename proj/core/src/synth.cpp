#include "facecap/synth.hpp"

#include "facecap/camera.hpp"
#include "facecap/errors.hpp"
#include "facecap/metrics.hpp"
#include "facecap/model_io.hpp"
#include "facecap/parallel.hpp"
#include "facecap/random.hpp"
#include "facecap/raster.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace facecap {

namespace {

double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

enum Label : std::uint32_t { Skin, Nose, Ears, Eyes, UpperLip, LowerLip, MouthInterior };

bool in_nose(const Vec3& d) { return d.z() > 0.6 && d.x() * d.x() / 0.04 + (d.y() + 0.05) * (d.y() + 0.05) / 0.08 < 1.0; }

Label label_of(const Vec3& d) {
    if (std::abs(d.x()) > 0.85 && std::abs(d.y()) < 0.3) return Ears;
    for (double side : {-1.0, 1.0})
        if ((d - Vec3(0.35 * side, 0.25, 0.9).normalized()).norm() < 0.17) return Eyes;
    if (in_nose(d)) return Nose;
    if (d.z() > 0.6 && std::abs(d.x()) < 0.35) {
        if (d.y() >= -0.42 && d.y() < -0.3) return UpperLip;
        if (d.y() >= -0.5 && d.y() < -0.42) return MouthInterior;
        if (d.y() >= -0.62 && d.y() < -0.5) return LowerLip;
    }
    return Skin;
}

bool is_hair(const Vec3& d) { return d.y() > 0.55 || (d.y() > 0.2 && d.z() < -0.3); }

Rgb base_albedo(Label l, bool hair) {
    if (hair) return {0.25, 0.15, 0.10};
    switch (l) {
    case Nose: return {0.85, 0.55, 0.48};
    case Ears: return {0.78, 0.56, 0.47};
    case Eyes: return {0.92, 0.92, 0.90};
    case UpperLip:
    case LowerLip: return {0.70, 0.30, 0.32};
    case MouthInterior: return {0.30, 0.08, 0.10};
    default: return {0.80, 0.60, 0.50};
    }
}

} // namespace

DeformModel make_toy_head() {
    const TriMesh sphere = make_icosphere(3);
    const std::size_t n = sphere.vertex_count();
    const auto& dirs = sphere.vertices();

    DeformModel m;
    m.faces = sphere.faces();
    m.canonical.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        const Vec3& d = dirs[v];
        const double nose = 0.22 * std::exp(-(d.x() * d.x() / 0.04 + (d.y() + 0.05) * (d.y() + 0.05) / 0.08)) *
                            smoothstep(0.5, 0.9, d.z());
        const Vec3 p = d * (1.0 + nose);
        m.canonical[v] = Vec3(0.85 * p.x(), 1.05 * p.y(), 0.95 * p.z());
    }

    m.parents = {0, 0, 1};
    const auto N = static_cast<Eigen::Index>(n);
    m.joint_regressor = RowMatrix::Zero(3, N);
    m.skin_weights = RowMatrix::Zero(N, 3);
    std::size_t neck_count = 0, jaw_count = 0;
    for (std::size_t v = 0; v < n; ++v) {
        neck_count += dirs[v].y() < -0.75;
        jaw_count += dirs[v].y() >= -0.35 && dirs[v].y() <= -0.15 && dirs[v].z() < 0.0;
    }
    for (std::size_t v = 0; v < n; ++v) {
        const Vec3& d = dirs[v];
        const auto i = static_cast<Eigen::Index>(v);
        m.joint_regressor(0, i) = 1.0 / static_cast<double>(n);
        if (d.y() < -0.75) m.joint_regressor(kToyNeck, i) = 1.0 / static_cast<double>(neck_count);
        if (d.y() >= -0.35 && d.y() <= -0.15 && d.z() < 0.0)
            m.joint_regressor(kToyJaw, i) = 1.0 / static_cast<double>(jaw_count);

        const double jaw = smoothstep(-0.25, -0.45, d.y()) * smoothstep(-0.2, 0.3, d.z());
        const double neck = smoothstep(-0.65, -0.9, d.y()) * (1.0 - jaw);
        m.skin_weights(i, kToyJaw) = jaw;
        m.skin_weights(i, kToyNeck) = neck;
        m.skin_weights(i, 0) = 1.0 - jaw - neck;
    }

    m.pose_correctives = RowMatrix::Zero(3 * N, 18);
    m.expr_basis = RowMatrix::Zero(3 * N, static_cast<Eigen::Index>(kToyExpressions));
    for (std::size_t v = 0; v < n; ++v) {
        const Vec3& p = m.canonical[v];
        const Vec3& d = dirs[v];
        for (Eigen::Index a = 0; a < 3; ++a) {
            const Eigen::Index r = 3 * static_cast<Eigen::Index>(v) + a;
            for (Eigen::Index k = 0; k < 18; ++k)
                m.pose_correctives(r, k) = 0.02 * d[a] * std::sin(1.7 * static_cast<double>(k) + 2.3 * d.y());
            for (std::size_t e = 0; e < kToyExpressions; ++e) {
                const double t = static_cast<double>(e);
                const Vec3 c = Vec3(std::cos(0.8 * t), 0.7 * std::sin(1.3 * t), std::sin(0.8 * t)).normalized();
                m.expr_basis(r, static_cast<Eigen::Index>(e)) = 0.2 * std::exp(-(p - c).squaredNorm()) * p[a];
            }
        }
    }

    SemanticAnnotation ann;
    ann.classes.assign(std::begin(kSemanticVocabulary), std::begin(kSemanticVocabulary) + 7);
    RowMatrix albedo(N, 3), rough(N, 1), spec(N, 1), hair(N, 1);
    for (std::size_t v = 0; v < n; ++v) {
        const Vec3& d = dirs[v];
        const Label l = label_of(d);
        const bool h = l == Skin && is_hair(d);
        ann.labels.push_back(l);
        const double tex = 1.0 + 0.12 * std::sin(7.0 * d.x()) * std::sin(5.0 * d.y() + 1.0) * std::sin(6.0 * d.z());
        const Rgb a = (base_albedo(l, h) * tex).min(1.0);
        const auto i = static_cast<Eigen::Index>(v);
        albedo.row(i) << a[0], a[1], a[2];
        rough(i, 0) = 0.5;
        spec(i, 0) = 0.3;
        hair(i, 0) = h ? 1.0 : 0.0;
    }
    m.semantics = std::move(ann);
    m.vertex_fields["albedo"] = albedo;
    m.vertex_fields["roughness"] = rough;
    m.vertex_fields["specular"] = spec;
    m.vertex_fields["hair"] = hair;

    const Vec3 marks[] = {{-0.35, 0.25, 0.9}, {0.35, 0.25, 0.9}, {-0.5, 0.3, 0.8},  {0.5, 0.3, 0.8},
                          {0.0, -0.05, 1.0},  {0.0, 0.15, 1.0},  {-0.3, -0.45, 0.85}, {0.3, -0.45, 0.85},
                          {0.0, -0.36, 0.9},  {0.0, -0.56, 0.85}, {0.0, -0.85, 0.5}, {-0.6, -0.6, 0.5},
                          {0.6, -0.6, 0.5},   {-0.95, 0.0, 0.1}, {0.95, 0.0, 0.1}};
    for (const Vec3& mk : marks) {
        const Vec3 d = mk.normalized();
        std::uint32_t best = 0;
        for (std::uint32_t v = 1; v < n; ++v)
            if ((dirs[v] - d).squaredNorm() < (dirs[best] - d).squaredNorm()) best = v;
        m.landmark_vertices.push_back(best);
    }
    m.validate();
    return m;
}

ParamTrack make_trajectory(const DeformModel& model, std::size_t frames, int width, int height, std::uint64_t seed) {
    if (width < 1 || height < 1) throw ValidationError("synthetic frames need a positive size");
    Rng rng(seed);
    auto phase = [&] { return rng.uniform(0.0, 2.0 * std::numbers::pi); };
    const double root_phase[3] = {phase(), phase(), phase()};
    const double neck_phase = phase(), jaw_phase = phase();
    const double trans_phase[3] = {phase(), phase(), phase()};
    std::vector<double> expr_phase, expr_rate;
    for (std::size_t e = 0; e < model.expr_count(); ++e) {
        expr_phase.push_back(phase());
        expr_rate.push_back(rng.uniform(0.5, 2.5));
    }

    const Camera cam = Camera::perspective(1.27 * width, 0.5 * width, 0.5 * height, Vec3(std::numbers::pi, 0.0, 0.0),
                                           Vec3(0.0, 0.0, 4.0));
    ParamTrack t;
    for (std::size_t f = 0; f < frames; ++f) {
        const double s = static_cast<double>(f) / kSynthFps;
        PoseParams p = PoseParams::rest(model.joint_count());
        p.joint_rotations[0] = Vec3(0.12 * std::sin(0.9 * s + root_phase[0]), 0.25 * std::sin(0.6 * s + root_phase[1]),
                                    0.05 * std::sin(0.7 * s + root_phase[2]));
        if (model.joint_count() > kToyJaw) {
            p.joint_rotations[kToyNeck] = Vec3(0.05 * std::sin(1.1 * s + neck_phase), 0.0, 0.0);
            p.joint_rotations[kToyJaw] = Vec3(0.1 + 0.1 * std::sin(2.1 * s + jaw_phase), 0.0, 0.0);
        }
        p.translation = Vec3(0.05 * std::sin(0.5 * s + trans_phase[0]), 0.03 * std::sin(0.8 * s + trans_phase[1]),
                             0.1 * std::sin(0.4 * s + trans_phase[2]));
        ExprParams e = ExprParams::zero(model.expr_count());
        for (std::size_t k = 0; k < model.expr_count(); ++k)
            e.coeffs[static_cast<Eigen::Index>(k)] = 0.6 * std::sin(expr_rate[k] * s + expr_phase[k]);
        t.poses.push_back(std::move(p));
        t.expressions.push_back(std::move(e));
        t.cameras.push_back(cam);
    }
    return t;
}

ParamTrack perturb_jaw(const ParamTrack& track, double sigma_deg, std::uint64_t seed) {
    if (!std::isfinite(sigma_deg) || sigma_deg < 0.0) throw ValidationError("jaw noise must be finite and nonnegative");
    ParamTrack out = track;
    if (sigma_deg == 0.0) return out;
    Rng rng(seed);
    const double sigma = sigma_deg * std::numbers::pi / 180.0;
    for (auto& p : out.poses) {
        if (p.joint_rotations.size() <= kToyJaw) throw ValidationError("track has no jaw joint");
        p.joint_rotations[kToyJaw].x() += sigma * rng.normal();
    }
    return out;
}

SynthFrame render_synth_frame(const DeformModel& model, const LightEvaluator& light, const ParamTrack& track,
                              std::size_t frame, int width, int height) {
    if (frame >= track.size())
        throw ValidationError("frame " + std::to_string(frame) + " is outside a track of length " +
                              std::to_string(track.size()));
    if (!model.semantics) throw ValidationError("synthetic rendering needs class labels");
    const Camera& cam = track.cameras[frame];
    const std::vector<Vec3> posed = pose_mesh(model, track.poses[frame], track.expressions[frame]);
    const GBuffer g = rasterize(model.faces, posed, cam, width, height);

    SynthFrame out;
    out.image = render_shaded(g, model.faces, posed, model_materials(model), light, 0, cam);
    out.classes = render_semantic(g, model.faces, *model.semantics);
    // Hair only ever replaces skin, so predicted maps still agree everywhere else.
    if (const auto it = model.vertex_fields.find("hair"); it != model.vertex_fields.end()) {
        const RowMatrix& hair = it->second;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const std::size_t i = g.index(x, y);
                if (!g.covered(i) || out.classes.data[i] != Skin) continue;
                const Face& f = model.faces[g.face[i]];
                double h = 0.0;
                for (int c = 0; c < 3; ++c) h += g.bary[i][static_cast<std::size_t>(c)] * hair(f[static_cast<std::size_t>(c)], 0);
                if (h > 0.5) out.classes.data[i] = kHairLabel;
            }
    }
    for (auto v : model.landmark_vertices) {
        const Projected q = project(cam, posed.at(v), width, height);
        out.landmarks.emplace_back(q.x, q.y);
    }
    return out;
}

void write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& o) {
    if (o.frames == 0) throw ValidationError("synth needs at least one frame");
    const auto frames_dir = dir / "frames", masks_dir = dir / "masks";
    std::error_code ec;
    std::filesystem::create_directories(frames_dir, ec);
    if (!ec) std::filesystem::create_directories(masks_dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    const DeformModel model = make_toy_head();
    const LightEvaluator light = LightEvaluator::random(1, o.seed ^ 0x9e3779b97f4a7c15ULL);
    const ParamTrack gt = make_trajectory(model, o.frames, o.width, o.height, o.seed);
    const ParamTrack noisy = perturb_jaw(gt, o.noise_deg, o.seed + 1);

    save_model(model, dir / "model.fwb");
    light.save(dir / "light.fwb");
    save_track(dir / "track_gt.fwb", gt);
    save_track(dir / "track_noisy.fwb", noisy);

    parallel_for(o.frames, o.threads, [&](std::size_t f) {
        const SynthFrame s = render_synth_frame(model, light, gt, f, o.width, o.height);
        save_png(frames_dir / frame_file_name(f), encode_srgb(s.image));
        save_png(masks_dir / mask_file_name(f), s.classes);
        save_landmarks(frames_dir / landmark_file_name(f), s.landmarks);
    });

    nlohmann::ordered_json meta{{"schema", 1},
                                {"frames", o.frames},
                                {"width", o.width},
                                {"height", o.height},
                                {"seed", o.seed},
                                {"noise_deg", o.noise_deg},
                                {"fps", kSynthFps},
                                {"jaw_joint", kToyJaw},
                                {"classes", model.semantics->classes}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("cannot write '" + (dir / "meta.json").string() + "'");
}

} // namespace facecap
