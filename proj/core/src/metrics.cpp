#include "facecap/metrics.hpp"

#include "facecap/errors.hpp"
#include "facecap/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace facecap {

double semantic_iou(const ImageU8& pred, const ImageU8& gt, std::size_t class_count) {
    if (!pred.same_shape(gt) || pred.channels != 1 || gt.channels != 1)
        throw ValidationError("semantic_iou: class maps differ in shape");
    std::vector<std::size_t> inter(class_count, 0), uni(class_count, 0);
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const auto g = gt.data[i];
        if (g == kHairLabel) continue;
        const auto p = pred.data[i];
        if (p < class_count) ++uni[p];
        if (g < class_count && g != p) ++uni[g];
        if (p == g && p < class_count) ++inter[p];
    }
    double sum = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t c = 0; c < class_count; ++c) {
        if (uni[c] == 0) continue;
        sum += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
        ++evaluated;
    }
    if (evaluated == 0) throw ValidationError("semantic_iou: no class present in either image");
    return sum / static_cast<double>(evaluated);
}

namespace {

bool is_face_class(std::uint8_t label) { return label != kBackgroundLabel && label != kHairLabel; }

void check_view(const FrameView& v, const char* which) {
    const int w = v.gbuffer.width, h = v.gbuffer.height;
    if (!v.image.same_shape(w, h) || v.image.channels != 3 || !v.classes.same_shape(w, h) || v.classes.channels != 1)
        throw ValidationError(std::string("warp: ") + which + " image, class map and GBuffer differ in size");
}

} // namespace

WarpResult warp_image(const FramePair& pair) {
    const FrameView& src = pair.source;
    const FrameView& dst = pair.target;
    check_view(src, "source");
    check_view(dst, "target");
    if (src.vertices.size() != dst.vertices.size())
        throw ValidationError("warp: source and target geometry have different vertex counts");
    for (const auto* g : {&src.gbuffer, &dst.gbuffer})
        for (auto f : g->face)
            if (f != kNoFace && f >= pair.faces.size()) throw ValidationError("warp: GBuffer does not match the faces");
    for (const Face& f : pair.faces)
        for (auto v : f)
            if (v >= src.vertices.size()) throw ValidationError("warp: face references a missing vertex");

    double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
    for (std::size_t i = 0; i < src.gbuffer.face.size(); ++i)
        if (src.gbuffer.covered(i)) {
            zmin = std::min(zmin, src.gbuffer.depth[i]);
            zmax = std::max(zmax, src.gbuffer.depth[i]);
        }
    // The small absolute floor keeps fronto-parallel frames (zero depth range) usable.
    const double tau = std::isfinite(zmin)
                           ? pair.depth_tolerance * (zmax - zmin) + 1e-9 * std::max(std::abs(zmin), std::abs(zmax))
                           : 0.0;

    const int sw = src.gbuffer.width, sh = src.gbuffer.height;
    WarpResult out{ImageF(dst.gbuffer.width, dst.gbuffer.height, 3, 0.0f),
                   ImageU8(dst.gbuffer.width, dst.gbuffer.height, 1, 0)};
    for (std::size_t i = 0; i < dst.gbuffer.face.size(); ++i) {
        if (!dst.gbuffer.covered(i) || !is_face_class(dst.classes.data[i])) continue;
        const Face& f = pair.faces[dst.gbuffer.face[i]];
        const auto& w = dst.gbuffer.bary[i];
        const Vec3 p = w[0] * src.vertices[f[0]] + w[1] * src.vertices[f[1]] + w[2] * src.vertices[f[2]];
        const Projected q = project(src.camera, p, sw, sh);
        if (!q.in_front) continue;
        const double sx = q.x - 0.5, sy = q.y - 0.5;
        if (!(sx >= 0.0 && sy >= 0.0 && sx <= sw - 1 && sy <= sh - 1)) continue;

        const int px = std::min(static_cast<int>(std::floor(q.x)), sw - 1);
        const int py = std::min(static_cast<int>(std::floor(q.y)), sh - 1);
        const std::size_t si = src.gbuffer.index(px, py);
        if (!src.gbuffer.covered(si) || !is_face_class(src.classes.data[si])) continue;
        if (std::abs(q.depth - src.gbuffer.depth[si]) > tau) continue;

        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        const int x1 = std::min(x0 + 1, sw - 1), y1 = std::min(y0 + 1, sh - 1);
        const double fx = sx - x0, fy = sy - y0;
        for (int c = 0; c < 3; ++c) {
            const double top = (1.0 - fx) * src.image.at(x0, y0, c) + fx * src.image.at(x1, y0, c);
            const double bottom = (1.0 - fx) * src.image.at(x0, y1, c) + fx * src.image.at(x1, y1, c);
            out.warped.data[3 * i + static_cast<std::size_t>(c)] = static_cast<float>((1.0 - fy) * top + fy * bottom);
        }
        out.valid.data[i] = 1;
    }
    return out;
}

double psnr(const ImageF& a, const ImageF& b, const ImageU8& mask) {
    if (!a.same_shape(b) || a.channels != b.channels) throw ValidationError("psnr: images differ in shape");
    if (!mask.same_shape(a) || mask.channels != 1) throw ValidationError("psnr: mask differs in shape");
    double sum = 0.0;
    std::size_t count = 0;
    const auto ch = static_cast<std::size_t>(a.channels);
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
        if (!mask.data[p]) continue;
        for (std::size_t c = 0; c < ch; ++c) {
            const double d = double(a.data[p * ch + c]) - double(b.data[p * ch + c]);
            sum += d * d;
        }
        count += ch;
    }
    if (count == 0) throw ValidationError("psnr: empty mask");
    const double mse = sum / static_cast<double>(count);
    if (mse < 1e-10) return kPsnrCap;
    return 10.0 * std::log10(1.0 / mse);
}

double warp_psnr(const FramePair& pair) {
    const WarpResult w = warp_image(pair);
    return psnr(pair.target.image, w.warped, w.valid);
}

PairSchedule sample_pairs(std::size_t frame_count, double fps, double interval_ms) {
    if (!(fps > 0.0) || !(interval_ms >= 0.0)) throw ValidationError("sample_pairs: fps and interval must be positive");
    const double k = std::round(interval_ms * fps / 1000.0);
    if (k < 1.0)
        throw ValidationError("interval of " + std::to_string(interval_ms) + " ms at " + std::to_string(fps) +
                              " fps is shorter than one frame (k >= 1 required)");
    PairSchedule s;
    s.interval = static_cast<int>(k);
    const auto step = static_cast<std::size_t>(s.interval);
    for (std::size_t t = step; t < frame_count; t += step) s.pairs.emplace_back(t - step, t);
    return s;
}

double landmark_l1(const std::vector<Eigen::Vector2d>& pred, const std::vector<Eigen::Vector2d>& gt, int width,
                   int height) {
    if (pred.size() != gt.size())
        throw ValidationError("landmark_l1: " + std::to_string(pred.size()) + " predicted vs " +
                              std::to_string(gt.size()) + " reference points");
    if (pred.empty()) throw ValidationError("landmark_l1: no points");
    if (width <= 0 || height <= 0) throw ValidationError("landmark_l1: image size must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        sum += std::abs(pred[i].x() - gt[i].x()) / width + std::abs(pred[i].y() - gt[i].y()) / height;
    return sum / (2.0 * static_cast<double>(pred.size()));
}

std::string frame_file_name(std::size_t frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06zu.png", frame);
    return buf;
}

std::string mask_file_name(std::size_t frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "mask_%06zu.png", frame);
    return buf;
}

std::string landmark_file_name(std::size_t frame) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "lmk_%06zu.txt", frame);
    return buf;
}

std::vector<Eigen::Vector2d> load_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<Eigen::Vector2d> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream s(line);
        double x, y;
        std::string rest;
        if (!(s >> x >> y) || (s >> rest)) throw ParseError("expected 'x y' in '" + path.string() + "'", n);
        out.emplace_back(x, y);
    }
    return out;
}

void save_landmarks(const std::filesystem::path& path, const std::vector<Eigen::Vector2d>& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    char buf[96];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x(), p.y());
        out << buf;
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

std::optional<double> ordered_mean(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct FrameData {
    ImageF image;
    ImageU8 classes;
    GBuffer gbuffer;
    std::vector<Vec3> posed;
};

} // namespace

MetricReport evaluate_sequence(const ParamTrack& track, const DeformModel& model, const std::filesystem::path& frames_dir,
                               const std::filesystem::path& masks_dir, const EvalOptions& options) {
    if (track.size() == 0) throw ValidationError("evaluate_sequence: empty track");
    track.validate(model);
    model.validate();
    if (options.iou && !model.semantics) throw ValidationError("semantic IoU needs a model with class labels");
    const std::size_t n = track.size();

    MetricReport report;
    report.config = options;
    report.frame_count = n;

    PairSchedule schedule;
    if (options.warp) {
        schedule = sample_pairs(n, options.fps, options.interval_ms);
        report.interval = schedule.interval;
        report.pairs = schedule.pairs;
        if (schedule.pairs.empty())
            report.warnings.push_back("sequence of " + std::to_string(n) + " frames is too short for interval k = " +
                                      std::to_string(schedule.interval) + "; no warp pairs");
    }

    std::vector<std::filesystem::path> missing;
    for (std::size_t f = 0; f < n; ++f) {
        const auto mask = masks_dir / mask_file_name(f);
        if (!std::filesystem::exists(mask)) missing.push_back(mask);
        if (options.warp) {
            const auto frame = frames_dir / frame_file_name(f);
            if (!std::filesystem::exists(frame)) missing.push_back(frame);
        }
    }
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " input file(s) missing:";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += "\n  " + missing[i].string();
        if (missing.size() > 20) msg += "\n  ...";
        throw IoError(msg);
    }

    bool use_landmarks = false;
    if (options.landmarks && !model.landmark_vertices.empty()) {
        std::size_t present = 0;
        for (std::size_t f = 0; f < n; ++f) present += std::filesystem::exists(frames_dir / landmark_file_name(f));
        use_landmarks = present == n;
        if (present > 0 && present < n)
            report.warnings.push_back("landmark files exist for only " + std::to_string(present) + " of " +
                                      std::to_string(n) + " frames; landmark L1 skipped");
    }

    const ImageU8 first_mask = load_png(masks_dir / mask_file_name(0));
    const int width = first_mask.width, height = first_mask.height;

    std::set<std::size_t> pair_frames;
    for (const auto& [s, t] : schedule.pairs) pair_frames.insert({s, t});
    std::vector<std::size_t> slot(n, SIZE_MAX);
    std::vector<FrameData> kept(pair_frames.size());
    {
        std::size_t k = 0;
        for (auto f : pair_frames) slot[f] = k++;
    }

    std::vector<double> iou(n, 0.0), lmk(n, 0.0);
    parallel_for(n, options.threads, [&](std::size_t f) {
        ImageU8 classes = load_png(masks_dir / mask_file_name(f));
        if (classes.channels != 1 || !classes.same_shape(width, height))
            throw ValidationError("mask '" + (masks_dir / mask_file_name(f)).string() +
                                  "' is not a single-channel image of the sequence size");
        std::vector<Vec3> posed = pose_mesh(model, track.poses[f], track.expressions[f]);
        GBuffer g = rasterize(model.faces, posed, track.cameras[f], width, height);
        if (options.iou) iou[f] = semantic_iou(render_semantic(g, model.faces, *model.semantics), classes,
                                               model.semantics->classes.size());
        if (use_landmarks) {
            std::vector<Eigen::Vector2d> pred;
            for (auto v : model.landmark_vertices) {
                const Projected q = project(track.cameras[f], posed.at(v), width, height);
                pred.emplace_back(q.x, q.y);
            }
            lmk[f] = landmark_l1(pred, load_landmarks(frames_dir / landmark_file_name(f)), width, height);
        }
        if (slot[f] != SIZE_MAX) {
            FrameData& d = kept[slot[f]];
            const ImageU8 frame = load_png(frames_dir / frame_file_name(f));
            if (frame.channels != 3 || !frame.same_shape(width, height))
                throw ValidationError("frame '" + (frames_dir / frame_file_name(f)).string() +
                                      "' is not an RGB image of the sequence size");
            d.image = to_unit(frame);
            d.classes = std::move(classes);
            d.gbuffer = std::move(g);
            d.posed = std::move(posed);
        }
    });

    if (options.iou) {
        report.iou = iou;
        report.iou_mean = ordered_mean(iou);
    }
    if (use_landmarks) {
        report.landmark_l1 = lmk;
        report.landmark_l1_mean = ordered_mean(lmk);
    }

    if (options.warp) {
        std::vector<std::optional<double>> values(schedule.pairs.size());
        parallel_for(schedule.pairs.size(), options.threads, [&](std::size_t p) {
            const auto [s, t] = schedule.pairs[p];
            const FrameData& a = kept[slot[s]];
            const FrameData& b = kept[slot[t]];
            FramePair pair{{a.image, a.classes, a.gbuffer, a.posed, track.cameras[s]},
                           {b.image, b.classes, b.gbuffer, b.posed, track.cameras[t]},
                           model.faces,
                           options.depth_tolerance};
            const WarpResult w = warp_image(pair);
            if (std::none_of(w.valid.data.begin(), w.valid.data.end(), [](auto v) { return v != 0; })) return;
            values[p] = psnr(b.image, w.warped, w.valid);
        });
        std::vector<double> ok;
        for (std::size_t p = 0; p < values.size(); ++p) {
            if (values[p]) {
                ok.push_back(*values[p]);
            } else {
                ++report.warp_skipped;
                report.warnings.push_back("pair (" + std::to_string(schedule.pairs[p].first) + ", " +
                                          std::to_string(schedule.pairs[p].second) +
                                          ") has no visible overlap; skipped");
            }
        }
        report.warp_psnr = std::move(values);
        report.warp_psnr_mean = ordered_mean(ok);
    }
    return report;
}

std::string report_to_json(const MetricReport& r) {
    using Json = nlohmann::ordered_json;
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json j;
    j["schema"] = 1;
    j["config"] = {
        {"fps", r.config.fps},
        {"interval_ms", r.config.interval_ms},
        {"interval_frames", r.interval},
        {"depth_tolerance", r.config.depth_tolerance},
        {"psnr_range", {0.0, 1.0}},
        {"psnr_cap_db", kPsnrCap},
        {"iou_absent_classes", "skipped"},
        {"iou_ignored_label", kHairLabel},
    };
    j["frames"] = r.frame_count;
    if (r.config.iou) j["semantic_iou"] = {{"per_frame", r.iou}, {"mean", opt(r.iou_mean)}};
    if (r.config.warp) {
        Json pairs = Json::array(), values = Json::array();
        for (const auto& [s, t] : r.pairs) pairs.push_back({s, t});
        for (const auto& v : r.warp_psnr) values.push_back(opt(v));
        j["warp_psnr"] = {{"pairs", pairs},
                          {"per_pair", values},
                          {"mean", opt(r.warp_psnr_mean)},
                          {"evaluated", r.warp_psnr.size() - r.warp_skipped},
                          {"skipped", r.warp_skipped}};
    }
    if (r.landmark_l1_mean) j["landmark_l1"] = {{"per_frame", r.landmark_l1}, {"mean", opt(r.landmark_l1_mean)}};
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

} // namespace facecap
