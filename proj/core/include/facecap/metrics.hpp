#pragma once

// Posed-geometry tracking metrics: per-frame semantic IoU, warp PSNR over
// frame pairs a fixed interval apart, and normalised landmark L1.

#include "facecap/camera.hpp"
#include "facecap/deform.hpp"
#include "facecap/image.hpp"
#include "facecap/raster.hpp"
#include "facecap/track.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace facecap {

inline constexpr double kPsnrCap = 99.0;

/// Mean over classes [0, class_count) of |pred ∩ gt| / |pred ∪ gt|. Pixels
/// labelled hair in `gt` are ignored. Classes absent from both images are
/// skipped; throws ValidationError when no class is left.
double semantic_iou(const ImageU8& pred, const ImageU8& gt, std::size_t class_count);

/// One frame as seen by the warp metric.
struct FrameView {
    const ImageF& image;      // RGB in [0,1]
    const ImageU8& classes;   // class map with background / hair sentinels
    const GBuffer& gbuffer;   // rasterised tracked geometry
    const std::vector<Vec3>& vertices;  // posed vertices of the tracked geometry
    const Camera& camera;
};

struct FramePair {
    FrameView source;  // I_{t-k}
    FrameView target;  // I_t
    const std::vector<Face>& faces;
    double depth_tolerance = 0.01;  // fraction of the source frame's depth range
};

struct WarpResult {
    ImageF warped;  // I_t^w, zero where `valid` is 0
    ImageU8 valid;  // occlusion mask o: 1 where the surface point was visible in the source
};

/// Maps every covered target pixel through its surface point into the source
/// frame and samples the source image bilinearly at that location.
WarpResult warp_image(const FramePair& pair);

/// 10 log10(1 / MSE) over masked pixels and all channels; kPsnrCap when MSE < 1e-10.
/// Throws ValidationError on an empty mask.
double psnr(const ImageF& a, const ImageF& b, const ImageU8& mask);

/// psnr(I_t, I_t^w) restricted to the occlusion mask.
double warp_psnr(const FramePair& pair);

struct PairSchedule {
    int interval = 0;  // k, in frames
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// k = round(interval_ms * fps / 1000); pairs (0,k), (k,2k), ... Throws when
/// k < 1. Fewer than k+1 frames gives an empty list.
PairSchedule sample_pairs(std::size_t frame_count, double fps, double interval_ms = 170.0);

/// Mean absolute coordinate difference after dividing x by width and y by height.
double landmark_l1(const std::vector<Eigen::Vector2d>& pred, const std::vector<Eigen::Vector2d>& gt, int width,
                   int height);

struct EvalOptions {
    bool iou = true;
    bool warp = true;
    bool landmarks = true;
    double fps = 30.0;
    double interval_ms = 170.0;
    double depth_tolerance = 0.01;
    unsigned threads = 1;
};

struct MetricReport {
    EvalOptions config;
    std::size_t frame_count = 0;
    int interval = 0;

    std::vector<double> iou;  // per frame
    std::optional<double> iou_mean;

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::optional<double>> warp_psnr;  // per pair; empty when fully occluded
    std::optional<double> warp_psnr_mean;
    std::size_t warp_skipped = 0;

    std::vector<double> landmark_l1;  // per frame
    std::optional<double> landmark_l1_mean;

    std::vector<std::string> warnings;
};

/// Frames are `frame_%06d.png` in `frames_dir` (landmarks, when present,
/// `lmk_%06d.txt` beside them); class maps are `mask_%06d.png` in `masks_dir`.
MetricReport evaluate_sequence(const ParamTrack& track, const DeformModel& model, const std::filesystem::path& frames_dir,
                               const std::filesystem::path& masks_dir, const EvalOptions& options = {});

/// Versioned JSON (`"schema": 1`).
std::string report_to_json(const MetricReport& report);

std::string frame_file_name(std::size_t frame);
std::string mask_file_name(std::size_t frame);
std::string landmark_file_name(std::size_t frame);

/// `x y` per line, pixels.
std::vector<Eigen::Vector2d> load_landmarks(const std::filesystem::path& path);
void save_landmarks(const std::filesystem::path& path, const std::vector<Eigen::Vector2d>& points);

} // namespace facecap
