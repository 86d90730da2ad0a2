#pragma once

// Synthetic ground truth: a procedural toy head, a smooth parameter
// trajectory, and the rendered frames, class maps and landmarks that the
// metrics consume. Everything is a pure function of the seed.

#include "facecap/appearance.hpp"
#include "facecap/deform.hpp"
#include "facecap/image.hpp"
#include "facecap/track.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace facecap {

inline constexpr std::size_t kToyNeck = 1;
inline constexpr std::size_t kToyJaw = 2;
inline constexpr std::size_t kToyExpressions = 8;
inline constexpr double kSynthFps = 30.0;

/// Ellipsoidal head on a level-3 icosphere (642 vertices): root, neck and jaw
/// joints, 8 smooth expression blendshapes, the seven face classes, material
/// fields and a `hair` field (1 on hair vertices, which are labelled skin).
DeformModel make_toy_head();

/// Smooth head, jaw and expression motion seen by a fixed perspective camera.
ParamTrack make_trajectory(const DeformModel& model, std::size_t frames, int width, int height, std::uint64_t seed);

/// Adds sigma_deg * z_f to the jaw opening angle of every frame. The z_f
/// depend only on the seed, so tracks for different sigma share their draws.
ParamTrack perturb_jaw(const ParamTrack& track, double sigma_deg, std::uint64_t seed);

struct SynthFrame {
    ImageF image;     // linear RGB
    ImageU8 classes;  // reference class map: hair pixels carry kHairLabel
    std::vector<Eigen::Vector2d> landmarks;
};

SynthFrame render_synth_frame(const DeformModel& model, const LightEvaluator& light, const ParamTrack& track,
                              std::size_t frame, int width, int height);

struct SynthOptions {
    std::size_t frames = 64;
    int width = 256;
    int height = 256;
    std::uint64_t seed = 7;
    double noise_deg = 0.0;
    unsigned threads = 1;
};

/// Writes model.fwb, light.fwb, track_gt.fwb, track_noisy.fwb, meta.json,
/// frames/ (sRGB PNG + landmark text) and masks/ under `dir`.
void write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& options);

} // namespace facecap
