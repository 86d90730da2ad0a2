#pragma once

#include "facecap/camera.hpp"
#include "facecap/deform.hpp"

#include <filesystem>
#include <vector>

namespace facecap {

/// Per-frame pose, expression and camera of a tracked sequence. Every frame
/// uses the same camera mode.
struct ParamTrack {
    std::vector<PoseParams> poses;
    std::vector<ExprParams> expressions;
    std::vector<Camera> cameras;

    std::size_t size() const { return poses.size(); }
    /// Equal lengths, consistent joint/expression counts, one camera mode.
    void validate() const;
    /// Also checks the dimensions against a model.
    void validate(const DeformModel& model) const;
};

/// Chunks theta (n x n_j x 3), trans (n x 3), psi (n x n_e), camera
/// (n x width) and camera_mode (u8, 1).
void save_track(const std::filesystem::path& path, const ParamTrack& track);
ParamTrack load_track(const std::filesystem::path& path);

} // namespace facecap
