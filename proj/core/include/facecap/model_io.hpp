#pragma once

#include "facecap/deform.hpp"
#include "facecap/fwb.hpp"

#include <filesystem>

namespace facecap {

// Model file chunks:
//   canonical (f64 n_V x 3), faces (u32 n_F x 3), expr_basis (f64 n_V x 3 x n_e),
//   pose_correctives (f64 n_V x 3 x 9(n_j-1)), skin_weights (f64 n_V x n_j),
//   joint_regressor (f64 n_j x n_V), parents (u32 n_j),
//   optional: labels (u32 n_V), class_names (u8, newline-separated),
//   landmarks (u32 m), field.<name> (f64 n_V x w), betas (f64 k).
fwb::Container model_to_container(const DeformModel& model);
DeformModel model_from_container(const fwb::Container& c);

void save_model(const DeformModel& model, const std::filesystem::path& path);
DeformModel load_model(const std::filesystem::path& path);

} // namespace facecap
