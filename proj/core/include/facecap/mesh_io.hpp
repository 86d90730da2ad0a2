#pragma once

#include "facecap/fwb.hpp"
#include "facecap/mesh.hpp"

#include <filesystem>

namespace facecap {

/// Wavefront-style ASCII: `v x y z` and `f i j k` (1-based); `#` starts a comment.
TriMesh load_obj(const std::filesystem::path& path);
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

/// FWB1 chunks `vertices` (f64 n x 3), `faces` (u32 m x 3), and one
/// `attr.<name>` (f64 n x width) per attribute channel.
fwb::Container mesh_to_container(const TriMesh& mesh);
TriMesh mesh_from_container(const fwb::Container& c);

/// Dispatch on extension: `.obj` is ASCII, anything else is FWB1.
TriMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

} // namespace facecap
