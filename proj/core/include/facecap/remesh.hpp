#pragma once

// Isotropic remeshing toward a target edge length L: split edges above 4L/3,
// collapse below 4L/5, flip toward valence 6 (4 on the boundary), then
// tangential smoothing projected back onto the input surface. Boundary
// vertices never move.

#include "facecap/deform.hpp"
#include "facecap/fwb.hpp"
#include "facecap/mesh.hpp"

#include <filesystem>
#include <vector>

namespace facecap {

struct RemeshOptions {
    int iterations = 5;
    double smoothing = 0.5;  // step toward the tangential centroid
};

struct RemeshResult {
    TriMesh mesh;
    /// Per output vertex: its location on the input mesh. Output positions
    /// equal bary_point(input, provenance).
    std::vector<BaryCoord> provenance;
};

/// Throws ValidationError naming the edge when the input is not an oriented
/// manifold (an edge shared by more than two faces, or two faces traversing it
/// in the same direction).
RemeshResult remesh(const TriMesh& mesh, double target_edge, const RemeshOptions& options = {});

/// Edge length statistics used by tests and the CLI.
double mean_edge_length(const TriMesh& mesh);
/// Fraction of edges with length in [4L/5, 4L/3].
double edge_band_fraction(const TriMesh& mesh, double target_edge);

/// Moves every per-vertex table of `model` onto the remeshed topology:
/// bases, correctives, skin weights (rows renormalised), material fields by
/// barycentric interpolation; labels by weight argmax (ties to the lower
/// class); landmarks to the nearest new vertex; the joint regressor by
/// projecting each old vertex onto the new surface and spreading its
/// regressor mass over that face's corners, then renormalising rows.
DeformModel reproject_tables(const DeformModel& model, const RemeshResult& remeshed);

/// Chunks prov_face (u32, n) and prov_bary (f64, n x 3).
void put_provenance(fwb::Container& c, const std::vector<BaryCoord>& provenance);
std::vector<BaryCoord> get_provenance(const fwb::Container& c);

} // namespace facecap
