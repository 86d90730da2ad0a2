#pragma once

// Neural expression basis: an MLP over positionally encoded canonical
// positions that outputs a 3 x n_e basis per point, pre-trained to mimic
// the model's per-vertex expression basis.

#include "facecap/deform.hpp"
#include "facecap/encoding.hpp"
#include "facecap/mlp.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace facecap {

/// 4 hidden layers of 128 softplus (beta 100) units, linear output of 3 n_e.
MlpConfig deformer_config(const SinusoidalEncoding& enc, std::size_t expr_count);

/// Kaiming-uniform hidden layers; the output layer starts at zero so the
/// initial basis is zero rather than O(1) noise.
Mlp make_deformer_net(const SinusoidalEncoding& enc, std::size_t expr_count, std::uint64_t seed);

struct PretrainOptions {
    int iterations = 5000;
    double lr = 2e-4;
    unsigned threads = 1;
};

struct PretrainResult {
    Mlp net;
    std::vector<double> loss_history;  // loss before each step
    double final_loss = 0.0;           // loss after the last step
};

/// Full-batch supervised fit of ||D(gamma(x_c)) - E||^2 over every vertex.
PretrainResult pretrain_deformer(const DeformModel& model, Mlp net, const SinusoidalEncoding& enc,
                                 const PretrainOptions& options = {});

/// Basis at arbitrary points, (3 n) x n_e with row 3p + axis.
RowMatrix eval_deformer(const Mlp& net, const SinusoidalEncoding& enc, const std::vector<Vec3>& positions);

/// Training targets in network layout: one column per vertex, 3 n_e rows (axis-major).
Eigen::MatrixXd deformer_targets(const RowMatrix& expr_basis, std::size_t vertex_count);

void save_deformer(const Mlp& net, const SinusoidalEncoding& enc, std::uint64_t seed, const std::filesystem::path& path);
struct LoadedDeformer {
    Mlp net;
    SinusoidalEncoding encoding;
};
LoadedDeformer load_deformer(const std::filesystem::path& path);

} // namespace facecap
