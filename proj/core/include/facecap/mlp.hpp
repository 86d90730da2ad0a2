#pragma once

#include "facecap/fwb.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace facecap {

enum class Activation { Linear, ReLU, Softplus, Sigmoid };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MlpConfig {
    std::vector<std::size_t> widths;  // input, hidden..., output
    Activation hidden = Activation::ReLU;
    Activation output = Activation::Linear;
    double beta = 100.0;  // softplus sharpness
};

/// Dense feed-forward network. All parameters live in one flat vector
/// (per layer: weight matrix column-major out x in, then bias) so optimizers
/// and serialization can treat them uniformly.
class Mlp {
public:
    Mlp() = default;
    /// Zero-initialized parameters.
    explicit Mlp(MlpConfig config);
    /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
    static Mlp kaiming(MlpConfig config, std::uint64_t seed);

    const MlpConfig& config() const { return config_; }
    std::size_t layer_count() const { return config_.widths.size() - 1; }
    std::size_t input_width() const { return config_.widths.front(); }
    std::size_t output_width() const { return config_.widths.back(); }

    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }

    Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    /// One sample per column.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

private:
    MlpConfig config_;
    Eigen::VectorXd params_;
    std::vector<std::size_t> offsets_;
};

double apply_activation(Activation a, double z, double beta);

struct MlpGradient {
    Eigen::VectorXd params;  // same layout as Mlp::parameters()
    double loss = 0.0;
};

/// Mean-squared-error loss over all outputs of the batch (one sample per
/// column) and its exact reverse-mode gradient. Samples are reduced in
/// fixed blocks, so the result does not depend on `threads`.
MlpGradient mlp_gradients(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          unsigned threads = 1);

/// Chunks `<prefix>w<l>` (f64 out x in, row-major) and `<prefix>b<l>`, plus a
/// JSON `<prefix>meta` chunk with widths, activations and beta.
void put_mlp(fwb::Container& c, const Mlp& net, const std::string& prefix = "");
Mlp get_mlp(const fwb::Container& c, const std::string& prefix = "");

} // namespace facecap
