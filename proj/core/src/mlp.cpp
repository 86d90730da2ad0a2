#include "facecap/mlp.hpp"

#include "facecap/errors.hpp"
#include "facecap/parallel.hpp"
#include "facecap/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace facecap {

namespace {

constexpr Eigen::Index kGradientBlock = 256;

// Applies `a` elementwise; when `deriv` is given, also writes da/dz.
Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z, double beta, Eigen::MatrixXd* deriv) {
    switch (a) {
    case Activation::Linear:
        if (deriv) deriv->setOnes(z.rows(), z.cols());
        return z;
    case Activation::ReLU:
        if (deriv) *deriv = (z.array() > 0.0).cast<double>();
        return z.array().max(0.0);
    case Activation::Softplus: {
        // softplus(z) = max(z, 0) + log(1 + exp(-|beta z|)) / beta, branch-free and overflow-safe.
        const Eigen::ArrayXXd bz = beta * z.array();
        if (deriv) *deriv = (1.0 + (-bz).exp()).inverse();
        return z.array().max(0.0) + (1.0 + (-bz.abs()).exp()).log() / beta;
    }
    case Activation::Sigmoid: {
        const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
        if (deriv) *deriv = s * (1.0 - s);
        return s;
    }
    }
    return z;
}

struct Block {
    Eigen::VectorXd grad;
    double sq_error = 0.0;
};

Block block_gradient(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t, double scale) {
    const auto& cfg = net.config();
    const std::size_t L = net.layer_count();
    std::vector<Eigen::MatrixXd> deriv(L), act(L + 1);
    act[0] = x;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = net.weight(l) * act[l];
        z.colwise() += net.bias(l);
        act[l + 1] = activate(l + 1 == L ? cfg.output : cfg.hidden, z, cfg.beta, &deriv[l]);
    }
    Block out;
    out.grad = Eigen::VectorXd::Zero(net.parameters().size());
    Eigen::MatrixXd delta = act[L] - t;
    out.sq_error = delta.squaredNorm();
    delta *= 2.0 * scale;
    for (std::size_t l = L; l-- > 0;) {
        if ((l + 1 == L ? cfg.output : cfg.hidden) != Activation::Linear) delta.array() *= deriv[l].array();
        const auto out_w = static_cast<Eigen::Index>(cfg.widths[l + 1]);
        const auto in_w = static_cast<Eigen::Index>(cfg.widths[l]);
        const auto off = static_cast<Eigen::Index>(net.weight_offset(l));
        Eigen::Map<Eigen::MatrixXd>(out.grad.data() + off, out_w, in_w).noalias() = delta * act[l].transpose();
        out.grad.segment(off + out_w * in_w, out_w) = delta.rowwise().sum();
        if (l > 0) delta = net.weight(l).transpose() * delta;
    }
    return out;
}

} // namespace

const char* to_string(Activation a) {
    switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::ReLU;
    if (s == "softplus") return Activation::Softplus;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ValidationError("unknown activation '" + s + "'");
}

double apply_activation(Activation a, double z, double beta) {
    switch (a) {
    case Activation::Linear: return z;
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Softplus: return std::max(z, 0.0) + std::log(1.0 + std::exp(-std::abs(beta * z))) / beta;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

Mlp::Mlp(MlpConfig config) : config_(std::move(config)) {
    if (config_.widths.size() < 2) throw ValidationError("MLP needs at least input and output widths");
    for (auto w : config_.widths)
        if (w == 0) throw ValidationError("MLP layer width must be positive");
    if ((config_.hidden == Activation::Softplus || config_.output == Activation::Softplus) && !(config_.beta > 0.0))
        throw ValidationError("softplus needs beta > 0");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < config_.widths.size(); ++l) {
        offsets_.push_back(total);
        total += config_.widths[l] * config_.widths[l + 1] + config_.widths[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

Mlp Mlp::kaiming(MlpConfig config, std::uint64_t seed) {
    Mlp net(std::move(config));
    Rng rng(seed);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(net.config_.widths[l]));
        auto W = net.weight(l);
        for (Eigen::Index c = 0; c < W.cols(); ++c)
            for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = rng.uniform(-bound, bound);
    }
    return net;
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t l) {
    return {params_.data() + offsets_.at(l), static_cast<Eigen::Index>(config_.widths[l + 1]),
            static_cast<Eigen::Index>(config_.widths[l])};
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t l) const {
    return {params_.data() + offsets_.at(l), static_cast<Eigen::Index>(config_.widths[l + 1]),
            static_cast<Eigen::Index>(config_.widths[l])};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) {
    return {params_.data() + offsets_.at(l) + config_.widths[l] * config_.widths[l + 1],
            static_cast<Eigen::Index>(config_.widths[l + 1])};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
    return {params_.data() + offsets_.at(l) + config_.widths[l] * config_.widths[l + 1],
            static_cast<Eigen::Index>(config_.widths[l + 1])};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.rows()) != input_width())
        throw ValidationError("MLP input width " + std::to_string(x.rows()) + " != " + std::to_string(input_width()));
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        Eigen::MatrixXd z = weight(l) * a;
        z.colwise() += bias(l);
        a = activate(l + 1 == layer_count() ? config_.output : config_.hidden, z, config_.beta, nullptr);
    }
    return a;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    return forward(Eigen::MatrixXd(x)).col(0);
}

MlpGradient mlp_gradients(const Mlp& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          unsigned threads) {
    const Eigen::Index n = inputs.cols();
    if (n == 0) throw ValidationError("mlp_gradients: empty batch");
    if (static_cast<std::size_t>(inputs.rows()) != net.input_width())
        throw ValidationError("mlp_gradients: input width mismatch");
    if (targets.cols() != n || static_cast<std::size_t>(targets.rows()) != net.output_width())
        throw ValidationError("mlp_gradients: target shape mismatch");
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(net.output_width()));
    const auto blocks = static_cast<std::size_t>((n + kGradientBlock - 1) / kGradientBlock);
    std::vector<Block> partial(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * kGradientBlock;
        const Eigen::Index len = std::min(kGradientBlock, n - start);
        partial[b] = block_gradient(net, inputs.middleCols(start, len), targets.middleCols(start, len), scale);
    });
    MlpGradient out;
    out.params = std::move(partial[0].grad);
    double sq = partial[0].sq_error;
    for (std::size_t b = 1; b < blocks; ++b) {
        out.params += partial[b].grad;
        sq += partial[b].sq_error;
    }
    out.loss = sq * scale;
    return out;
}

void put_mlp(fwb::Container& c, const Mlp& net, const std::string& prefix) {
    const auto& cfg = net.config();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const RowMajor w = net.weight(l);
        c.put_array<double>(prefix + "w" + std::to_string(l), {cfg.widths[l + 1], cfg.widths[l]},
                            std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
        const auto b = net.bias(l);
        c.put_array<double>(prefix + "b" + std::to_string(l), {cfg.widths[l + 1]},
                            std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
    }
    nlohmann::json meta;
    meta["widths"] = cfg.widths;
    meta["hidden"] = to_string(cfg.hidden);
    meta["output"] = to_string(cfg.output);
    meta["beta"] = cfg.beta;
    c.put_text(prefix + "meta", meta.dump());
}

Mlp get_mlp(const fwb::Container& c, const std::string& prefix) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(c.get_text(prefix + "meta"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad MLP meta chunk: " + std::string(e.what()));
    }
    MlpConfig cfg;
    try {
        cfg.widths = meta.at("widths").get<std::vector<std::size_t>>();
        cfg.hidden = activation_from_string(meta.at("hidden").get<std::string>());
        cfg.output = activation_from_string(meta.at("output").get<std::string>());
        cfg.beta = meta.at("beta").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad MLP meta chunk: " + std::string(e.what()));
    }
    Mlp net(cfg);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto w = c.get_array<double>(prefix + "w" + std::to_string(l));
        const auto b = c.get_array<double>(prefix + "b" + std::to_string(l));
        if (w.size() != cfg.widths[l] * cfg.widths[l + 1] || b.size() != cfg.widths[l + 1])
            throw ParseError("MLP layer " + std::to_string(l) + " has the wrong size");
        auto W = net.weight(l);
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index col = 0; col < W.cols(); ++col)
                W(r, col) = w[static_cast<std::size_t>(r * W.cols() + col)];
        net.bias(l) = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    return net;
}

} // namespace facecap
