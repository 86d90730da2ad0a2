#include "facecap/deformer.hpp"

#include "facecap/adam.hpp"
#include "facecap/errors.hpp"

#include <nlohmann/json.hpp>

namespace facecap {

MlpConfig deformer_config(const SinusoidalEncoding& enc, std::size_t expr_count) {
    MlpConfig cfg;
    cfg.widths = {enc.output_width(), 128, 128, 128, 128, 3 * expr_count};
    cfg.hidden = Activation::Softplus;
    cfg.output = Activation::Linear;
    cfg.beta = 100.0;
    return cfg;
}

Mlp make_deformer_net(const SinusoidalEncoding& enc, std::size_t expr_count, std::uint64_t seed) {
    Mlp net = Mlp::kaiming(deformer_config(enc, expr_count), seed);
    net.weight(net.layer_count() - 1).setZero();
    return net;
}

Eigen::MatrixXd deformer_targets(const RowMatrix& expr_basis, std::size_t vertex_count) {
    const auto ne = expr_basis.cols();
    Eigen::MatrixXd t(3 * ne, static_cast<Eigen::Index>(vertex_count));
    for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(vertex_count); ++v)
        for (Eigen::Index c = 0; c < 3; ++c)
            for (Eigen::Index e = 0; e < ne; ++e) t(c * ne + e, v) = expr_basis(3 * v + c, e);
    return t;
}

PretrainResult pretrain_deformer(const DeformModel& model, Mlp net, const SinusoidalEncoding& enc,
                                 const PretrainOptions& options) {
    if (net.input_width() != enc.output_width())
        throw ValidationError("deformer input width " + std::to_string(net.input_width()) +
                              " != encoding width " + std::to_string(enc.output_width()));
    if (net.output_width() != 3 * model.expr_count())
        throw ValidationError("deformer output width " + std::to_string(net.output_width()) + " != 3 n_e = " +
                              std::to_string(3 * model.expr_count()));
    const Eigen::MatrixXd inputs = enc.encode(model.canonical);
    const Eigen::MatrixXd targets = deformer_targets(model.expr_basis, model.vertex_count());

    AdamState adam;
    adam.lr = options.lr;
    PretrainResult out;
    out.loss_history.reserve(static_cast<std::size_t>(std::max(0, options.iterations)));
    for (int it = 0; it < options.iterations; ++it) {
        const auto g = mlp_gradients(net, inputs, targets, options.threads);
        out.loss_history.push_back(g.loss);
        adam_step(adam, net.parameters(), g.params);
    }
    out.final_loss = (net.forward(inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
    out.net = std::move(net);
    return out;
}

RowMatrix eval_deformer(const Mlp& net, const SinusoidalEncoding& enc, const std::vector<Vec3>& positions) {
    if (net.output_width() % 3 != 0) throw ValidationError("deformer output width is not a multiple of 3");
    const auto ne = static_cast<Eigen::Index>(net.output_width() / 3);
    const Eigen::MatrixXd y = net.forward(enc.encode(positions));
    RowMatrix basis(3 * static_cast<Eigen::Index>(positions.size()), ne);
    for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(positions.size()); ++p)
        for (Eigen::Index c = 0; c < 3; ++c)
            for (Eigen::Index e = 0; e < ne; ++e) basis(3 * p + c, e) = y(c * ne + e, p);
    return basis;
}

void save_deformer(const Mlp& net, const SinusoidalEncoding& enc, std::uint64_t seed, const std::filesystem::path& path) {
    fwb::Container c;
    put_mlp(c, net);
    nlohmann::json enc_meta{{"L", enc.frequencies}, {"include_input", enc.include_input}, {"seed", seed}};
    c.put_text("encoding", enc_meta.dump());
    c.write(path);
}

LoadedDeformer load_deformer(const std::filesystem::path& path) {
    const auto c = fwb::Container::read(path);
    LoadedDeformer out;
    out.net = get_mlp(c);
    try {
        const auto meta = nlohmann::json::parse(c.get_text("encoding"));
        out.encoding.frequencies = meta.at("L").get<int>();
        out.encoding.include_input = meta.at("include_input").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad deformer encoding chunk: " + std::string(e.what()));
    }
    return out;
}

} // namespace facecap
