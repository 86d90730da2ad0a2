#include "facecap/adam.hpp"
#include "facecap/deformer.hpp"
#include "facecap/encoding.hpp"
#include "facecap/errors.hpp"
#include "facecap/hash_grid.hpp"
#include "facecap/mlp.hpp"
#include "facecap/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace facecap;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (auto& v : m.reshaped()) v = rng.uniform(-s, s);
    return m;
}

double max_fd_error(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const Eigen::VectorXd g = mlp_gradients(net, x, y).params;
    Mlp probe = net;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double p = probe.parameters()[i];
        probe.parameters()[i] = p + 1e-5;
        const double up = mlp_gradients(probe, x, y).loss;
        probe.parameters()[i] = p - 1e-5;
        const double down = mlp_gradients(probe, x, y).loss;
        probe.parameters()[i] = p;
        const double fd = (up - down) / 2e-5;
        worst = std::max(worst, std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-6}));
    }
    return worst;
}

// Toy sphere with a smooth linear basis: E_v = A p_v per axis.
DeformModel linear_basis_sphere(std::size_t ne) {
    const TriMesh s = make_icosphere(2);
    DeformModel m;
    m.canonical = s.vertices();
    m.faces = s.faces();
    const auto nv = m.canonical.size();
    m.expr_basis = RowMatrix(3 * nv, ne);
    for (std::size_t v = 0; v < nv; ++v)
        for (int a = 0; a < 3; ++a)
            for (std::size_t e = 0; e < ne; ++e)
                m.expr_basis(3 * v + a, e) = 0.05 * (static_cast<double>(e + 1) * m.canonical[v][a] -
                                                     0.5 * m.canonical[v][(a + 1) % 3]);
    m.parents = {0};
    m.pose_correctives = RowMatrix(3 * nv, 0);
    m.skin_weights = RowMatrix::Ones(nv, 1);
    m.joint_regressor = RowMatrix::Constant(1, nv, 1.0 / static_cast<double>(nv));
    return m;
}

} // namespace

TEST(SinusoidalEncoding, ZeroInput) {
    const SinusoidalEncoding enc{2, true};
    const Eigen::VectorXd g = enc.encode(Vec3::Zero());
    ASSERT_EQ(g.size(), 15);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(g[i], 0.0);
    for (int p = 0; p < 6; ++p) {
        EXPECT_EQ(g[3 + 2 * p], 0.0);
        EXPECT_EQ(g[4 + 2 * p], 1.0);
    }
}

TEST(SinusoidalEncoding, DegenerateAndKnownAngle) {
    const Vec3 x(0.3, -0.7, 1.9);
    EXPECT_EQ(SinusoidalEncoding({0, true}).encode(x), Eigen::VectorXd(x));
    const Eigen::VectorXd g = SinusoidalEncoding{1, true}.encode(Vec3(1, 0, 0));
    EXPECT_NEAR(g[3], 0.0, 1e-15);
    EXPECT_EQ(g[4], -1.0);
    EXPECT_EQ(SinusoidalEncoding({3, false}).output_width(), 18u);
}

TEST(SinusoidalEncoding, PairsAreUnitNorm) {
    Rng rng(1);
    const SinusoidalEncoding enc{6, false};
    for (int t = 0; t < 50; ++t) {
        const Eigen::VectorXd g = enc.encode(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)));
        for (Eigen::Index p = 0; p < g.size(); p += 2) EXPECT_NEAR(std::hypot(g[p], g[p + 1]), 1.0, 1e-14);
        EXPECT_NEAR(g.norm(), std::sqrt(3.0 * 6), 1e-12);
    }
}

TEST(SinusoidalEncoding, FrequencyMajorLayout) {
    const Vec3 x(0.11, 0.23, 0.37);
    const Eigen::VectorXd g = SinusoidalEncoding{3, true}.encode(x);
    for (int k = 0; k < 3; ++k)
        for (int d = 0; d < 3; ++d) {
            const double a = std::ldexp(std::numbers::pi, k) * x[d];
            EXPECT_NEAR(g[3 + 6 * k + 2 * d], std::sin(a), 1e-15);
            EXPECT_NEAR(g[4 + 6 * k + 2 * d], std::cos(a), 1e-15);
        }
}

TEST(Mlp, AffineIdentityAndRelu) {
    Mlp net({{2, 3}, Activation::ReLU, Activation::Linear, 100});
    net.bias(0) << 0.5, -1.0, 2.0;
    EXPECT_EQ(net.forward(Eigen::VectorXd(Eigen::VectorXd::Random(2))), Eigen::Vector3d(0.5, -1.0, 2.0));

    Mlp relu({{2, 2, 2}, Activation::ReLU, Activation::Linear, 100});
    relu.weight(0).setIdentity();
    relu.weight(1).setIdentity();
    EXPECT_EQ(relu.forward(Eigen::VectorXd(Eigen::Vector2d(-1, 2))), Eigen::Vector2d(0, 2));
    EXPECT_THROW(relu.forward(Eigen::VectorXd(Eigen::VectorXd::Zero(3))), ValidationError);
}

TEST(Mlp, Softplus) {
    EXPECT_NEAR(apply_activation(Activation::Softplus, 1.0, 100.0), 1.0, 1e-9);
    EXPECT_NEAR(apply_activation(Activation::Softplus, 0.0, 100.0), std::log(2.0) / 100.0, 1e-15);
    EXPECT_NEAR(apply_activation(Activation::Softplus, -0.05, 100.0), std::log1p(std::exp(-5.0)) / 100.0, 1e-15);
    EXPECT_EQ(apply_activation(Activation::Softplus, -50.0, 100.0), 0.0);
    EXPECT_TRUE(std::isfinite(apply_activation(Activation::Softplus, 1e6, 100.0)));
    EXPECT_NEAR(apply_activation(Activation::Sigmoid, 0.0, 1.0), 0.5, 0.0);
}

TEST(Mlp, BatchForwardMatchesColumnwise) {
    const Mlp net = Mlp::kaiming({{4, 8, 3}, Activation::Softplus, Activation::Sigmoid, 100}, 3);
    Rng rng(3);
    const Eigen::MatrixXd x = random_matrix(rng, 4, 5);
    const Eigen::MatrixXd y = net.forward(x);
    for (Eigen::Index c = 0; c < 5; ++c) EXPECT_LT((y.col(c) - net.forward(Eigen::VectorXd(x.col(c)))).norm(), 1e-14);
}

TEST(Mlp, KaimingBoundsAndDeterminism) {
    const MlpConfig cfg{{6, 10, 4}, Activation::ReLU, Activation::Linear, 100};
    const Mlp a = Mlp::kaiming(cfg, 9), b = Mlp::kaiming(cfg, 9), c = Mlp::kaiming(cfg, 10);
    EXPECT_EQ(a.parameters(), b.parameters());
    EXPECT_NE(a.parameters(), c.parameters());
    EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 6));
    EXPECT_LE(a.weight(1).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 10));
    EXPECT_EQ(a.bias(0).norm(), 0.0);
}

TEST(MlpGradients, ZeroResidualAndSingleNeuron) {
    Mlp net({{1, 1}, Activation::ReLU, Activation::Linear, 100});
    net.weight(0)(0, 0) = 1.5;
    Eigen::MatrixXd x(1, 1), t(1, 1);
    x << 2.0;
    t << 3.0;
    auto g = mlp_gradients(net, x, t);
    EXPECT_EQ(g.loss, 0.0);
    EXPECT_EQ(g.params.norm(), 0.0);
    t << 1.0;
    g = mlp_gradients(net, x, t);
    EXPECT_DOUBLE_EQ(g.loss, 4.0);
    EXPECT_DOUBLE_EQ(g.params[0], 2 * 2.0 * (1.5 * 2.0 - 1.0));  // dL/dw = 2x(wx - t)
    EXPECT_DOUBLE_EQ(g.params[1], 2 * (1.5 * 2.0 - 1.0));
}

TEST(MlpGradients, FiniteDifferences) {
    struct Case {
        MlpConfig cfg;
        std::uint64_t seed;
    };
    const Case cases[] = {
        {{{3, 7, 5, 2}, Activation::ReLU, Activation::Linear, 100}, 1},
        {{{4, 6, 6, 3}, Activation::Softplus, Activation::Linear, 100}, 2},
        {{{2, 5, 4}, Activation::Softplus, Activation::Sigmoid, 100}, 3},
        {{{3, 4, 2}, Activation::Softplus, Activation::Softplus, 10}, 4},
    };
    for (const auto& c : cases) {
        const Mlp net = Mlp::kaiming(c.cfg, c.seed);
        Rng rng(c.seed + 50);
        const auto in = static_cast<Eigen::Index>(c.cfg.widths.front()), out = static_cast<Eigen::Index>(c.cfg.widths.back());
        EXPECT_LT(max_fd_error(net, random_matrix(rng, in, 7), random_matrix(rng, out, 7)), 1e-4);
    }
}

TEST(MlpGradients, ThreadCountDoesNotChangeResult) {
    const Mlp net = Mlp::kaiming({{5, 16, 16, 4}, Activation::Softplus, Activation::Linear, 100}, 8);
    Rng rng(8);
    const Eigen::MatrixXd x = random_matrix(rng, 5, 700), y = random_matrix(rng, 4, 700);
    const auto a = mlp_gradients(net, x, y, 1), b = mlp_gradients(net, x, y, 5);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.params, b.params);
}

TEST(Mlp, SerializationRoundTrip) {
    const Mlp net = Mlp::kaiming({{3, 5, 2}, Activation::Softplus, Activation::Sigmoid, 42}, 1);
    fwb::Container c;
    put_mlp(c, net, "x_");
    const Mlp r = get_mlp(fwb::Container::decode(c.encode()), "x_");
    EXPECT_EQ(r.parameters(), net.parameters());
    EXPECT_EQ(r.config().widths, net.config().widths);
    EXPECT_EQ(r.config().beta, 42.0);
    EXPECT_EQ(r.config().output, Activation::Sigmoid);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
    AdamState s;
    Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(4, -1, 1);
    const Eigen::VectorXd w0 = w;
    for (int i = 0; i < 10; ++i) adam_step(s, w, Eigen::VectorXd::Zero(4));
    EXPECT_EQ(w, w0);
}

TEST(Adam, FirstStepByHand) {
    AdamState s;
    s.lr = 0.1;
    Eigen::VectorXd w(1), g(1);
    w << 0.0;
    g << 1.0;
    adam_step(s, w, g);
    // m_hat = 1, v_hat = 1: step = -lr / (1 + eps).
    EXPECT_NEAR(w[0], -0.1 / (1.0 + 1e-8), 1e-16);
}

TEST(Adam, ScalarReference) {
    AdamState s;
    s.lr = 0.1;
    Eigen::VectorXd w(1);
    w << 0.0;
    double rw = 0, m = 0, v = 0;
    for (int t = 1; t <= 100; ++t) {
        Eigen::VectorXd g(1);
        g << 2 * (w[0] - 3);
        adam_step(s, w, g);
        const double rg = 2 * (rw - 3);
        m = 0.9 * m + 0.1 * rg;
        v = 0.999 * v + 0.001 * rg * rg;
        rw -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        ASSERT_NEAR(w[0], rw, 1e-12) << "step " << t;
    }
}

TEST(Adam, ShapeMismatch) {
    AdamState s;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    EXPECT_THROW(adam_step(s, w, Eigen::VectorXd::Zero(2)), ValidationError);
}

TEST(HashGrid, ScheduleAndResolutions) {
    EXPECT_EQ(HashGrid::scheduled_levels(0), 1);
    EXPECT_EQ(HashGrid::scheduled_levels(249), 1);
    EXPECT_EQ(HashGrid::scheduled_levels(250), 2);
    EXPECT_EQ(HashGrid::scheduled_levels(1750), 8);
    EXPECT_EQ(HashGrid::scheduled_levels(1999), 8);
    EXPECT_EQ(HashGrid::scheduled_levels(2000), 16);
    EXPECT_EQ(HashGrid::scheduled_levels(100000), 16);

    HashGridConfig cfg;
    cfg.log2_table_size = 10;
    const HashGrid g(cfg);
    const double growth = std::pow(4096.0 / 16.0, 1.0 / 15.0);
    for (int l = 0; l < 16; ++l) EXPECT_EQ(g.resolution(l), std::lround(16.0 * std::pow(growth, l)));
    EXPECT_EQ(g.resolution(0), 16u);
    EXPECT_EQ(g.resolution(15), 4096u);
    EXPECT_EQ(g.output_width(), 32u);
}

TEST(HashGrid, LatticePointReturnsStoredFeature) {
    HashGridConfig cfg;
    cfg.log2_table_size = 12;
    cfg.init_scale = 1.0;
    const HashGrid g(cfg);
    const std::uint32_t i = 3, j = 7, k = 11;
    const double n = g.resolution(0);
    const Eigen::VectorXd out = g.encode(Vec3(i / n, j / n, k / n));
    const std::size_t slot = g.hash(i, j, k);
    EXPECT_NEAR(out[0], g.feature(0, slot, 0), 1e-15);
    EXPECT_NEAR(out[1], g.feature(0, slot, 1), 1e-15);
}

TEST(HashGrid, InactiveLevelsAreZeroAndPrefixStable) {
    HashGridConfig cfg;
    cfg.log2_table_size = 12;
    cfg.init_scale = 1.0;
    HashGrid g(cfg);
    const Vec3 x(0.31, 0.62, 0.47);
    g.set_active(0);
    EXPECT_EQ(g.encode(x), Eigen::VectorXd::Zero(32));
    g.set_active(3);
    const Eigen::VectorXd three = g.encode(x);
    EXPECT_EQ(three.tail(26), Eigen::VectorXd::Zero(26));
    g.set_active(9);
    EXPECT_EQ(g.encode(x).head(6), three.head(6));
    EXPECT_THROW(g.set_active(17), ValidationError);
}

TEST(HashGrid, HashFormulaAndRangeCheck) {
    HashGridConfig cfg;
    cfg.log2_table_size = 19;
    const HashGrid g(cfg);
    const std::uint32_t h = (5u * 1u) ^ (9u * 2654435761u) ^ (13u * 805459861u);
    EXPECT_EQ(g.hash(5, 9, 13), h % (1u << 19));
    EXPECT_THROW(g.encode(Vec3(1.01, 0.5, 0.5)), ValidationError);
    EXPECT_THROW(g.encode(Vec3(0.5, -1e-9, 0.5)), ValidationError);
    EXPECT_NO_THROW(g.encode(Vec3(1.0, 0.0, 1.0)));
}

TEST(HashGrid, ContinuousAlongShortSegment) {
    HashGridConfig cfg;
    cfg.log2_table_size = 14;
    HashGrid g(cfg);
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        const Vec3 a(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
        const Vec3 b = a + Vec3(1e-6, -1e-6, 1e-6) / std::sqrt(3.0);
        EXPECT_LT((g.encode(a) - g.encode(b)).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(HashGrid, SaveLoadRoundTrip) {
    HashGridConfig cfg;
    cfg.log2_table_size = 8;
    cfg.seed = 17;
    HashGrid g(cfg);
    g.set_active_levels(600);
    fwb::Container c;
    g.save(c);
    const HashGrid r = HashGrid::load(fwb::Container::decode(c.encode()));
    EXPECT_EQ(r.active_levels(), 3);
    const Vec3 x(0.2, 0.4, 0.8);
    EXPECT_EQ(r.encode(x), g.encode(x));
}

TEST(Deformer, ZeroNetGivesZeroBasis) {
    const SinusoidalEncoding enc{4, true};
    const Mlp net = make_deformer_net(enc, 3, 1);
    const RowMatrix b = eval_deformer(net, enc, {Vec3(0.1, 0.2, 0.3), Vec3(-1, 0, 1)});
    EXPECT_EQ(b.rows(), 6);
    EXPECT_EQ(b.cols(), 3);
    EXPECT_EQ(b.norm(), 0.0);
}

TEST(Deformer, ConfigShape) {
    const SinusoidalEncoding enc{10, true};
    const MlpConfig cfg = deformer_config(enc, 8);
    EXPECT_EQ(cfg.widths, (std::vector<std::size_t>{63, 128, 128, 128, 128, 24}));
    EXPECT_EQ(cfg.hidden, Activation::Softplus);
    EXPECT_EQ(cfg.beta, 100.0);
}

TEST(Deformer, ZeroTargetLearnsZeroMap) {
    DeformModel m = linear_basis_sphere(2);
    m.expr_basis.setZero();
    const SinusoidalEncoding enc{2, true};
    const auto r = pretrain_deformer(m, Mlp::kaiming(deformer_config(enc, 2), 5), enc, {600, 1e-3, 1});
    EXPECT_LT(r.final_loss, 1e-10);
}

TEST(Deformer, ZeroLearningRateKeepsParameters) {
    const DeformModel m = linear_basis_sphere(2);
    const SinusoidalEncoding enc{2, true};
    const Mlp init = Mlp::kaiming(deformer_config(enc, 2), 6);
    const auto r = pretrain_deformer(m, init, enc, {20, 0.0, 1});
    EXPECT_EQ(r.net.parameters(), init.parameters());
    ASSERT_EQ(r.loss_history.size(), 20u);
    for (double l : r.loss_history) EXPECT_EQ(l, r.loss_history.front());
}

TEST(Deformer, InterpolatesLinearBasisAtEdgeMidpoints) {
    const DeformModel m = linear_basis_sphere(2);
    const SinusoidalEncoding enc{0, true};
    const auto r = pretrain_deformer(m, make_deformer_net(enc, 2, 3), enc, {1500, 2e-3, 1});
    const TriMesh mesh = m.canonical_mesh();
    const auto edges = unique_edges(mesh);
    std::vector<Vec3> mids;
    for (const auto& e : edges) mids.push_back(0.5 * (m.canonical[e[0]] + m.canonical[e[1]]));
    const RowMatrix pred = eval_deformer(r.net, enc, mids);
    double err = 0, amp = 0;
    for (std::size_t i = 0; i < edges.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            const auto lerp = 0.5 * (m.expr_basis.row(3 * edges[i][0] + a) + m.expr_basis.row(3 * edges[i][1] + a));
            err += (pred.row(3 * i + a) - lerp).squaredNorm();
            amp += lerp.squaredNorm();
        }
    EXPECT_LT(std::sqrt(err / amp), 0.05);
}

TEST(Deformer, WidthMismatchThrows) {
    const DeformModel m = linear_basis_sphere(2);
    const SinusoidalEncoding enc{2, true};
    EXPECT_THROW(pretrain_deformer(m, make_deformer_net(SinusoidalEncoding{3, true}, 2, 1), enc, {1, 1e-3, 1}),
                 ValidationError);
    EXPECT_THROW(pretrain_deformer(m, make_deformer_net(enc, 3, 1), enc, {1, 1e-3, 1}), ValidationError);
}

TEST(Deformer, SaveLoadRoundTrip) {
    const SinusoidalEncoding enc{5, false};
    const Mlp net = Mlp::kaiming(deformer_config(enc, 2), 4);
    const auto path = std::filesystem::temp_directory_path() / "facecap_neural_deformer.fwb";
    save_deformer(net, enc, 4, path);
    const auto r = load_deformer(path);
    EXPECT_EQ(r.encoding.frequencies, 5);
    EXPECT_FALSE(r.encoding.include_input);
    EXPECT_EQ(r.net.parameters(), net.parameters());
}
