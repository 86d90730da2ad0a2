// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   facecap_acceptance <path-to-facecap-cli> <scratch-dir>

#include "facecap/adam.hpp"
#include "facecap/appearance.hpp"
#include "facecap/deform.hpp"
#include "facecap/deformer.hpp"
#include "facecap/hash_grid.hpp"
#include "facecap/metrics.hpp"
#include "facecap/mlp.hpp"
#include "facecap/model_io.hpp"
#include "facecap/random.hpp"
#include "facecap/raster.hpp"
#include "facecap/remesh.hpp"
#include "facecap/synth.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace facecap;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_cli;
fs::path g_scratch;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

int run(const std::string& args) {
    const std::string cmd = "\"" + g_cli.string() + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void must_run(const std::string& args) {
    if (const int code = run(args); code != 0)
        throw std::runtime_error("command failed (exit " + std::to_string(code) + "): facecap " + args);
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative paths of every regular file under `dir`, sorted.
std::vector<fs::path> tree(const fs::path& dir) {
    std::vector<fs::path> out;
    if (fs::is_regular_file(dir)) return {fs::path{}};
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
    std::sort(out.begin(), out.end());
    return out;
}

// Empty when identical, otherwise a description of the first difference.
std::string compare_trees(const fs::path& a, const fs::path& b) {
    const auto ta = tree(a), tb = tree(b);
    if (ta != tb) return "file lists differ under " + a.string();
    for (const auto& rel : ta)
        if (slurp(a / rel) != slurp(b / rel)) return "bytes differ: " + (a / rel).string();
    return {};
}

fs::path fresh(const std::string& name) {
    const fs::path p = g_scratch / name;
    fs::remove_all(p);
    return p;
}

// ---------------------------------------------------------------------------

fs::path g_synth;  // 64-frame dataset, seed 7, shared by later criteria

Outcome criterion_self_consistency() {
    g_synth = fresh("synth_gt");
    const auto t0 = std::chrono::steady_clock::now();
    const std::string d = g_synth.string();
    must_run("--threads 1 synth --out " + d + " --frames 64 --seed 7 --size 256x256");
    const std::string common = "--threads 1 --model " + d + "/model.fwb --track " + d + "/track_gt.fwb --frames " + d +
                               "/frames --masks " + d + "/masks";
    must_run("eval-iou " + common + " --report " + d + "/iou.json");
    must_run("eval-warp " + common + " --report " + d + "/warp.json");
    const double elapsed = seconds_since(t0);

    const auto iou = read_json(g_synth / "iou.json");
    const auto warp = read_json(g_synth / "warp.json");
    std::size_t iou_exact = 0, iou_total = 0, warp_cap = 0, warp_total = 0;
    double warp_min = std::numeric_limits<double>::infinity();
    for (const auto& v : iou["semantic_iou"]["per_frame"]) {
        ++iou_total;
        if (v.get<double>() == 1.0) ++iou_exact;
    }
    for (const auto& v : warp["warp_psnr"]["per_pair"]) {
        ++warp_total;
        if (v.is_null()) continue;
        warp_min = std::min(warp_min, v.get<double>());
        if (v.get<double>() == kPsnrCap) ++warp_cap;
    }
    Outcome o;
    o.pass = iou_total == 64 && iou_exact == iou_total && warp_total > 0 && warp_cap == warp_total && elapsed < 60.0;
    o.detail = "IoU=1 on " + std::to_string(iou_exact) + "/" + std::to_string(iou_total) + " frames, PSNR=99 on " +
               std::to_string(warp_cap) + "/" + std::to_string(warp_total) + " pairs (min " + fmt(warp_min, 5) +
               " dB, mean " + fmt(warp["warp_psnr"]["mean"].get<double>(), 5) + " dB), " + fmt(elapsed, 3) + " s";
    return o;
}

Outcome criterion_noise_monotonicity() {
    const double sigmas[] = {0.25, 1.0, 4.0};
    std::vector<double> ious, psnrs;
    for (double s : sigmas) {
        const fs::path dir = fresh("synth_noise_" + fmt(s));
        const std::string d = dir.string();
        must_run("synth --out " + d + " --frames 64 --seed 7 --size 256x256 --noise-deg " + fmt(s));
        const std::string common = "--model " + d + "/model.fwb --track " + d + "/track_noisy.fwb --frames " + d +
                                   "/frames --masks " + d + "/masks";
        must_run("eval-iou " + common + " --report " + d + "/iou.json");
        must_run("eval-warp " + common + " --report " + d + "/warp.json");
        ious.push_back(read_json(dir / "iou.json")["semantic_iou"]["mean"].get<double>());
        psnrs.push_back(read_json(dir / "warp.json")["warp_psnr"]["mean"].get<double>());
    }
    Outcome o;
    o.pass = ious[0] > ious[1] && ious[1] > ious[2] && psnrs[0] > psnrs[1] && psnrs[1] > psnrs[2];
    o.detail = "IoU " + fmt(ious[0]) + " > " + fmt(ious[1]) + " > " + fmt(ious[2]) + ", PSNR " + fmt(psnrs[0]) + " > " +
               fmt(psnrs[1]) + " > " + fmt(psnrs[2]);
    return o;
}

double max_vertex_diff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
    return m;
}

Outcome criterion_deformation() {
    const DeformModel model = make_toy_head();
    const std::size_t nj = model.joint_count(), ne = model.expr_count();

    const double rest = max_vertex_diff(pose_mesh(model, PoseParams::rest(nj), ExprParams::zero(ne)), model.canonical);

    Rng rng(2024);
    double compose = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        PoseParams theta = PoseParams::rest(nj);
        for (auto& r : theta.joint_rotations) r = Vec3(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
        theta.translation = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        ExprParams psi = ExprParams::zero(ne);
        for (Eigen::Index e = 0; e < psi.coeffs.size(); ++e) psi.coeffs[e] = rng.uniform(-2, 2);

        const auto ex = expression_offset(model, psi);
        const auto pc = pose_correctives(model, theta);
        std::vector<Vec3> shaped(model.vertex_count());
        for (std::size_t v = 0; v < shaped.size(); ++v) shaped[v] = model.canonical[v] + pc[v] + ex[v];
        const auto joints = regress_joints(model, model.canonical);
        const auto oracle = lbs(shaped, joints, theta, model.skin_weights, model.parents);
        compose = std::max(compose, max_vertex_diff(pose_mesh(model, theta, psi), oracle));
    }

    ExprParams planted = ExprParams::zero(ne);
    for (Eigen::Index e = 0; e < planted.coeffs.size(); ++e) planted.coeffs[e] = rng.uniform(-1.5, 1.5);
    const auto fit = fit_expression(model, pose_mesh(model, PoseParams::rest(nj), planted));
    const double recover = (fit.psi.coeffs - planted.coeffs).cwiseAbs().maxCoeff();

    Outcome o;
    o.pass = rest <= 1e-12 && compose <= 1e-12 && recover <= 1e-8;
    o.detail = "rest " + fmt(rest, 3) + ", composition " + fmt(compose, 3) + ", fit " + fmt(recover, 3);
    return o;
}

double max_gradient_error(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const Eigen::VectorXd analytic = mlp_gradients(net, x, y).params;
    Mlp probe = net;
    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double saved = probe.parameters()[i];
        probe.parameters()[i] = saved + h;
        const double up = mlp_gradients(probe, x, y).loss;
        probe.parameters()[i] = saved - h;
        const double down = mlp_gradients(probe, x, y).loss;
        probe.parameters()[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
    return worst;
}

Outcome criterion_gradients() {
    struct Arch {
        std::vector<std::size_t> widths;
        Activation hidden, output;
        double beta;
    };
    const Arch archs[] = {
        {{4, 9, 7, 3}, Activation::ReLU, Activation::Linear, 100.0},
        {{5, 8, 8, 6, 2}, Activation::Softplus, Activation::Linear, 100.0},
        {{3, 6, 5, 4}, Activation::Softplus, Activation::Sigmoid, 100.0},
    };
    double worst = 0.0;
    std::uint64_t seed = 11;
    for (const auto& a : archs) {
        const Mlp net = Mlp::kaiming({a.widths, a.hidden, a.output, a.beta}, seed++);
        Rng rng(seed++);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(a.widths.front()), 6), y(static_cast<Eigen::Index>(a.widths.back()), 6);
        for (auto& v : x.reshaped()) v = rng.uniform(-1, 1);
        for (auto& v : y.reshaped()) v = rng.uniform(-1, 1);
        worst = std::max(worst, max_gradient_error(net, x, y));
    }
    return {worst < 1e-4, "max relative error " + fmt(worst, 3) + " over 3 architectures"};
}

Outcome criterion_adam() {
    AdamState state;
    state.lr = 0.1;
    Eigen::VectorXd w(1);
    w[0] = 0.0;

    // Scalar reference, written out from the update equations.
    double rw = 0.0, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
    double worst = 0.0;
    for (int t = 1; t <= 100; ++t) {
        Eigen::VectorXd g(1);
        g[0] = 2.0 * (w[0] - 3.0);
        adam_step(state, w, g);

        const double rg = 2.0 * (rw - 3.0);
        m = b1 * m + (1 - b1) * rg;
        v = b2 * v + (1 - b2) * rg * rg;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        rw -= lr * mh / (std::sqrt(vh) + eps);
        worst = std::max(worst, std::abs(w[0] - rw));
    }
    return {worst <= 1e-12, "max trajectory difference " + fmt(worst, 3) + ", w_100 = " + fmt(w[0], 10)};
}

Outcome criterion_pretraining() {
    const DeformModel model = make_toy_head();
    const SinusoidalEncoding enc{10, true};
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = pretrain_deformer(model, make_deformer_net(enc, model.expr_count(), 0), enc, {5000, 2e-4, 1});
    const double elapsed = seconds_since(t0);
    const RowMatrix predicted = eval_deformer(result.net, enc, model.canonical);
    const double err = std::sqrt((predicted - model.expr_basis).squaredNorm() / static_cast<double>(predicted.size()));
    const double amp = std::sqrt(model.expr_basis.squaredNorm() / static_cast<double>(model.expr_basis.size()));
    const double rel = err / amp;
    Outcome o;
    o.pass = model.vertex_count() == 642 && model.expr_count() == 8 && rel < 0.02 && elapsed < 120.0;
    o.detail = "relative RMS error " + fmt(rel * 100, 4) + "% in " + fmt(elapsed, 3) + " s (" +
               std::to_string(model.vertex_count()) + " vertices)";
    return o;
}

// Independent trilinear hash-grid lookup.
Eigen::VectorXd naive_hash_encode(const HashGrid& g, const Vec3& x) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.output_width()));
    const std::uint64_t T = g.table_size();
    for (int l = 0; l < g.active_levels(); ++l) {
        const double n = g.resolution(l);
        long cell[3];
        double t[3];
        for (int d = 0; d < 3; ++d) {
            cell[d] = std::min(static_cast<long>(std::floor(x[d] * n)), static_cast<long>(n) - 1);
            t[d] = x[d] * n - static_cast<double>(cell[d]);
        }
        for (int di = 0; di <= 1; ++di)
            for (int dj = 0; dj <= 1; ++dj)
                for (int dk = 0; dk <= 1; ++dk) {
                    const std::uint64_t i = static_cast<std::uint64_t>(cell[0] + di);
                    const std::uint64_t j = static_cast<std::uint64_t>(cell[1] + dj);
                    const std::uint64_t k = static_cast<std::uint64_t>(cell[2] + dk);
                    const std::uint64_t h = ((i * 1) ^ (j * 2654435761ull) ^ (k * 805459861ull)) & 0xFFFFFFFFull;
                    const std::size_t slot = h % T;
                    const double w = (di ? t[0] : 1 - t[0]) * (dj ? t[1] : 1 - t[1]) * (dk ? t[2] : 1 - t[2]);
                    for (int f = 0; f < g.feature_count(); ++f)
                        out[l * g.feature_count() + f] += w * static_cast<double>(g.feature(l, slot, f));
                }
    }
    return out;
}

Outcome criterion_hash_schedule() {
    HashGridConfig cfg;
    cfg.seed = 5;
    cfg.init_scale = 1.0;  // large features make the comparison meaningful
    HashGrid grid(cfg);
    const int a0 = grid.set_active_levels(0);
    const int a1999 = grid.set_active_levels(1999);
    const int a2000 = grid.set_active_levels(2000);
    const auto r0 = grid.resolution(0), r15 = grid.resolution(15);

    Rng rng(77);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 x(rng.uniform(), rng.uniform(), rng.uniform());
        worst = std::max(worst, (grid.encode(x) - naive_hash_encode(grid, x)).cwiseAbs().maxCoeff());
    }
    Outcome o;
    o.pass = a0 == 1 && a1999 == 8 && a2000 == 16 && r0 == 16 && r15 == 4096 && worst <= 1e-12;
    o.detail = "levels " + std::to_string(a0) + "/" + std::to_string(a1999) + "/" + std::to_string(a2000) +
               ", resolutions " + std::to_string(r0) + ".." + std::to_string(r15) + ", oracle diff " + fmt(worst, 3);
    return o;
}

std::uint64_t ulp_distance(double a, double b) {
    auto key = [](double v) {
        const auto u = std::bit_cast<std::int64_t>(v);
        return u < 0 ? std::numeric_limits<std::int64_t>::min() - u : u;
    };
    const std::int64_t ka = key(a), kb = key(b);
    return ka > kb ? static_cast<std::uint64_t>(ka - kb) : static_cast<std::uint64_t>(kb - ka);
}

Outcome criterion_shading_losses() {
    Rng rng(3);
    std::uint64_t worst_ulp = 0;
    for (int i = 0; i < 1000; ++i) {
        const Rgb albedo(rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2));
        const double k = rng.uniform(0, 3);
        const Rgb ld(rng.uniform(), rng.uniform(), rng.uniform()), ls(rng.uniform(), rng.uniform(), rng.uniform());
        const Rgb c = shade(make_material(albedo, 0.5, k), ld, ls);
        for (int ch = 0; ch < 3; ++ch)
            worst_ulp = std::max(worst_ulp, ulp_distance(c[ch], albedo[ch] * ld[ch] + k * ls[ch]));
    }

    // Each evaluator at its stated minimum.
    std::vector<std::string> nonzero;
    auto expect_zero = [&](const char* name, double v) {
        if (v != 0.0) nonzero.push_back(name);
    };
    ImageF img(8, 6, 3);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    ImageU8 mask(8, 6, 1, 1);
    expect_zero("rgb", loss_rgb(img, img, mask));
    expect_zero("mask", loss_mask(mask, mask));
    RowMatrix basis = RowMatrix::Random(30, 4);
    expect_zero("flame", loss_flame_reg(basis, basis));
    std::vector<Vec3> grid_pts;
    std::vector<Face> grid_faces;
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) grid_pts.emplace_back(x, y, 0.0);
    for (std::uint32_t y = 0; y < 4; ++y)
        for (std::uint32_t x = 0; x < 4; ++x) {
            const std::uint32_t a = y * 5 + x;
            grid_faces.push_back({a, a + 1, a + 6});
            grid_faces.push_back({a, a + 6, a + 5});
        }
    expect_zero("normal", loss_normal(TriMesh(grid_pts, grid_faces)));
    // A closed polyhedron whose vertices are all neighbour means: the octahedron.
    const TriMesh octa({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}},
                       {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}});
    expect_zero("laplacian", loss_laplacian(octa.with_vertices(std::vector<Vec3>(6, Vec3(0.3, -0.2, 0.7)))));
    expect_zero("smooth", loss_smooth(grid_pts, Eigen::MatrixXd::Constant(25, 3, 0.4), 2.0));
    expect_zero("roughness", loss_roughness(std::vector<double>(10, 0.5)));
    expect_zero("specular", loss_specular(std::vector<double>(10, 0.5)));
    expect_zero("light", loss_light({Rgb(0.3, 0.3, 0.3), Rgb(0.9, 0.9, 0.9)}));

    LossTerms terms;
    terms.mask = 0.5;
    const double total = total_objective(terms, LossWeights{}).total;

    Outcome o;
    o.pass = worst_ulp <= 4 && nonzero.empty() && total == 1.0;
    std::string bad;
    for (const auto& n : nonzero) bad += " " + n;
    o.detail = "shade max " + std::to_string(worst_ulp) + " ulp, nonzero minima:" + (bad.empty() ? " none" : bad) +
               ", mask-only objective " + fmt(total, 17);
    return o;
}

// Per-pixel brute force: every face tested at every pixel centre, nearest
// depth kept, exact ties to the lower face id.
GBuffer brute_force_gbuffer(const std::vector<Face>& faces, const std::vector<Vec3>& verts, const Camera& cam, int w, int h) {
    GBuffer g(w, h);
    const auto p = project(cam, verts, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector2d c(x + 0.5, y + 0.5);
            for (std::size_t f = 0; f < faces.size(); ++f) {
                const auto& a = p[faces[f][0]];
                const auto& b = p[faces[f][1]];
                const auto& d = p[faces[f][2]];
                if (!a.in_front || !b.in_front || !d.in_front) continue;
                const Eigen::Vector2d pa(a.x, a.y), pb(b.x, b.y), pd(d.x, d.y);
                auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) { return u.x() * v.y() - u.y() * v.x(); };
                const double area = cross(pb - pa, pd - pa);
                if (!(area < 0.0)) continue;  // counter-clockwise seen from the camera (y down)
                const double w0 = cross(pd - pb, c - pb) / area;
                const double w1 = cross(pa - pd, c - pd) / area;
                const double w2 = cross(pb - pa, c - pa) / area;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const double inv = w0 / a.depth + w1 / b.depth + w2 / d.depth;
                const double depth = 1.0 / inv;
                const std::size_t i = g.index(x, y);
                if (depth < g.depth[i]) {
                    g.depth[i] = depth;
                    g.face[i] = static_cast<std::uint32_t>(f);
                }
            }
        }
    return g;
}

Outcome criterion_raster_oracle() {
    const TriMesh sphere = make_icosphere(3);
    const Camera cam = Camera::perspective(70.0, 32.3, 31.7, Vec3(0.1, -0.2, 0.05), Vec3(0.02, -0.03, 3.1));
    RasterOptions opt;
    const GBuffer g1 = rasterize(sphere.faces(), sphere.vertices(), cam, 64, 64, opt);
    opt.threads = 8;
    opt.tile = 8;
    const GBuffer g8 = rasterize(sphere.faces(), sphere.vertices(), cam, 64, 64, opt);
    const GBuffer oracle = brute_force_gbuffer(sphere.faces(), sphere.vertices(), cam, 64, 64);

    std::size_t id_mismatch = 0;
    double depth_diff = 0.0;
    for (std::size_t i = 0; i < g1.face.size(); ++i) {
        if (g1.face[i] != oracle.face[i]) ++id_mismatch;
        else if (g1.covered(i)) depth_diff = std::max(depth_diff, std::abs(g1.depth[i] - oracle.depth[i]));
    }
    bool bitwise = g1.face == g8.face && g1.depth.size() == g8.depth.size();
    for (std::size_t i = 0; bitwise && i < g1.face.size(); ++i)
        bitwise = std::bit_cast<std::uint64_t>(g1.depth[i]) == std::bit_cast<std::uint64_t>(g8.depth[i]) &&
                  std::memcmp(g1.bary[i].data(), g8.bary[i].data(), sizeof(g1.bary[i])) == 0;

    Outcome o;
    o.pass = id_mismatch == 0 && depth_diff <= 1e-12 && bitwise && g1.covered_count() > 0;
    o.detail = std::to_string(g1.covered_count()) + " covered pixels, " + std::to_string(id_mismatch) +
               " id mismatches, depth diff " + fmt(depth_diff, 3) + ", 1 vs 8 threads " +
               (bitwise ? "bitwise identical" : "DIFFER");
    return o;
}

Outcome criterion_remesh() {
    DeformModel model = make_toy_head();
    model.vertex_fields["constant"] = RowMatrix::Constant(static_cast<Eigen::Index>(model.vertex_count()), 2, 0.37);
    const TriMesh mesh = model.canonical_mesh();
    const double L = mean_edge_length(mesh);
    const auto result = remesh(mesh, L, {5, 0.5});
    const double band = edge_band_fraction(result.mesh, L);
    const long chi_in = euler_characteristic(mesh), chi_out = euler_characteristic(result.mesh);

    bool valid = true;
    std::string why;
    DeformModel out;
    try {
        out = reproject_tables(model, result);
        out.validate();
    } catch (const std::exception& e) {
        valid = false;
        why = e.what();
    }
    bool constant_exact = valid;
    if (valid)
        for (auto v : out.vertex_fields.at("constant").reshaped())
            if (v != 0.37) constant_exact = false;
    double row_sum = 0.0;
    if (valid)
        for (Eigen::Index r = 0; r < out.skin_weights.rows(); ++r)
            row_sum = std::max(row_sum, std::abs(out.skin_weights.row(r).sum() - 1.0));

    Outcome o;
    o.pass = chi_in == 2 && chi_out == chi_in && band >= 0.95 && valid && constant_exact && row_sum <= 1e-12;
    o.detail = "L=" + fmt(L, 4) + ", chi " + std::to_string(chi_in) + " -> " + std::to_string(chi_out) + ", " +
               std::to_string(result.mesh.vertex_count()) + " vertices, " + fmt(band * 100, 4) + "% edges in band, " +
               (valid ? "model valid" : "invalid model: " + why) + ", constant field " +
               (constant_exact ? "exact" : "NOT exact");
    return o;
}

Outcome criterion_psnr() {
    ImageF a(16, 16, 3, 0.5f), b(16, 16, 3, 0.5625f);
    ImageU8 mask(16, 16, 1, 1);
    const double p = psnr(a, b, mask);
    const double same = psnr(a, a, mask);
    return {std::abs(p - 24.0824) <= 1e-4 && same == kPsnrCap, "uniform 0.0625 error " + fmt(p, 8) + " dB, identical " + fmt(same)};
}

Outcome criterion_determinism() {
    const fs::path root = fresh("determinism");
    fs::create_directories(root);
    std::vector<std::string> failures;
    // Every command runs twice, into run_a and run_b, with identical flags.
    const std::string prep = (root / "base").string();
    must_run("synth --out " + prep + " --frames 8 --seed 3 --size 64x64 --noise-deg 1");
    const std::string model = prep + "/model.fwb", track = prep + "/track_noisy.fwb";

    struct Cmd {
        std::string name, args, out;  // args contain @OUT@, replaced per run
    };
    const std::vector<Cmd> cmds = {
        {"synth", "synth --out @OUT@ --frames 8 --seed 3 --size 64x64 --noise-deg 1", "synth"},
        {"pose", "pose --model " + model + " --track " + track + " --frame 3 --out @OUT@", "posed.fwb"},
        {"render-shaded", "render --model " + model + " --track " + track + " --mode shaded --light " + prep +
                              "/light.fwb --size 48x40 --out @OUT@", "shaded"},
        {"render-semantic", "render --model " + model + " --track " + track + " --mode semantic --size 48x40 --out @OUT@", "semantic"},
        {"render-normals", "render --model " + model + " --track " + track + " --mode normals --size 48x40 --out @OUT@", "normals"},
        {"render-depth", "render --model " + model + " --track " + track + " --mode depth --size 48x40 --out @OUT@", "depth"},
        {"eval-iou", "--threads 4 eval-iou --model " + model + " --track " + track + " --frames " + prep + "/frames --masks " +
                         prep + "/masks --report @OUT@", "iou.json"},
        {"eval-warp", "--threads 4 eval-warp --model " + model + " --track " + track + " --frames " + prep +
                          "/frames --masks " + prep + "/masks --interval-ms 100 --report @OUT@", "warp.json"},
        {"pretrain-deformer", "pretrain-deformer --model " + model + " --L 4 --iters 30 --seed 9 --out @OUT@", "deformer.fwb"},
        {"remesh", "remesh --model " + model + " --iterations 2 --provenance @OUT@.prov --out @OUT@", "remeshed.fwb"},
        {"fit", "fit --model " + model + " --target " + (root / "run_a" / "posed.fwb").string() + " --out @OUT@", "psi.txt"},
    };
    for (const char* run_dir : {"run_a", "run_b"}) fs::create_directories(root / run_dir);
    for (const auto& c : cmds) {
        std::vector<fs::path> outs;
        for (const char* run_dir : {"run_a", "run_b"}) {
            const fs::path out = root / run_dir / c.out;
            std::string args = c.args;
            for (auto pos = args.find("@OUT@"); pos != std::string::npos; pos = args.find("@OUT@"))
                args.replace(pos, 5, out.string());
            if (run(args) != 0) failures.push_back(c.name + " failed");
            outs.push_back(out);
        }
        if (!fs::exists(outs[0])) {
            failures.push_back(c.name + " wrote nothing");
            continue;
        }
        if (const auto diff = compare_trees(outs[0], outs[1]); !diff.empty()) failures.push_back(c.name + ": " + diff);
        // Side outputs written next to the main artifact.
        for (const char* suffix : {".loss.csv", ".prov"}) {
            const fs::path a = outs[0].string() + suffix, b = outs[1].string() + suffix;
            if (fs::exists(a) && slurp(a) != slurp(b)) failures.push_back(c.name + ": " + a.filename().string() + " differs");
        }
    }
    Outcome o;
    o.pass = failures.empty();
    o.detail = std::to_string(cmds.size()) + " commands re-run";
    for (const auto& f : failures) o.detail += "; " + f;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: %s <facecap-cli> <scratch-dir>\n", argv[0]);
        return 2;
    }
    g_cli = fs::absolute(argv[1]);
    g_scratch = fs::absolute(argv[2]);
    fs::create_directories(g_scratch);

    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"self-consistency", criterion_self_consistency},
        {"perturbation monotonicity", criterion_noise_monotonicity},
        {"deformation correctness", criterion_deformation},
        {"MLP gradients", criterion_gradients},
        {"Adam oracle", criterion_adam},
        {"deformer pretraining", criterion_pretraining},
        {"hash schedule and encoding", criterion_hash_schedule},
        {"shading and losses", criterion_shading_losses},
        {"rasterizer oracle", criterion_raster_oracle},
        {"remeshing", criterion_remesh},
        {"PSNR arithmetic", criterion_psnr},
        {"determinism", criterion_determinism},
    };
    int failed = 0, n = 0;
    for (const auto& [name, fn] : criteria) {
        ++n;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
