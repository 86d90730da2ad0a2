#include "facecap/appearance.hpp"

#include "facecap/config.hpp"
#include "facecap/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace facecap {

MaterialSample make_material(const Rgb& albedo, double roughness, double specular) {
    if (!(albedo >= 0.0).all() || !albedo.allFinite()) throw ValidationError("albedo must be finite and nonnegative");
    if (!(specular >= 0.0) || !std::isfinite(specular))
        throw ValidationError("specular intensity must be finite and nonnegative");
    if (!std::isfinite(roughness)) throw ValidationError("roughness must be finite");
    return {albedo, std::clamp(roughness, kMinRoughness, 1.0), specular};
}

std::vector<MaterialSample> model_materials(const DeformModel& model) {
    auto field = [&](const char* name, Eigen::Index width) -> const RowMatrix& {
        const auto it = model.vertex_fields.find(name);
        if (it == model.vertex_fields.end()) throw ValidationError(std::string("model has no '") + name + "' field");
        if (it->second.rows() != static_cast<Eigen::Index>(model.vertex_count()) || it->second.cols() != width)
            throw ValidationError(std::string("model field '") + name + "' has the wrong shape");
        return it->second;
    };
    const RowMatrix& albedo = field("albedo", 3);
    const RowMatrix& rough = field("roughness", 1);
    const RowMatrix& spec = field("specular", 1);
    std::vector<MaterialSample> out;
    out.reserve(model.vertex_count());
    for (Eigen::Index v = 0; v < albedo.rows(); ++v)
        out.push_back(make_material(Rgb(albedo(v, 0), albedo(v, 1), albedo(v, 2)), rough(v, 0), spec(v, 0)));
    return out;
}

Vec3 reflect(const Vec3& view, const Vec3& normal) {
    if (std::abs(view.norm() - 1.0) > 1e-6 || std::abs(normal.norm() - 1.0) > 1e-6)
        throw ValidationError("reflect needs unit view and normal vectors");
    return 2.0 * normal.dot(view) * normal - view;
}

std::array<double, 25> sh_basis(const Vec3& d) {
    const double x = d.x(), y = d.y(), z = d.z();
    const double x2 = x * x, y2 = y * y, z2 = z * z;
    return {
        0.28209479177387814,
        -0.48860251190291987 * y,
        0.48860251190291987 * z,
        -0.48860251190291987 * x,
        1.0925484305920792 * x * y,
        -1.0925484305920792 * y * z,
        0.94617469575755997 * z2 - 0.31539156525251999,
        -1.0925484305920792 * x * z,
        0.54627421529603959 * (x2 - y2),
        0.59004358992664352 * y * (y2 - 3.0 * x2),
        2.8906114426405538 * x * y * z,
        0.45704579946446572 * y * (1.0 - 5.0 * z2),
        0.3731763325901154 * z * (5.0 * z2 - 3.0),
        0.45704579946446572 * x * (1.0 - 5.0 * z2),
        1.4453057213202769 * z * (x2 - y2),
        0.59004358992664352 * x * (3.0 * y2 - x2),
        2.5033429417967046 * x * y * (x2 - y2),
        1.7701307697799304 * y * z * (y2 - 3.0 * x2),
        0.94617469575756008 * x * y * (7.0 * z2 - 1.0),
        0.66904654355728921 * y * z * (3.0 - 7.0 * z2),
        0.10578554691520431 * (35.0 * z2 * z2 - 30.0 * z2 + 3.0),
        0.66904654355728921 * x * z * (3.0 - 7.0 * z2),
        0.47308734787878004 * (x2 - y2) * (7.0 * z2 - 1.0),
        1.7701307697799304 * x * z * (3.0 * y2 - x2),
        0.62583573544917614 * (x2 * x2 + y2 * y2) - 3.7550144126950569 * x2 * y2,
    };
}

Eigen::VectorXd light_features(const Vec3& dir, double roughness) {
    const auto sh = sh_basis(dir);
    Eigen::VectorXd f(static_cast<Eigen::Index>(kLightInputWidth));
    for (std::size_t i = 0; i < sh.size(); ++i) f[static_cast<Eigen::Index>(i)] = sh[i];
    f[25] = roughness;
    return f;
}

MlpConfig LightEvaluator::network_config() {
    MlpConfig cfg;
    cfg.widths = {kLightInputWidth, 64, 64, 64, 3};
    cfg.hidden = Activation::ReLU;
    cfg.output = Activation::Sigmoid;
    return cfg;
}

LightEvaluator::LightEvaluator(std::size_t video_count) {
    for (std::size_t i = 0; i < video_count; ++i) {
        diffuse_.emplace_back(network_config());
        specular_.emplace_back(network_config());
    }
}

LightEvaluator LightEvaluator::random(std::size_t video_count, std::uint64_t seed) {
    LightEvaluator out;
    for (std::size_t i = 0; i < video_count; ++i) {
        out.diffuse_.push_back(Mlp::kaiming(network_config(), seed + 2 * i));
        out.specular_.push_back(Mlp::kaiming(network_config(), seed + 2 * i + 1));
    }
    return out;
}

void LightEvaluator::check(std::size_t video) const {
    if (video >= diffuse_.size())
        throw ValidationError("video index " + std::to_string(video) + " out of range (" +
                              std::to_string(diffuse_.size()) + " videos)");
}

Mlp& LightEvaluator::diffuse_net(std::size_t video) {
    check(video);
    return diffuse_[video];
}
Mlp& LightEvaluator::specular_net(std::size_t video) {
    check(video);
    return specular_[video];
}
const Mlp& LightEvaluator::diffuse_net(std::size_t video) const {
    check(video);
    return diffuse_[video];
}
const Mlp& LightEvaluator::specular_net(std::size_t video) const {
    check(video);
    return specular_[video];
}

Rgb LightEvaluator::diffuse(std::size_t video, const Vec3& normal) const {
    check(video);
    return diffuse_[video].forward(light_features(normal, 1.0)).array();
}

Rgb LightEvaluator::specular(std::size_t video, const Vec3& reflected, double roughness) const {
    check(video);
    return specular_[video].forward(light_features(reflected, roughness)).array();
}

void LightEvaluator::save(const std::filesystem::path& path) const {
    fwb::Container c;
    c.put_text("light_meta", nlohmann::json{{"videos", video_count()}, {"encoding", "sh4+roughness"}}.dump());
    for (std::size_t i = 0; i < video_count(); ++i) {
        put_mlp(c, diffuse_[i], "light" + std::to_string(i) + "_d_");
        put_mlp(c, specular_[i], "light" + std::to_string(i) + "_s_");
    }
    c.write(path);
}

LightEvaluator LightEvaluator::load(const std::filesystem::path& path) {
    const auto c = fwb::Container::read(path);
    std::size_t videos = 0;
    try {
        videos = nlohmann::json::parse(c.get_text("light_meta")).at("videos").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad light_meta chunk in '" + path.string() + "': " + e.what());
    }
    LightEvaluator out;
    for (std::size_t i = 0; i < videos; ++i) {
        out.diffuse_.push_back(get_mlp(c, "light" + std::to_string(i) + "_d_"));
        out.specular_.push_back(get_mlp(c, "light" + std::to_string(i) + "_s_"));
        for (const Mlp* m : {&out.diffuse_.back(), &out.specular_.back()})
            if (m->input_width() != kLightInputWidth || m->output_width() != 3)
                throw ParseError("light network " + std::to_string(i) + " has the wrong shape");
    }
    return out;
}

Rgb shade(const MaterialSample& m, const Rgb& l_d, const Rgb& l_s) {
    return m.albedo * l_d + m.specular * l_s;
}

// ---------------------------------------------------------------------------

double loss_rgb(const ImageF& rendered, const ImageF& target, const ImageU8& mask, double epsilon) {
    if (!rendered.same_shape(target) || rendered.channels != target.channels)
        throw ValidationError("loss_rgb: image shapes differ");
    if (!mask.same_shape(rendered) || mask.channels != 1) throw ValidationError("loss_rgb: mask shape differs");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
        if (!mask.data[p]) continue;
        ++count;
        for (int c = 0; c < rendered.channels; ++c) {
            const std::size_t i = p * static_cast<std::size_t>(rendered.channels) + static_cast<std::size_t>(c);
            const double d = std::log(double(rendered.data[i]) + epsilon) - std::log(double(target.data[i]) + epsilon);
            sum += d * d;
        }
    }
    if (count == 0) throw ValidationError("loss_rgb: empty mask");
    return sum / static_cast<double>(count);
}

double loss_mask(const ImageU8& a, const ImageU8& b) {
    if (!a.same_shape(b) || a.channels != 1 || b.channels != 1) throw ValidationError("loss_mask: mask shapes differ");
    if (a.pixel_count() == 0) throw ValidationError("loss_mask: empty image");
    std::size_t differ = 0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) differ += (a.data[p] != 0) != (b.data[p] != 0);
    return static_cast<double>(differ) / static_cast<double>(a.pixel_count());
}

double loss_flame_reg(const RowMatrix& predicted, const RowMatrix& reference) {
    if (predicted.rows() != reference.rows() || predicted.cols() != reference.cols())
        throw ValidationError("loss_flame_reg: basis shapes differ");
    if (predicted.size() == 0) throw ValidationError("loss_flame_reg: empty basis");
    return (predicted - reference).squaredNorm() / static_cast<double>(predicted.size());
}

double loss_laplacian(const TriMesh& mesh) {
    if (mesh.vertex_count() == 0) throw ValidationError("loss_laplacian: empty mesh");
    Eigen::MatrixXd pos(static_cast<Eigen::Index>(mesh.vertex_count()), 3);
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) pos.row(static_cast<Eigen::Index>(v)) = mesh.vertices()[v];
    return uniform_laplacian(mesh, pos).rowwise().squaredNorm().mean();
}

double loss_normal(const TriMesh& mesh) {
    const auto pairs = face_adjacency(mesh);
    if (pairs.empty()) throw ValidationError("loss_normal: mesh has no adjacent faces");
    const auto n = face_normals(mesh).normals;
    double sum = 0.0;
    for (const auto& [f, g] : pairs) sum += 1.0 - n[f].dot(n[g]);
    return sum / static_cast<double>(pairs.size());
}

double loss_smooth(const std::vector<Vec3>& points, const Eigen::MatrixXd& values, double radius) {
    if (static_cast<std::size_t>(values.rows()) != points.size())
        throw ValidationError("loss_smooth: one value row per point required");
    if (!(radius > 0.0)) throw ValidationError("loss_smooth: radius must be positive");
    // Sweep along x; only points within `radius` in x can pair up.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a].x() < points[b].x(); });
    const double r2 = radius * radius;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < order.size(); ++a) {
        const auto i = order[a];
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            const auto j = order[b];
            if (points[j].x() - points[i].x() > radius) break;
            if ((points[j] - points[i]).squaredNorm() > r2) continue;
            sum += (values.row(static_cast<Eigen::Index>(i)) - values.row(static_cast<Eigen::Index>(j))).squaredNorm();
            ++pairs;
        }
    }
    if (pairs == 0) throw ValidationError("loss_smooth: no point pairs within the radius");
    return sum / static_cast<double>(pairs);
}

double loss_prior(const std::vector<double>& samples, double centre) {
    if (samples.empty()) throw ValidationError("prior loss needs at least one sample");
    double sum = 0.0;
    for (double s : samples) sum += (s - centre) * (s - centre);
    return sum / static_cast<double>(samples.size());
}

double loss_roughness(const std::vector<double>& roughness, double prior) { return loss_prior(roughness, prior); }
double loss_specular(const std::vector<double>& specular, double prior) { return loss_prior(specular, prior); }

double loss_light(const std::vector<Rgb>& l_d) {
    if (l_d.empty()) throw ValidationError("loss_light needs at least one sample");
    double sum = 0.0;
    // sum_c (c - mean)^2 written through pairwise differences: exactly zero for grey.
    for (const Rgb& c : l_d) {
        const double a = c[0] - c[1], b = c[1] - c[2], d = c[2] - c[0];
        sum += (a * a + b * b + d * d) / 3.0;
    }
    return sum / (3.0 * static_cast<double>(l_d.size()));
}

Objective total_objective(const LossTerms& t, const LossWeights& w) {
    if (t.vgg != 0.0) throw ValidationError("perceptual (vgg) loss is not supported; its term must be 0");
    const std::pair<const char*, std::pair<double, double>> items[] = {
        {"rgb", {t.rgb, w.rgb}},
        {"vgg", {t.vgg, w.vgg}},
        {"mask", {t.mask, w.mask}},
        {"flame", {t.flame, w.flame}},
        {"laplacian", {t.laplacian, w.laplacian}},
        {"normal", {t.normal, w.normal}},
        {"smooth", {t.smooth, w.smooth}},
        {"roughness", {t.roughness, w.roughness}},
        {"specular", {t.specular, w.specular}},
        {"light", {t.light, w.light}},
    };
    Objective out;
    for (const auto& [name, tw] : items) {
        const auto [value, weight] = tw;
        if (!(value >= 0.0)) throw ValidationError(std::string("loss term '") + name + "' is negative or NaN");
        if (!(weight >= 0.0)) throw ValidationError(std::string("weight for '") + name + "' is negative or NaN");
        out.weighted[name] = weight * value;
        out.total += weight * value;
    }
    return out;
}

void apply_config(const std::map<std::string, std::string>& cfg, LossWeights& w, LossSettings& s) {
    w.rgb = config_number(cfg, "lambda_rgb", w.rgb);
    w.vgg = config_number(cfg, "lambda_vgg", w.vgg);
    w.mask = config_number(cfg, "lambda_mask", w.mask);
    w.flame = config_number(cfg, "lambda_flame", w.flame);
    w.laplacian = config_number(cfg, "lambda_laplacian", w.laplacian);
    w.normal = config_number(cfg, "lambda_normal", w.normal);
    w.smooth = config_number(cfg, "lambda_smooth", w.smooth);
    w.roughness = config_number(cfg, "lambda_r", w.roughness);
    w.specular = config_number(cfg, "lambda_spec", w.specular);
    w.light = config_number(cfg, "lambda_light", w.light);
    s.rgb_epsilon = config_number(cfg, "rgb_epsilon", s.rgb_epsilon);
    s.roughness_prior = config_number(cfg, "roughness_prior", s.roughness_prior);
    s.specular_prior = config_number(cfg, "specular_prior", s.specular_prior);
    s.smooth_radius = config_number(cfg, "smooth_radius", s.smooth_radius);
}

} // namespace facecap
