#pragma once

// Split shading C = albedo * l_d + k * l_s, the per-video light networks that
// produce l_d and l_s, and the loss terms of the capture objective.

#include "facecap/deform.hpp"
#include "facecap/image.hpp"
#include "facecap/mesh.hpp"
#include "facecap/mlp.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace facecap {

using Rgb = Eigen::Array3d;

inline constexpr double kMinRoughness = 0.04;

struct MaterialSample {
    Rgb albedo = Rgb::Zero();
    double roughness = 1.0;
    double specular = 0.0;
};

/// Validates nonnegativity and clamps roughness to [kMinRoughness, 1].
MaterialSample make_material(const Rgb& albedo, double roughness, double specular);

/// Per-vertex materials from the model's `albedo` (n x 3), `roughness` and
/// `specular` (n x 1) fields. Throws ValidationError when one is missing.
std::vector<MaterialSample> model_materials(const DeformModel& model);

/// omega = 2 (n.v) n - v. Throws ValidationError unless both inputs are unit within 1e-6.
Vec3 reflect(const Vec3& view, const Vec3& normal);

/// The 25 real spherical harmonics of degree <= 4 at a unit direction.
std::array<double, 25> sh_basis(const Vec3& dir);

inline constexpr std::size_t kLightInputWidth = 26;  // 25 SH values, then roughness

Eigen::VectorXd light_features(const Vec3& dir, double roughness);

/// One diffuse and one specular network per video: 3 hidden layers of 64
/// ReLU units, sigmoid RGB output.
class LightEvaluator {
public:
    LightEvaluator() = default;
    /// Zero-weight networks (every output 0.5).
    explicit LightEvaluator(std::size_t video_count);
    static LightEvaluator random(std::size_t video_count, std::uint64_t seed);
    static MlpConfig network_config();

    std::size_t video_count() const { return diffuse_.size(); }

    Mlp& diffuse_net(std::size_t video);
    Mlp& specular_net(std::size_t video);
    const Mlp& diffuse_net(std::size_t video) const;
    const Mlp& specular_net(std::size_t video) const;

    /// l_d = L_i(n, 1).
    Rgb diffuse(std::size_t video, const Vec3& normal) const;
    /// l_s = L_i(omega, r).
    Rgb specular(std::size_t video, const Vec3& reflected, double roughness) const;

    void save(const std::filesystem::path& path) const;
    static LightEvaluator load(const std::filesystem::path& path);

private:
    void check(std::size_t video) const;

    std::vector<Mlp> diffuse_;
    std::vector<Mlp> specular_;
};

Rgb shade(const MaterialSample& material, const Rgb& l_d, const Rgb& l_s);

// ---------------------------------------------------------------------------
// Loss terms. Every evaluator is nonnegative and exactly zero at its minimum.

struct LossSettings {
    double rgb_epsilon = 1e-3;
    double roughness_prior = 0.5;
    double specular_prior = 0.5;
    double smooth_radius = 0.01;
};

/// Mean over masked pixels of the squared norm of ln(a + eps) - ln(b + eps).
double loss_rgb(const ImageF& rendered, const ImageF& target, const ImageU8& mask, double epsilon = 1e-3);
/// Mean squared difference over all pixels; nonzero mask values count as 1.
double loss_mask(const ImageU8& rasterized, const ImageU8& target);
/// Mean squared elementwise difference of two bases of equal shape.
double loss_flame_reg(const RowMatrix& predicted, const RowMatrix& reference);
/// Mean squared norm of the uniform Laplacian of the vertex positions.
double loss_laplacian(const TriMesh& mesh);
/// Mean over adjacent face pairs of 1 - cos(angle between face normals).
double loss_normal(const TriMesh& mesh);
/// Mean squared difference of field rows over point pairs closer than `radius`.
double loss_smooth(const std::vector<Vec3>& points, const Eigen::MatrixXd& values, double radius = 0.01);
/// Mean squared deviation of samples from a prior centre.
double loss_prior(const std::vector<double>& samples, double centre);
double loss_roughness(const std::vector<double>& roughness, double prior = 0.5);
double loss_specular(const std::vector<double>& specular, double prior = 0.5);
/// Mean squared deviation of each l_d channel from that sample's channel mean.
double loss_light(const std::vector<Rgb>& diffuse_light);

struct LossWeights {
    double rgb = 1.0;
    double vgg = 0.1;
    double mask = 2.0;
    double flame = 20.0;
    double laplacian = 100.0;
    double normal = 0.1;
    double smooth = 0.01;
    double roughness = 0.01;
    double specular = 0.01;
    double light = 0.01;
};

struct LossTerms {
    double rgb = 0.0;
    double vgg = 0.0;  // perceptual term is not provided; must stay 0
    double mask = 0.0;
    double flame = 0.0;
    double laplacian = 0.0;
    double normal = 0.0;
    double smooth = 0.0;
    double roughness = 0.0;
    double specular = 0.0;
    double light = 0.0;
};

struct Objective {
    double total = 0.0;
    std::map<std::string, double> weighted;  // lambda_i * L_i by term name
};

/// Sum of weighted terms. Throws ValidationError on a negative term, a
/// negative weight, or a nonzero perceptual term.
Objective total_objective(const LossTerms& terms, const LossWeights& weights);

/// Applies `lambda_<term>` and prior keys (`rgb_epsilon`, `roughness_prior`,
/// `specular_prior`, `smooth_radius`) from a key/value map; unknown keys are ignored.
void apply_config(const std::map<std::string, std::string>& config, LossWeights& weights, LossSettings& settings);

} // namespace facecap
