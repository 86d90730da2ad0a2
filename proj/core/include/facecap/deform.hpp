#pragma once

// Posed geometry: canonical vertices plus pose-corrective and expression
// offsets, skinned by linear blend skinning over a joint hierarchy.
//
//   posed = LBS(canonical + B_P(theta) + B_E(psi), J(canonical), theta, W)

#include "facecap/mesh.hpp"
#include "facecap/semantic.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace facecap {

using Mat3 = Eigen::Matrix3d;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PoseParams {
    std::vector<Vec3> joint_rotations;  // axis-angle, radians
    Vec3 translation = Vec3::Zero();

    static PoseParams rest(std::size_t joint_count);
    bool is_rest() const;
};

struct ExprParams {
    Eigen::VectorXd coeffs;

    static ExprParams zero(std::size_t expr_count) { return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(expr_count))}; }
};

struct DeformModel {
    std::vector<Vec3> canonical;
    std::vector<Face> faces;
    RowMatrix expr_basis;        // (3 n_V) x n_e, row 3v + axis
    RowMatrix pose_correctives;  // (3 n_V) x 9 (n_j - 1)
    RowMatrix skin_weights;      // n_V x n_j
    RowMatrix joint_regressor;   // n_j x n_V
    std::vector<std::uint32_t> parents;  // parents[0] == 0 is the root

    std::optional<SemanticAnnotation> semantics;
    std::vector<std::uint32_t> landmark_vertices;
    /// Extra per-vertex tables (albedo, roughness, ...), n_V rows each.
    std::map<std::string, RowMatrix> vertex_fields;
    /// Shape coefficients that produced `canonical`; opaque metadata.
    std::vector<double> betas;

    std::size_t vertex_count() const { return canonical.size(); }
    std::size_t expr_count() const { return static_cast<std::size_t>(expr_basis.cols()); }
    std::size_t joint_count() const { return parents.size(); }

    /// Checks table shapes, skin-weight rows and the joint hierarchy.
    void validate() const;
    TriMesh canonical_mesh() const { return TriMesh(canonical, faces); }
};

/// Rotation matrix of an axis-angle vector; zero maps to identity.
Mat3 rodrigues(const Vec3& axis_angle);

/// Concatenation of row-major vec(R(theta_j) - I) over non-root joints.
Eigen::VectorXd pose_feature(const PoseParams& theta);

std::vector<Vec3> expression_offset(const DeformModel& model, const ExprParams& psi);
std::vector<Vec3> pose_correctives(const DeformModel& model, const PoseParams& theta);
std::vector<Vec3> regress_joints(const DeformModel& model, const std::vector<Vec3>& shaped_vertices);

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

/// World transforms of every joint: parent transform composed with a
/// rotation about the joint's rest position.
std::vector<RigidTransform> joint_transforms(const std::vector<Vec3>& joints, const PoseParams& theta,
                                             const std::vector<std::uint32_t>& parents);

/// Weight-blended skinning transforms; `global translation` is added after.
std::vector<Vec3> lbs(const std::vector<Vec3>& vertices, const std::vector<Vec3>& joints, const PoseParams& theta,
                      const RowMatrix& weights, const std::vector<std::uint32_t>& parents);

std::vector<Vec3> pose_mesh(const DeformModel& model, const PoseParams& theta, const ExprParams& psi);

struct ExpressionFit {
    ExprParams psi;
    double residual_norm = 0.0;  // || posed(psi) - target ||_2 over all coordinates
};

/// Least-squares expression coefficients at a fixed pose. Posing is affine
/// in psi for fixed theta, so this is a linear problem for any theta.
/// Throws NumericalError when the effective basis is rank deficient.
ExpressionFit fit_expression(const DeformModel& model, const std::vector<Vec3>& target, const PoseParams& theta);
ExpressionFit fit_expression(const DeformModel& model, const std::vector<Vec3>& target);

} // namespace facecap
