#include "facecap/deform.hpp"

#include "facecap/errors.hpp"

#include <Eigen/QR>

#include <algorithm>

#include <cmath>
#include <string>

namespace facecap {

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_shape(const RowMatrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols)
        throw ValidationError(std::string("model table '") + name + "' is " + dims(m.rows(), m.cols()) +
                              ", expected " + dims(rows, cols));
}

// Parents-before-children order; throws on cycles or stray roots.
std::vector<std::uint32_t> joint_order(const std::vector<std::uint32_t>& parents) {
    const std::size_t n = parents.size();
    if (n == 0) throw ValidationError("joint hierarchy is empty");
    if (parents[0] != 0) throw ValidationError("joint 0 must be the root (parents[0] == 0)");
    std::vector<int> depth(n, -1);
    depth[0] = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (parents[j] >= n) throw ValidationError("joint " + std::to_string(j) + " has out-of-range parent");
        if (parents[j] == j) throw ValidationError("joint " + std::to_string(j) + " is a second root");
    }
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::size_t> chain;
        std::size_t cur = j;
        while (depth[cur] < 0) {
            chain.push_back(cur);
            if (chain.size() > n) throw ValidationError("joint hierarchy has a cycle through joint " + std::to_string(j));
            cur = parents[cur];
        }
        int d = depth[cur];
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) depth[*it] = ++d;
    }
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t j = 0; j < n; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return depth[a] < depth[b]; });
    return order;
}

} // namespace

PoseParams PoseParams::rest(std::size_t joint_count) {
    PoseParams p;
    p.joint_rotations.assign(joint_count, Vec3::Zero());
    return p;
}

bool PoseParams::is_rest() const {
    for (const auto& r : joint_rotations)
        if (r.x() != 0.0 || r.y() != 0.0 || r.z() != 0.0) return false;
    return true;
}

void DeformModel::validate() const {
    const auto nv = static_cast<Eigen::Index>(canonical.size());
    const auto nj = static_cast<Eigen::Index>(parents.size());
    if (nv == 0) throw ValidationError("model has no vertices");
    joint_order(parents);
    (void)TriMesh(canonical, faces);
    if (expr_basis.rows() != 3 * nv)
        throw ValidationError("model table 'expr_basis' has " + std::to_string(expr_basis.rows()) + " rows, expected " +
                              std::to_string(3 * nv));
    require_shape(pose_correctives, 3 * nv, 9 * (nj - 1), "pose_correctives");
    require_shape(skin_weights, nv, nj, "skin_weights");
    require_shape(joint_regressor, nj, nv, "joint_regressor");
    for (Eigen::Index v = 0; v < nv; ++v) {
        if ((skin_weights.row(v).array() < 0.0).any())
            throw ValidationError("vertex " + std::to_string(v) + " has a negative skin weight");
        const double s = skin_weights.row(v).sum();
        if (std::abs(s - 1.0) > 1e-9)
            throw ValidationError("skin weights of vertex " + std::to_string(v) + " sum to " + std::to_string(s));
    }
    if (!expr_basis.allFinite() || !pose_correctives.allFinite() || !joint_regressor.allFinite())
        throw ValidationError("model tables contain non-finite values");
    if (semantics) semantics->validate(canonical.size());
    for (auto l : landmark_vertices)
        if (l >= canonical.size()) throw ValidationError("landmark vertex " + std::to_string(l) + " out of range");
    for (const auto& [name, table] : vertex_fields)
        if (table.rows() != nv) throw ValidationError("vertex field '" + name + "' has wrong row count");
}

Mat3 rodrigues(const Vec3& r) {
    const double t2 = r.squaredNorm();
    const double t = std::sqrt(t2);
    double a, b;  // R = I + a K + b K^2
    if (t < 1e-6) {
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
    } else {
        const double s = std::sin(0.5 * t);
        a = std::sin(t) / t;
        b = 2.0 * s * s / t2;
    }
    Mat3 K;
    K << 0.0, -r.z(), r.y(), r.z(), 0.0, -r.x(), -r.y(), r.x(), 0.0;
    return Mat3::Identity() + a * K + b * (K * K);
}

Eigen::VectorXd pose_feature(const PoseParams& theta) {
    const auto nj = theta.joint_rotations.size();
    Eigen::VectorXd f(static_cast<Eigen::Index>(9 * (nj > 0 ? nj - 1 : 0)));
    for (std::size_t j = 1; j < nj; ++j) {
        const Mat3 d = rodrigues(theta.joint_rotations[j]) - Mat3::Identity();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f[static_cast<Eigen::Index>(9 * (j - 1) + 3 * r + c)] = d(r, c);
    }
    return f;
}

std::vector<Vec3> expression_offset(const DeformModel& model, const ExprParams& psi) {
    if (static_cast<std::size_t>(psi.coeffs.size()) != model.expr_count())
        throw ValidationError("expression has " + std::to_string(psi.coeffs.size()) + " coefficients, model expects " +
                              std::to_string(model.expr_count()));
    const Eigen::VectorXd flat = model.expr_basis * psi.coeffs;
    std::vector<Vec3> out(model.vertex_count());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = flat.segment<3>(static_cast<Eigen::Index>(3 * v));
    return out;
}

std::vector<Vec3> pose_correctives(const DeformModel& model, const PoseParams& theta) {
    if (theta.joint_rotations.size() != model.joint_count())
        throw ValidationError("pose has " + std::to_string(theta.joint_rotations.size()) + " joints, model has " +
                              std::to_string(model.joint_count()));
    std::vector<Vec3> out(model.vertex_count(), Vec3::Zero());
    if (theta.is_rest() || model.pose_correctives.cols() == 0) return out;
    const Eigen::VectorXd flat = model.pose_correctives * pose_feature(theta);
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = flat.segment<3>(static_cast<Eigen::Index>(3 * v));
    return out;
}

std::vector<Vec3> regress_joints(const DeformModel& model, const std::vector<Vec3>& shaped_vertices) {
    if (shaped_vertices.size() != model.vertex_count())
        throw ValidationError("regress_joints: vertex count mismatch");
    std::vector<Vec3> joints(model.joint_count(), Vec3::Zero());
    for (std::size_t j = 0; j < joints.size(); ++j) {
        Vec3 acc = Vec3::Zero();
        for (std::size_t v = 0; v < shaped_vertices.size(); ++v)
            acc += model.joint_regressor(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(v)) * shaped_vertices[v];
        joints[j] = acc;
    }
    return joints;
}

std::vector<RigidTransform> joint_transforms(const std::vector<Vec3>& joints, const PoseParams& theta,
                                             const std::vector<std::uint32_t>& parents) {
    if (joints.size() != parents.size() || theta.joint_rotations.size() != parents.size())
        throw ValidationError("joint_transforms: joint counts disagree");
    std::vector<RigidTransform> world(parents.size());
    for (auto j : joint_order(parents)) {
        RigidTransform local;
        local.rotation = rodrigues(theta.joint_rotations[j]);
        local.translation = joints[j] - local.rotation * joints[j];
        if (j == 0) {
            world[j] = local;
        } else {
            const RigidTransform& p = world[parents[j]];
            world[j].rotation = p.rotation * local.rotation;
            world[j].translation = p.rotation * local.translation + p.translation;
        }
    }
    return world;
}

std::vector<Vec3> lbs(const std::vector<Vec3>& vertices, const std::vector<Vec3>& joints, const PoseParams& theta,
                      const RowMatrix& weights, const std::vector<std::uint32_t>& parents) {
    if (weights.rows() != static_cast<Eigen::Index>(vertices.size()) ||
        weights.cols() != static_cast<Eigen::Index>(parents.size()))
        throw ValidationError("lbs: weight table is " + dims(weights.rows(), weights.cols()));
    std::vector<Vec3> out(vertices.size());
    if (theta.is_rest()) {
        for (std::size_t v = 0; v < vertices.size(); ++v) out[v] = vertices[v] + theta.translation;
        return out;
    }
    const auto G = joint_transforms(joints, theta, parents);
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        Mat3 R = Mat3::Zero();
        Vec3 t = Vec3::Zero();
        for (std::size_t j = 0; j < G.size(); ++j) {
            const double w = weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j));
            if (w == 0.0) continue;
            R += w * G[j].rotation;
            t += w * G[j].translation;
        }
        out[v] = R * vertices[v] + t + theta.translation;
    }
    return out;
}

namespace {

void check_dims(const DeformModel& model, const PoseParams& theta, const ExprParams& psi) {
    if (theta.joint_rotations.size() != model.joint_count())
        throw ValidationError("pose has " + std::to_string(theta.joint_rotations.size()) + " joints, model has " +
                              std::to_string(model.joint_count()));
    if (static_cast<std::size_t>(psi.coeffs.size()) != model.expr_count())
        throw ValidationError("expression has " + std::to_string(psi.coeffs.size()) + " coefficients, model expects " +
                              std::to_string(model.expr_count()));
}

} // namespace

std::vector<Vec3> pose_mesh(const DeformModel& model, const PoseParams& theta, const ExprParams& psi) {
    check_dims(model, theta, psi);
    auto shaped = model.canonical;
    const auto bp = pose_correctives(model, theta);
    const auto be = expression_offset(model, psi);
    for (std::size_t v = 0; v < shaped.size(); ++v) shaped[v] += bp[v] + be[v];
    const auto joints = regress_joints(model, model.canonical);
    return lbs(shaped, joints, theta, model.skin_weights, model.parents);
}

ExpressionFit fit_expression(const DeformModel& model, const std::vector<Vec3>& target, const PoseParams& theta) {
    if (target.size() != model.vertex_count())
        throw ValidationError("fit target has " + std::to_string(target.size()) + " vertices, model has " +
                              std::to_string(model.vertex_count()));
    const auto ne = static_cast<Eigen::Index>(model.expr_count());
    const auto nv = static_cast<Eigen::Index>(model.vertex_count());
    const auto base = pose_mesh(model, theta, ExprParams::zero(model.expr_count()));

    Eigen::MatrixXd A(3 * nv, ne);
    Eigen::VectorXd b(3 * nv);
    std::vector<Mat3> blended;
    if (!theta.is_rest()) {
        const auto G = joint_transforms(regress_joints(model, model.canonical), theta, model.parents);
        blended.assign(static_cast<std::size_t>(nv), Mat3::Zero());
        for (Eigen::Index v = 0; v < nv; ++v)
            for (std::size_t j = 0; j < G.size(); ++j)
                blended[v] += model.skin_weights(v, static_cast<Eigen::Index>(j)) * G[j].rotation;
    }
    for (Eigen::Index v = 0; v < nv; ++v) {
        const auto Ev = model.expr_basis.middleRows(3 * v, 3);
        if (blended.empty())
            A.middleRows(3 * v, 3) = Ev;
        else
            A.middleRows(3 * v, 3) = blended[static_cast<std::size_t>(v)] * Ev;
        b.segment<3>(3 * v) = target[v] - base[v];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < ne)
        throw NumericalError("expression basis is rank deficient: rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(ne));
    ExpressionFit fit;
    fit.psi.coeffs = qr.solve(b);
    fit.residual_norm = (A * fit.psi.coeffs - b).norm();
    return fit;
}

ExpressionFit fit_expression(const DeformModel& model, const std::vector<Vec3>& target) {
    return fit_expression(model, target, PoseParams::rest(model.joint_count()));
}

} // namespace facecap
