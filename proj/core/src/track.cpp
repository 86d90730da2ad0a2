#include "facecap/track.hpp"

#include "facecap/errors.hpp"
#include "facecap/fwb.hpp"

namespace facecap {

void ParamTrack::validate() const {
    const auto n = poses.size();
    if (expressions.size() != n || cameras.size() != n)
        throw ValidationError("track has " + std::to_string(n) + " poses, " + std::to_string(expressions.size()) +
                              " expressions and " + std::to_string(cameras.size()) + " cameras");
    for (std::size_t f = 0; f < n; ++f) {
        if (poses[f].joint_rotations.size() != poses[0].joint_rotations.size() ||
            expressions[f].coeffs.size() != expressions[0].coeffs.size())
            throw ValidationError("track frame " + std::to_string(f) + " has inconsistent dimensions");
        if (cameras[f].mode != cameras[0].mode) throw ValidationError("track mixes camera modes");
        cameras[f].validate();
    }
}

void ParamTrack::validate(const DeformModel& model) const {
    validate();
    if (size() == 0) return;
    if (poses[0].joint_rotations.size() != model.joint_count())
        throw ValidationError("track has " + std::to_string(poses[0].joint_rotations.size()) + " joints, model has " +
                              std::to_string(model.joint_count()));
    if (static_cast<std::size_t>(expressions[0].coeffs.size()) != model.expr_count())
        throw ValidationError("track has " + std::to_string(expressions[0].coeffs.size()) +
                              " expression coefficients, model has " + std::to_string(model.expr_count()));
}

void save_track(const std::filesystem::path& path, const ParamTrack& track) {
    track.validate();
    const std::uint64_t n = track.size();
    const std::uint64_t nj = n ? track.poses[0].joint_rotations.size() : 0;
    const std::uint64_t ne = n ? static_cast<std::uint64_t>(track.expressions[0].coeffs.size()) : 0;
    const CameraMode mode = n ? track.cameras[0].mode : CameraMode::Perspective;
    const std::uint64_t cw = Camera::vector_width(mode);

    std::vector<double> theta, trans, psi, cam;
    for (std::size_t f = 0; f < n; ++f) {
        for (const auto& r : track.poses[f].joint_rotations) theta.insert(theta.end(), {r.x(), r.y(), r.z()});
        const auto& t = track.poses[f].translation;
        trans.insert(trans.end(), {t.x(), t.y(), t.z()});
        const auto& e = track.expressions[f].coeffs;
        psi.insert(psi.end(), e.data(), e.data() + e.size());
        const auto v = track.cameras[f].to_vector();
        cam.insert(cam.end(), v.begin(), v.end());
    }
    fwb::Container c;
    c.put_array<double>("theta", {n, nj, 3}, theta);
    c.put_array<double>("trans", {n, 3}, trans);
    c.put_array<double>("psi", {n, ne}, psi);
    c.put_array<double>("camera", {n, cw}, cam);
    const std::uint8_t m = static_cast<std::uint8_t>(mode);
    c.put_array<std::uint8_t>("camera_mode", {1}, std::span<const std::uint8_t>(&m, 1));
    c.write(path);
}

ParamTrack load_track(const std::filesystem::path& path) {
    const auto c = fwb::Container::read(path);
    const auto& th = c.chunk("theta");
    if (th.dims.size() != 3 || th.dims[2] != 3) throw ParseError("track chunk 'theta' must be n x n_j x 3");
    const std::uint64_t n = th.dims[0], nj = th.dims[1];
    const auto& ps = c.chunk("psi");
    if (ps.dims.size() != 2 || ps.dims[0] != n) throw ParseError("track chunk 'psi' must be n x n_e");
    const std::uint64_t ne = ps.dims[1];
    const auto modes = c.get_array<std::uint8_t>("camera_mode");
    if (modes.size() != 1 || modes[0] > 1) throw ParseError("track chunk 'camera_mode' must hold one value, 0 or 1");
    const auto mode = static_cast<CameraMode>(modes[0]);
    const std::uint64_t cw = Camera::vector_width(mode);

    const auto theta = c.get_array<double>("theta");
    const auto trans = c.get_array<double>("trans");
    const auto psi = c.get_array<double>("psi");
    const auto cam = c.get_array<double>("camera");
    if (trans.size() != 3 * n) throw ParseError("track chunk 'trans' must be n x 3");
    if (cam.size() != cw * n) throw ParseError("track chunk 'camera' must be n x " + std::to_string(cw));

    ParamTrack t;
    for (std::size_t f = 0; f < n; ++f) {
        PoseParams p;
        for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t o = (f * nj + j) * 3;
            p.joint_rotations.emplace_back(theta[o], theta[o + 1], theta[o + 2]);
        }
        p.translation = Vec3(trans[3 * f], trans[3 * f + 1], trans[3 * f + 2]);
        t.poses.push_back(std::move(p));
        ExprParams e;
        e.coeffs = Eigen::Map<const Eigen::VectorXd>(psi.data() + f * ne, static_cast<Eigen::Index>(ne));
        t.expressions.push_back(std::move(e));
        t.cameras.push_back(Camera::from_vector(
            mode, std::vector<double>(cam.begin() + static_cast<std::ptrdiff_t>(f * cw),
                                      cam.begin() + static_cast<std::ptrdiff_t>((f + 1) * cw))));
    }
    return t;
}

} // namespace facecap
