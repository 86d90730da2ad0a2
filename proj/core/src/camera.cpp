#include "facecap/camera.hpp"

#include "facecap/errors.hpp"

#include <cmath>

namespace facecap {

Camera Camera::perspective(double focal, double cx, double cy, const Vec3& axis_angle, const Vec3& translation) {
    Camera c;
    c.mode = CameraMode::Perspective;
    c.focal = focal;
    c.cx = cx;
    c.cy = cy;
    c.axis_angle = axis_angle;
    c.rotation = rodrigues(axis_angle);
    c.translation = translation;
    c.validate();
    return c;
}

Camera Camera::orthographic(double scale, double tx, double ty) {
    Camera c;
    c.mode = CameraMode::Orthographic;
    c.scale = scale;
    c.tx = tx;
    c.ty = ty;
    c.validate();
    return c;
}

void Camera::validate() const {
    if (mode == CameraMode::Perspective) {
        if (!(focal > 0.0) || !std::isfinite(focal)) throw ValidationError("camera focal length must be positive");
        if (!std::isfinite(cx) || !std::isfinite(cy) || !axis_angle.allFinite() || !translation.allFinite())
            throw ValidationError("camera parameters must be finite");
    } else {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("orthographic scale must be positive");
        if (!std::isfinite(tx) || !std::isfinite(ty)) throw ValidationError("camera parameters must be finite");
    }
}

std::vector<double> Camera::to_vector() const {
    if (mode == CameraMode::Orthographic) return {scale, tx, ty};
    const Vec3& aa = axis_angle;
    return {focal, cx, cy, aa.x(), aa.y(), aa.z(), translation.x(), translation.y(), translation.z()};
}

Camera Camera::from_vector(CameraMode mode, const std::vector<double>& v) {
    if (v.size() != vector_width(mode))
        throw ValidationError("camera vector has " + std::to_string(v.size()) + " entries, expected " +
                              std::to_string(vector_width(mode)));
    if (mode == CameraMode::Orthographic) return orthographic(v[0], v[1], v[2]);
    return perspective(v[0], v[1], v[2], Vec3(v[3], v[4], v[5]), Vec3(v[6], v[7], v[8]));
}

Vec3 Camera::view_direction(const Vec3& p) const {
    if (mode == CameraMode::Orthographic) return Vec3(0.0, 0.0, -1.0);
    const Vec3 center = -rotation.transpose() * translation;
    const Vec3 d = center - p;
    const double n = d.norm();
    return n > 0.0 ? Vec3(d / n) : Vec3(0.0, 0.0, -1.0);
}

Projected project(const Camera& cam, const Vec3& p, int width, int height) {
    if (!p.allFinite()) throw ValidationError("cannot project a non-finite point");
    Projected out;
    if (cam.mode == CameraMode::Orthographic) {
        out.x = (cam.scale * p.x() + cam.tx + 1.0) * 0.5 * width;
        out.y = (cam.scale * p.y() + cam.ty + 1.0) * 0.5 * height;
        out.depth = p.z();
        out.in_front = true;
        return out;
    }
    const Vec3 q = cam.rotation * p + cam.translation;
    out.depth = q.z();
    out.in_front = q.z() > 0.0;
    if (out.in_front) {
        out.x = cam.focal * q.x() / q.z() + cam.cx;
        out.y = cam.focal * q.y() / q.z() + cam.cy;
    }
    return out;
}

std::vector<Projected> project(const Camera& cam, const std::vector<Vec3>& points, int width, int height) {
    std::vector<Projected> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = project(cam, points[i], width, height);
    return out;
}

} // namespace facecap
