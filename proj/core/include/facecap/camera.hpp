#pragma once

// Cameras use the OpenCV convention: camera x right, y down, z forward.
// A point is in front of a perspective camera when its camera-space z is
// positive, and smaller depth is nearer in both modes.

#include "facecap/deform.hpp"

#include <Eigen/Core>

#include <vector>

namespace facecap {

enum class CameraMode : std::uint8_t { Perspective = 0, Orthographic = 1 };

struct Camera {
    CameraMode mode = CameraMode::Perspective;
    // Perspective
    double focal = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Vec3 axis_angle = Vec3::Zero();    // world to camera; stored as given so files round-trip
    Mat3 rotation = Mat3::Identity();  // rodrigues(axis_angle)
    Vec3 translation = Vec3::Zero();
    // Scaled orthographic: x_pix = (s x + tx + 1) W / 2, y_pix = (s y + ty + 1) H / 2, depth = z.
    double scale = 1.0;
    double tx = 0.0;
    double ty = 0.0;

    static Camera perspective(double focal, double cx, double cy, const Vec3& axis_angle, const Vec3& translation);
    static Camera orthographic(double scale, double tx, double ty);

    /// 9 numbers (f, cx, cy, axis-angle rotation, translation) or 3 (s, tx, ty).
    std::vector<double> to_vector() const;
    static Camera from_vector(CameraMode mode, const std::vector<double>& v);
    static std::size_t vector_width(CameraMode mode) { return mode == CameraMode::Perspective ? 9 : 3; }

    /// Throws ValidationError on non-positive focal length or scale.
    void validate() const;

    /// Unit vector from `p` toward the viewer.
    Vec3 view_direction(const Vec3& p) const;
};

struct Projected {
    double x = 0.0;  // pixels, origin at the top-left corner of the image
    double y = 0.0;
    double depth = 0.0;
    bool in_front = false;  // perspective: camera z > 0; always true for ortho
};

/// Projects world points. Throws ValidationError on non-finite input.
std::vector<Projected> project(const Camera& cam, const std::vector<Vec3>& points, int width, int height);
Projected project(const Camera& cam, const Vec3& point, int width, int height);

} // namespace facecap
