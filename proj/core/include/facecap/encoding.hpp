#pragma once

#include "facecap/mesh.hpp"

#include <Eigen/Core>

#include <vector>

namespace facecap {

/// gamma(x) = [x] ++ [sin(2^k pi x_d), cos(2^k pi x_d)] for k = 0..L-1, d = 0..2
/// (frequency-major, then axis, then the sin/cos pair).
struct SinusoidalEncoding {
    int frequencies = 10;
    bool include_input = true;

    std::size_t output_width() const { return (include_input ? 3u : 0u) + 6u * static_cast<std::size_t>(frequencies); }
    Eigen::VectorXd encode(const Vec3& x) const;
    /// One column per point.
    Eigen::MatrixXd encode(const std::vector<Vec3>& points) const;
};

} // namespace facecap
