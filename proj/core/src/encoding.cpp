#include "facecap/encoding.hpp"

#include "facecap/errors.hpp"

#include <cmath>
#include <numbers>

namespace facecap {

Eigen::VectorXd SinusoidalEncoding::encode(const Vec3& x) const {
    if (frequencies < 0) throw ValidationError("sinusoidal encoding needs L >= 0");
    if (!x.allFinite()) throw ValidationError("sinusoidal encoding of a non-finite point");
    Eigen::VectorXd out(static_cast<Eigen::Index>(output_width()));
    Eigen::Index i = 0;
    if (include_input)
        for (int d = 0; d < 3; ++d) out[i++] = x[d];
    double scale = std::numbers::pi;
    for (int k = 0; k < frequencies; ++k, scale *= 2.0)
        for (int d = 0; d < 3; ++d) {
            out[i++] = std::sin(scale * x[d]);
            out[i++] = std::cos(scale * x[d]);
        }
    return out;
}

Eigen::MatrixXd SinusoidalEncoding::encode(const std::vector<Vec3>& points) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(output_width()), static_cast<Eigen::Index>(points.size()));
    for (std::size_t p = 0; p < points.size(); ++p) out.col(static_cast<Eigen::Index>(p)) = encode(points[p]);
    return out;
}

} // namespace facecap
