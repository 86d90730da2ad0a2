#include "facecap/adam.hpp"

#include "facecap/errors.hpp"

#include <cmath>

namespace facecap {

void adam_step(AdamState& s, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads) {
    if (params.size() != grads.size()) throw ValidationError("adam_step: parameter and gradient sizes differ");
    if (s.m.size() == 0 && s.v.size() == 0) {
        s.m = Eigen::VectorXd::Zero(params.size());
        s.v = Eigen::VectorXd::Zero(params.size());
    }
    if (s.m.size() != params.size() || s.v.size() != params.size())
        throw ValidationError("adam_step: moment shapes do not match parameters");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double m_hat = s.m[i] / c1;
        const double v_hat = s.v[i] / c2;
        params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
}

} // namespace facecap
