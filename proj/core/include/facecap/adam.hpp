#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace facecap {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    Eigen::VectorXd m;  // first moment
    Eigen::VectorXd v;  // second moment
};

/// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads);

} // namespace facecap
