#include "crn/adam.hpp"

#include "crn/errors.hpp"

#include <cmath>

namespace crn {

AdamState AdamState::for_parameter(const Tensor& param) {
    return AdamState{std::vector<double>(param.size(), 0.0), std::vector<double>(param.size(), 0.0), 0};
}

void adam_step(Tensor& param, AdamState& state, const AdamHyper& hyper) {
    if (!param.has_grad()) throw ContractError("adam_step: parameter has no gradient");
    const std::size_t n = param.size();
    if (state.first_moment.empty() && state.second_moment.empty() && state.step == 0) {
        state = AdamState::for_parameter(param);
    }
    if (state.first_moment.size() != n || state.second_moment.size() != n) {
        throw DimensionError("adam_step: moment buffers of size " +
                             std::to_string(state.first_moment.size()) +
                             " do not match parameter of size " + std::to_string(n));
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    const auto g = param.grad();
    auto w = param.mutable_values();
    for (std::size_t i = 0; i < n; ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g[i];
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * g[i] * g[i];
        w[i] -= hyper.lr * (m / c1) / (std::sqrt(v / c2) + hyper.eps);
    }
}

}  // namespace crn
