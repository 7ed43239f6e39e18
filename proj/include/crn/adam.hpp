#pragma once

#include "crn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace crn {

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers for one parameter tensor.
struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    static AdamState for_parameter(const Tensor& param);
};

// Bias-corrected Adam update applied in place. The parameter's gradient is
// left untouched.
void adam_step(Tensor& param, AdamState& state, const AdamHyper& hyper);

}  // namespace crn
