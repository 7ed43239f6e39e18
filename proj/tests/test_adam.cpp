#include "crn/adam.hpp"
#include "crn/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace crn;

TEST_SUITE("adam") {
TEST_CASE("zero gradient leaves the parameter and counts the step") {
    auto p = Tensor::parameter({2}, {0.5, -0.5});
    p.zero_grad();
    AdamState s = AdamState::for_parameter(p);
    adam_step(p, s, {});
    CHECK(s.step == 1);
    CHECK(p.values()[0] == 0.5);
    CHECK(p.values()[1] == -0.5);
}

TEST_CASE("first step moves by about lr") {
    auto p = Tensor::parameter({1}, {1.0});
    backward(sum(p));
    AdamState s = AdamState::for_parameter(p);
    const AdamHyper h{0.01, 0.9, 0.999, 1e-8};
    adam_step(p, s, h);
    // m_hat = 1, v_hat = 1 so the step is lr / (1 + eps).
    CHECK(p.values()[0] == doctest::Approx(1.0 - 0.01 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("two identical-gradient steps match a hand computation") {
    auto p = Tensor::parameter({1}, {0.3});
    AdamState s = AdamState::for_parameter(p);
    const AdamHyper h{0.05, 0.9, 0.999, 1e-8};
    const double g = 0.7;
    double x = 0.3, m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
        p.zero_grad();
        backward(sum(scale(p, g)));
        adam_step(p, s, h);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(std::abs(p.values()[0] - x) < 1e-12);
    CHECK(s.step == 2);
}

TEST_CASE("missing gradient is a contract error") {
    auto p = Tensor::parameter({1}, {1.0});
    AdamState s = AdamState::for_parameter(p);
    CHECK_THROWS_AS(adam_step(p, s, {}), ContractError);
}
}
