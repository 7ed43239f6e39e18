#pragma once

#include "crn/model.hpp"
#include "crn/selfsup.hpp"
#include "crn/trainer.hpp"

namespace crn::testing {

// A network small enough for exhaustive finite-difference probes.
inline NetConfig toy_net() {
    NetConfig c;
    c.input_points = 16;
    c.coarse_points = 8;
    c.feature_dim = 8;
    c.encoder_stage1 = {8};
    c.encoder_stage2 = {8};
    c.coarse_hidden = {16};
    c.lifting_pre = {8, 8};
    c.contraction = {8, 8};
    c.expansion = {8};
    c.offset_hidden = {8};
    c.iterations = 1;
    c.disc_seeds = 4;
    c.disc_neighbors = {4, 4, 4};
    c.disc_mlps = {Widths{4, 4}, Widths{4, 8}, Widths{4, 8}};
    return c;
}

// Small enough for second-scale training runs.
inline NetConfig tiny_net() {
    NetConfig c;
    c.input_points = 64;
    c.coarse_points = 16;
    c.feature_dim = 32;
    c.encoder_stage1 = {16, 32};
    c.encoder_stage2 = {64};
    c.coarse_hidden = {64};
    c.lifting_pre = {32, 16};
    c.contraction = {16, 32};
    c.expansion = {16};
    c.offset_hidden = {16};
    c.iterations = 1;
    c.disc_seeds = 8;
    c.disc_neighbors = {4, 6, 8};
    return c;
}

inline TrainConfig tiny_train() {
    TrainConfig t;
    t.epochs = 2;
    t.batch_size = 2;
    t.lambda_f_ramp = 10;
    t.eval_emd = false;
    return t;
}

inline std::vector<TrainingPair> tiny_dataset(Index count, std::uint64_t seed = 5) {
    return procedural_pairs(count, 64, RemovalSpec::fraction_of(0.25), seed);
}

}  // namespace crn::testing
