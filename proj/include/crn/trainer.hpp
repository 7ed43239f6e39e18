#pragma once

// Alternating LS-GAN training of the completion network, schedules,
// mean-shape priors and evaluation.

#include "crn/adam.hpp"
#include "crn/losses.hpp"
#include "crn/metrics.hpp"
#include "crn/model.hpp"
#include "crn/selfsup.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace crn {

struct TrainConfig {
    double lr_g = 1e-4;
    double lr_d = 5e-5;
    double lr_decay = 0.7;
    std::uint64_t lr_decay_epochs = 40;
    double lr_floor = 1e-6;

    double lambda_gan = 1.0;
    double lambda_ae = 100.0;
    double beta_rec = 200.0;
    double lambda_f_start = 0.01;
    double lambda_f_end = 1.0;
    std::uint64_t lambda_f_ramp = 50000;  // iterations; 0 pins lambda_f to the end value

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::uint64_t epochs = 10;
    std::uint64_t batch_size = 4;
    std::uint64_t max_iterations = 0;  // 0: no cap
    std::uint64_t seed = 1;
    std::uint64_t d_steps = 1;  // discriminator updates per generator update
    ChamferVariant chamfer = ChamferVariant::CD2;

    double labeled_ratio = 1.0;
    bool resampling = false;
    bool mixup = false;
    bool partial_ae = true;
    bool regenerate_each_epoch = true;
    RemovalSpec removal = RemovalSpec::fraction_of(0.25);
    double mixup_beta_a = 1.0;
    double mixup_beta_b = 1.0;

    bool mean_shape = true;
    std::uint64_t mean_shape_refresh = 0;  // epochs between refreshes; 0: once

    double match_threshold = kDefaultMatchThreshold;
    bool eval_emd = true;

    // Throws ContractError naming the first violated constraint.
    void validate() const;
};

// lambda_f ramps linearly from start to end over the first `lambda_f_ramp`
// iterations.
double lambda_f_at(const TrainConfig& config, std::uint64_t iteration);
// max(lr0 * decay^floor(epoch / period), floor)
double learning_rate_at(double base, const TrainConfig& config, std::uint64_t epoch);

// Everything a resumed run needs.
struct TrainingState {
    NetConfig net;
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    std::vector<AdamState> adam_generator;
    std::vector<AdamState> adam_discriminator;
    MeanShapeTable mean_shapes;
    std::uint64_t iteration = 0;
    std::uint64_t epoch = 0;
    std::mt19937_64 rng;

    static TrainingState initialize(const NetConfig& net, std::uint64_t seed);
};

struct StepLosses {
    double generator = 0;      // L_G
    double discriminator = 0;  // L_D (0 with the discriminator off)
    double cd_coarse = 0;
    double cd_dense = 0;
    double cd_partial = 0;
    double lambda_f = 0;
    double lr_g = 0;
    double lr_d = 0;
};

struct LossLogRow {
    std::uint64_t epoch = 0;
    std::uint64_t iteration = 0;
    StepLosses losses;
};

std::string loss_log_header();
std::string format_loss_row(const LossLogRow& row);

// Encoder input of exactly net.input_points points.
PointCloud prepare_input(const PointCloud& cloud, const NetConfig& net, std::uint64_t seed);

// Per-category mean of encoder features over each pair's target cloud.
MeanShapeTable compute_mean_shapes(const std::vector<TrainingPair>& pairs, const GeneratorParams& params);

// One discriminator update followed by one generator update.
StepLosses train_step(const std::vector<TrainingPair>& batch, TrainingState& state, const TrainConfig& config,
                      std::uint64_t step_seed);

struct FitOptions {
    std::filesystem::path checkpoint_dir;  // empty: no per-epoch checkpoints
    const std::vector<TrainingPair>* validation = nullptr;
    std::function<void(const LossLogRow&)> on_step;
};

struct FitResult {
    TrainingState state;
    std::vector<LossLogRow> log;
    std::vector<MetricsReport> epoch_metrics;
};

// Trains from scratch.
FitResult fit(const std::vector<TrainingPair>& dataset, const NetConfig& net, const TrainConfig& config,
              const FitOptions& options = {});
// Continues from a saved state until config.epochs / max_iterations.
FitResult resume(TrainingState state, const std::vector<TrainingPair>& dataset, const TrainConfig& config,
                 const FitOptions& options = {});

struct Evaluation {
    MetricsReport overall;
    std::map<std::string, MetricsReport> per_category;
    std::vector<MetricsReport> per_pair;
};

// Scores a set of predictions against targets; `inputs` feed fidelity.
Evaluation evaluate_predictions(const std::vector<PointCloud>& predictions, const std::vector<TrainingPair>& pairs,
                                const TrainConfig& config,
                                const std::function<Eigen::VectorXd(const PointCloud&)>& features);

Evaluation evaluate(const TrainingState& state, const std::vector<TrainingPair>& test_pairs,
                    const TrainConfig& config);

}  // namespace crn
