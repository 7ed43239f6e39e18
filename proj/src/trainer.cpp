#include "crn/trainer.hpp"

#include "crn/checkpoint.hpp"
#include "crn/errors.hpp"
#include "crn/io.hpp"
#include "crn/random.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace crn {

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw ContractError("TrainConfig: " + what); };
    if (!(lr_g > 0) || !(lr_d > 0)) fail("learning rates must be positive");
    if (!(lr_decay > 0 && lr_decay <= 1)) fail("lr_decay must lie in (0, 1]");
    if (lr_decay_epochs == 0) fail("lr_decay_epochs must be positive");
    if (!(lr_floor >= 0)) fail("lr_floor must be non-negative");
    if (!(lambda_f_start > 0 && lambda_f_start <= 1) || !(lambda_f_end > 0 && lambda_f_end <= 1)) {
        fail("lambda_f endpoints must lie in (0, 1]");
    }
    if (lambda_f_start > lambda_f_end) fail("lambda_f must not decrease");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) fail("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0)) fail("adam_eps must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (d_steps == 0) fail("d_steps must be positive");
    if (!(labeled_ratio >= 0 && labeled_ratio <= 1)) fail("labeled_ratio must lie in [0, 1]");
    if (!(mixup_beta_a > 0) || !(mixup_beta_b > 0)) fail("MixUp Beta parameters must be positive");
    if (!(match_threshold > 0)) fail("match_threshold must be positive");
    if (lambda_gan < 0 || lambda_ae < 0 || beta_rec < 0) fail("loss weights must be non-negative");
}

double lambda_f_at(const TrainConfig& config, std::uint64_t iteration) {
    if (config.lambda_f_ramp == 0 || iteration >= config.lambda_f_ramp) return config.lambda_f_end;
    const double t = static_cast<double>(iteration) / static_cast<double>(config.lambda_f_ramp);
    return config.lambda_f_start + (config.lambda_f_end - config.lambda_f_start) * t;
}

double learning_rate_at(double base, const TrainConfig& config, std::uint64_t epoch) {
    const double steps = std::floor(static_cast<double>(epoch) / static_cast<double>(config.lr_decay_epochs));
    return std::max(base * std::pow(config.lr_decay, steps), config.lr_floor);
}

TrainingState TrainingState::initialize(const NetConfig& net, std::uint64_t seed) {
    net.validate();
    TrainingState s;
    s.net = net;
    s.generator = GeneratorParams::create(net, derive_seed(seed, 1));
    s.discriminator = DiscriminatorParams::create(net, derive_seed(seed, 2));
    for (const auto& [name, t] : s.generator.named_parameters()) s.adam_generator.push_back(AdamState::for_parameter(t));
    for (const auto& [name, t] : s.discriminator.named_parameters()) {
        s.adam_discriminator.push_back(AdamState::for_parameter(t));
    }
    s.rng.seed(derive_seed(seed, 3));
    return s;
}

std::string loss_log_header() { return "epoch,iter,L_G,L_D,cd_coarse,cd_dense,cd_ae,lr_G,lr_D,lambda_f"; }

std::string format_loss_row(const LossLogRow& row) {
    const auto& l = row.losses;
    return std::to_string(row.epoch) + "," + std::to_string(row.iteration) + "," + format_real(l.generator) + "," +
           format_real(l.discriminator) + "," + format_real(l.cd_coarse) + "," + format_real(l.cd_dense) + "," +
           format_real(l.cd_partial) + "," + format_real(l.lr_g) + "," + format_real(l.lr_d) + "," +
           format_real(l.lambda_f);
}

PointCloud prepare_input(const PointCloud& cloud, const NetConfig& net, std::uint64_t seed) {
    if (cloud.rows() == 0) throw ContractError("prepare_input: empty point cloud");
    if (static_cast<Index>(cloud.rows()) == net.input_points) return cloud;
    return random_subsample(cloud, net.input_points, seed);
}

MeanShapeTable compute_mean_shapes(const std::vector<TrainingPair>& pairs, const GeneratorParams& params) {
    if (pairs.empty()) throw ContractError("compute_mean_shapes: empty dataset");
    NoGradGuard no_grad;
    std::map<std::string, Eigen::VectorXd> sums;
    std::map<std::string, double> counts;
    Eigen::VectorXd total;
    for (const auto& p : pairs) {
        const Tensor f = encode(p.target, params);
        const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
        auto [it, fresh] = sums.try_emplace(p.category, Eigen::VectorXd::Zero(v.size()));
        it->second += v;
        counts[p.category] += 1.0;
        if (total.size() == 0) total = Eigen::VectorXd::Zero(v.size());
        total += v;
    }
    for (auto& [cat, v] : sums) v /= counts[cat];
    return MeanShapeTable(std::move(sums), total / static_cast<double>(pairs.size()));
}

namespace {

void require_finite(double value, const char* term) {
    if (!std::isfinite(value)) {
        throw ValueError(std::string("training diverged: non-finite ") + term);
    }
}

void apply_adam(const NamedParameters& params, std::vector<AdamState>& states, const AdamHyper& hyper) {
    if (params.size() != states.size()) throw ContractError("optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor t = params[i].second;
        adam_step(t, states[i], hyper);
    }
}

// Restores requires_grad on scope exit.
struct FreezeGuard {
    const NamedParameters& params;
    explicit FreezeGuard(const NamedParameters& p) : params(p) { set_requires_grad(params, false); }
    ~FreezeGuard() { set_requires_grad(params, true); }
};

}  // namespace

StepLosses train_step(const std::vector<TrainingPair>& batch, TrainingState& state, const TrainConfig& config,
                      std::uint64_t step_seed) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    const NetConfig& net = state.net;
    const auto gen_params = state.generator.named_parameters();
    const auto disc_params = state.discriminator.named_parameters();
    const double batch_scale = 1.0 / static_cast<double>(batch.size());

    StepLosses out;
    out.lambda_f = lambda_f_at(config, state.iteration);
    out.lr_g = learning_rate_at(config.lr_g, config, state.epoch);
    out.lr_d = learning_rate_at(config.lr_d, config, state.epoch);
    const AdamHyper hyper_g{out.lr_g, config.adam_beta1, config.adam_beta2, config.adam_eps};
    const AdamHyper hyper_d{out.lr_d, config.adam_beta1, config.adam_beta2, config.adam_eps};

    struct Sample {
        PointCloud input;
        Tensor input_points;
        Tensor target;
        Completion completion;
        std::uint64_t disc_seed;
    };
    std::vector<Sample> samples;
    samples.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto seed = derive_seed(step_seed, b);
        Sample s;
        s.input = prepare_input(batch[b].input, net, derive_seed(seed, 1));
        s.input_points = Tensor::from_matrix(s.input);
        s.target = Tensor::from_matrix(batch[b].target);
        const Tensor prior = config.mean_shape ? state.mean_shapes.lookup(batch[b].category, net.feature_dim)
                                               : Tensor::zeros({net.feature_dim});
        {
            // The discriminator is not part of the completion graph.
            FreezeGuard frozen(disc_params);
            s.completion = complete(s.input, state.generator, net, derive_seed(seed, 2), prior);
        }
        s.disc_seed = derive_seed(seed, 3);
        samples.push_back(std::move(s));
    }

    // Discriminator update on detached generator output.
    if (net.discriminator) {
        FreezeGuard frozen(gen_params);
        for (std::uint64_t k = 0; k < config.d_steps; ++k) {
            zero_grad(disc_params);
            Tensor total;
            for (const auto& s : samples) {
                const Tensor fake = discriminate(s.completion.dense.detach(), state.discriminator, net, s.disc_seed).mean_score;
                const Tensor real = discriminate(s.target, state.discriminator, net, s.disc_seed).mean_score;
                const Tensor loss = lsgan_discriminator_loss(fake, real);
                total = total.defined() ? add(total, loss) : loss;
            }
            total = scale(total, batch_scale);
            out.discriminator = total.item();
            require_finite(out.discriminator, "L_D");
            backward(total);
            apply_adam(disc_params, state.adam_discriminator, hyper_d);
        }
    }

    // Generator update with the discriminator frozen.
    {
        FreezeGuard frozen(disc_params);
        zero_grad(gen_params);
        Tensor total;
        for (const auto& s : samples) {
            Tensor p_hat;
            if (config.partial_ae) {
                p_hat = reconstruct_partial_from_feature(s.completion.feature, static_cast<Index>(s.input.rows()),
                                                         state.generator, net);
            }
            const auto terms = reconstruction_terms(s.completion.coarse, s.completion.dense, p_hat, s.input_points,
                                                    s.target, out.lambda_f, config.lambda_ae, config.chamfer);
            out.cd_coarse += terms.coarse.item() * batch_scale;
            out.cd_dense += terms.dense.item() * batch_scale;
            if (terms.partial.defined()) out.cd_partial += terms.partial.item() * batch_scale;
            Tensor loss;
            if (net.discriminator) {
                const Tensor score = discriminate(s.completion.dense, state.discriminator, net, s.disc_seed).mean_score;
                loss = total_generator_loss(lsgan_generator_loss(score), terms.total, config.lambda_gan, config.beta_rec);
            } else {
                loss = scale(terms.total, config.beta_rec);
            }
            total = total.defined() ? add(total, loss) : loss;
        }
        total = scale(total, batch_scale);
        out.generator = total.item();
        require_finite(out.cd_coarse, "cd_coarse");
        require_finite(out.cd_dense, "cd_dense");
        require_finite(out.cd_partial, "cd_ae");
        require_finite(out.generator, "L_G");
        backward(total);
        apply_adam(gen_params, state.adam_generator, hyper_g);
    }
    return out;
}

namespace {

std::vector<TrainingPair> epoch_training_set(const std::vector<TrainingPair>& dataset, const TrainConfig& config,
                                             std::uint64_t epoch) {
    const std::uint64_t seed = derive_seed(config.seed, 700, config.regenerate_each_epoch ? epoch : 0);
    return build_training_set(dataset, config.labeled_ratio, {config.resampling, config.mixup}, config.removal,
                              {config.mixup_beta_a, config.mixup_beta_b}, seed);
}

bool reached_cap(const TrainConfig& config, const TrainingState& state) {
    return config.max_iterations != 0 && state.iteration >= config.max_iterations;
}

}  // namespace

FitResult resume(TrainingState state, const std::vector<TrainingPair>& dataset, const TrainConfig& config,
                 const FitOptions& options) {
    config.validate();
    if (dataset.empty()) throw ContractError("fit: empty dataset");
    FitResult result;
    while (state.epoch < config.epochs && !reached_cap(config, state)) {
        const auto pairs = epoch_training_set(dataset, config, state.epoch);
        const bool refresh = config.mean_shape_refresh != 0 && state.epoch % config.mean_shape_refresh == 0;
        if (config.mean_shape && (state.mean_shapes.empty() || refresh)) {
            state.mean_shapes = compute_mean_shapes(pairs, state.generator);
        }

        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(state.rng)]);
        }

        bool finished_epoch = true;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            if (reached_cap(config, state)) {
                finished_epoch = false;
                break;
            }
            std::vector<TrainingPair> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
                batch.push_back(pairs[order[i]]);
            }
            const std::uint64_t step_seed = state.rng();
            LossLogRow row{state.epoch, state.iteration, train_step(batch, state, config, step_seed)};
            state.iteration += 1;
            result.log.push_back(row);
            if (options.on_step) options.on_step(row);
        }
        if (!finished_epoch) break;

        state.epoch += 1;
        if (options.validation && !options.validation->empty()) {
            result.epoch_metrics.push_back(evaluate(state, *options.validation, config).overall);
        }
        if (!options.checkpoint_dir.empty()) {
            char name[48];
            std::snprintf(name, sizeof name, "epoch_%04llu.ckpt", static_cast<unsigned long long>(state.epoch));
            save_checkpoint(options.checkpoint_dir / name, state);
        }
    }
    result.state = std::move(state);
    return result;
}

FitResult fit(const std::vector<TrainingPair>& dataset, const NetConfig& net, const TrainConfig& config,
              const FitOptions& options) {
    return resume(TrainingState::initialize(net, config.seed), dataset, config, options);
}

namespace {

void accumulate_mean(MetricsReport& target, const std::vector<const MetricsReport*>& reports) {
    for (const auto& key : MetricsReport::columns()) {
        if (key == "fpd") continue;
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto* r : reports) {
            if (const auto v = r->get(key)) {
                acc += *v;
                ++n;
            }
        }
        if (n > 0) target.set(key, acc / static_cast<double>(n));
    }
}

}  // namespace

Evaluation evaluate_predictions(const std::vector<PointCloud>& predictions, const std::vector<TrainingPair>& pairs,
                                const TrainConfig& config,
                                const std::function<Eigen::VectorXd(const PointCloud&)>& features) {
    if (pairs.empty()) throw ContractError("evaluate: empty test set");
    if (predictions.size() != pairs.size()) throw ContractError("evaluate: prediction count differs from pair count");
    Evaluation ev;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const PointCloud& q = predictions[i];
        const PointCloud& gt = pairs[i].target;
        MetricsReport r;
        r.set("cd1", chamfer(q, gt, ChamferVariant::CD1));
        r.set("cd2", chamfer(q, gt, ChamferVariant::CD2));
        if (config.eval_emd && q.rows() == gt.rows()) r.set("emd", emd(q, gt));
        const double acc = matched_fraction(q, gt, config.match_threshold);
        const double comp = matched_fraction(gt, q, config.match_threshold);
        r.set("accuracy", acc);
        r.set("completeness", comp);
        r.set("fscore", fscore(acc, comp));
        if (pairs[i].input.rows() > 0) r.set("fidelity", fidelity(pairs[i].input, q));
        ev.per_pair.push_back(std::move(r));
        members[pairs[i].category].push_back(i);
    }

    auto fpd_over = [&](const std::vector<std::size_t>& idx) -> std::optional<double> {
        if (!features || idx.size() < 2) return std::nullopt;
        Eigen::MatrixXd fake, real;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const Eigen::VectorXd a = features(predictions[idx[r]]);
            const Eigen::VectorXd b = features(pairs[idx[r]].target);
            if (r == 0) {
                fake.resize(static_cast<Eigen::Index>(idx.size()), a.size());
                real.resize(static_cast<Eigen::Index>(idx.size()), b.size());
            }
            fake.row(static_cast<Eigen::Index>(r)) = a.transpose();
            real.row(static_cast<Eigen::Index>(r)) = b.transpose();
        }
        return fpd(fake, real);
    };

    std::vector<const MetricsReport*> all;
    for (const auto& r : ev.per_pair) all.push_back(&r);
    accumulate_mean(ev.overall, all);
    std::vector<std::size_t> every(pairs.size());
    std::iota(every.begin(), every.end(), std::size_t{0});
    if (const auto v = fpd_over(every)) ev.overall.set("fpd", *v);

    for (const auto& [cat, idx] : members) {
        std::vector<const MetricsReport*> subset;
        for (std::size_t i : idx) subset.push_back(&ev.per_pair[i]);
        MetricsReport r;
        accumulate_mean(r, subset);
        if (const auto v = fpd_over(idx)) r.set("fpd", *v);
        ev.per_category.emplace(cat, std::move(r));
    }
    return ev;
}

Evaluation evaluate(const TrainingState& state, const std::vector<TrainingPair>& test_pairs, const TrainConfig& config) {
    if (test_pairs.empty()) throw ContractError("evaluate: empty test set");
    NoGradGuard no_grad;
    const NetConfig& net = state.net;
    std::vector<PointCloud> predictions;
    predictions.reserve(test_pairs.size());
    for (std::size_t i = 0; i < test_pairs.size(); ++i) {
        const PointCloud input = prepare_input(test_pairs[i].input, net, derive_seed(config.seed, 900, i));
        const Tensor prior = config.mean_shape ? state.mean_shapes.lookup(test_pairs[i].category, net.feature_dim)
                                               : Tensor::zeros({net.feature_dim});
        predictions.push_back(
            tensor_cloud(complete(input, state.generator, net, derive_seed(config.seed, 901, i), prior).dense));
    }
    const auto features = [&state](const PointCloud& cloud) {
        const Tensor f = encode(cloud, state.generator);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size())));
    };
    return evaluate_predictions(predictions, test_pairs, config, features);
}

}  // namespace crn
