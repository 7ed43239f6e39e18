// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "crn/checkpoint.hpp"
#include "crn/cli.hpp"
#include "crn/geometry.hpp"
#include "crn/losses.hpp"
#include "crn/metrics.hpp"
#include "crn/model.hpp"
#include "crn/random.hpp"
#include "crn/selfsup.hpp"
#include "crn/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "toy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace crn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << detail << std::endl;
    if (!ok) ++failures;
}

template <class F>
void criterion(int id, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

Tensor weighted_sum(const Tensor& x, std::uint64_t seed) {
    return sum(mul(x, Tensor::constant(x.shape(), testing::random_values(x.size(), seed))));
}

// Per-op finite differences plus the full generator objective on the toy net.
void gradients() {
    const auto t0 = Clock::now();
    double worst_op = 0.0;
    auto probe = [&](const std::function<Tensor()>& f, const Tensor& p) {
        worst_op = std::max(worst_op, testing::check_gradient(f, p).relative_error);
    };
    auto param = [](Shape s, std::uint64_t seed, double margin = 0.0) {
        return Tensor::parameter(s, testing::random_values(shape_size(s), seed, margin));
    };
    const Tensor x = param({5, 4}, 1, 0.05), W = param({4, 3}, 2), b = param({3}, 3), y = param({5, 4}, 4);
    probe([&] { return weighted_sum(affine(x, W, b), 10); }, W);
    probe([&] { return weighted_sum(affine(x, W, b), 10); }, x);
    probe([&] { return weighted_sum(affine(x, W, b), 10); }, b);
    probe([&] { return weighted_sum(linear(x, W), 11); }, x);
    probe([&] { return weighted_sum(relu(x), 12); }, x);
    probe([&] { return weighted_sum(reduce_max(x, 0), 13); }, x);
    probe([&] { return weighted_sum(reduce_max(x, 1), 14); }, x);
    probe([&] { return weighted_sum(concat({x, y}, 1), 15); }, y);
    probe([&] { return weighted_sum(reshape(x, {10, 2}), 16); }, x);
    probe([&] { return weighted_sum(tile(b, 0, 3), 17); }, b);
    probe([&] { return weighted_sum(slice(x, 0, 1, 4), 18); }, x);
    const std::vector<std::size_t> rows{4, 0, 0, 2};
    probe([&] { return weighted_sum(gather_rows(x, rows), 19); }, x);
    probe([&] { return weighted_sum(add(x, y), 20); }, y);
    probe([&] { return weighted_sum(sub(x, y), 21); }, y);
    probe([&] { return weighted_sum(mul(x, y), 22); }, x);
    probe([&] { return weighted_sum(scale(x, -1.5), 23); }, x);
    probe([&] { return weighted_sum(add_scalar(x, 0.5), 24); }, x);
    probe([&] { return weighted_sum(square(x), 25); }, x);
    probe([&] { return mean(x); }, x);
    const Tensor cx = Tensor::parameter({7, 3}, testing::random_values(21, 30)),
                 cy = Tensor::parameter({9, 3}, testing::random_values(27, 31));
    for (auto v : {ChamferVariant::CD1, ChamferVariant::CD2}) {
        probe([&] { return chamfer(cx, cy, v); }, cx);
        probe([&] { return chamfer(cx, cy, v); }, cy);
    }
    const Tensor fake = Tensor::parameter({}, {0.2}), real = Tensor::parameter({}, {0.9});
    probe([&] { return lsgan_generator_loss(fake); }, fake);
    probe([&] { return lsgan_discriminator_loss(fake, real); }, fake);
    probe([&] { return lsgan_discriminator_loss(fake, real); }, real);

    const NetConfig net = testing::toy_net();
    const auto gen = GeneratorParams::create(net, 40);
    // Zero-initialised biases leave dead rows exactly on the ReLU hinge; move them off it.
    std::uint64_t stream = 500;
    for (const auto& [name, t] : gen.named_parameters()) {
        if (!name.ends_with("bias")) continue;
        Tensor handle = t;
        const auto jitter = testing::random_values(handle.size(), stream++);
        auto v = handle.mutable_values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.05 * jitter[i];
    }
    const auto disc = DiscriminatorParams::create(net, 41);
    set_requires_grad(disc.named_parameters(), false);
    const PointCloud p = testing::random_cloud(16, 42, 0.5);
    const Tensor gt = Tensor::from_matrix(testing::random_cloud(32, 43, 0.5));
    const Tensor p_in = Tensor::from_matrix(p);
    const TrainConfig tc;
    auto full_loss = [&] {
        const Completion c = complete(p, gen, net, 44);
        const Tensor p_hat = reconstruct_partial_from_feature(c.feature, 16, gen, net);
        const Tensor rec = reconstruction_loss(c.coarse, c.dense, p_hat, p_in, gt, 0.5, tc.lambda_ae, tc.chamfer);
        const Tensor gan = lsgan_generator_loss(discriminate(c.dense, disc, net, 45).mean_score);
        return total_generator_loss(gan, rec, tc.lambda_gan, tc.beta_rec);
    };
    double worst_model = 0.0;
    std::size_t probed = 0;
    for (const auto& [name, t] : gen.named_parameters()) {
        const auto r = testing::check_gradient(full_loss, t, 1e-5, 24);
        worst_model = std::max(worst_model, r.relative_error);
        probed += r.probed;
    }
    const double secs = seconds_since(t0);
    report(1, worst_op < 1e-4 && worst_model < 1e-3 && secs < 60,
           "max op FD error " + fmt(worst_op) + ", full generator loss FD error " + fmt(worst_model) + " over " +
               std::to_string(probed) + " entries, " + fmt(secs) + " s");
}

void oracle_agreement() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(50);
    std::uniform_int_distribution<int> size(1, 64), small(1, 6);
    double chamfer_err = 0.0, emd_err = 0.0;
    for (int i = 0; i < 200; ++i) {
        const PointCloud X = testing::random_cloud(size(rng), 1000 + i), Y = testing::random_cloud(size(rng), 2000 + i);
        chamfer_err = std::max({chamfer_err,
                                std::abs(chamfer(X, Y, ChamferVariant::CD1) - testing::chamfer_oracle(X, Y, true)),
                                std::abs(chamfer(X, Y, ChamferVariant::CD2) - testing::chamfer_oracle(X, Y, false))});
    }
    for (int i = 0; i < 100; ++i) {
        const int n = small(rng);
        const PointCloud X = testing::random_cloud(n, 3000 + i), Y = testing::random_cloud(n, 4000 + i);
        emd_err = std::max(emd_err, std::abs(emd(X, Y) - testing::emd_oracle(X, Y)));
    }
    int fps_mismatch = 0;
    for (int i = 0; i < 100; ++i) {
        const Index n = static_cast<Index>(size(rng));
        const PointCloud c = testing::random_cloud(n, 5000 + i);
        const Index k = std::uniform_int_distribution<Index>(1, n)(rng);
        const Index start = std::uniform_int_distribution<Index>(0, n - 1)(rng);
        if (farthest_point_sample_from(c, k, start) != testing::fps_oracle(c, k, start)) ++fps_mismatch;
    }
    const double secs = seconds_since(t0);
    report(2, chamfer_err <= 1e-12 && emd_err <= 1e-12 && fps_mismatch == 0 && secs < 60,
           "chamfer max error " + fmt(chamfer_err) + " (200 pairs), EMD max error " + fmt(emd_err) +
               " (100 pairs), FPS mismatches " + std::to_string(fps_mismatch) + "/100, " + fmt(secs) + " s");
}

void closed_forms() {
    auto g = [](double d) { return lsgan_generator_loss(Tensor::scalar(d)).item(); };
    auto dl = [](double f, double r) { return lsgan_discriminator_loss(Tensor::scalar(f), Tensor::scalar(r)).item(); };
    const bool gan_ok = g(1.0) == 0.0 && g(0.0) == 0.5 && dl(0.0, 1.0) == 0.0 && dl(1.0, 1.0) == 0.5 && dl(1.0, 0.0) == 1.0;

    std::mt19937_64 rng(60);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd f(64, 8);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(rng);
    const double self = std::abs(fpd(f, f));
    const Eigen::MatrixXd c1 = Eigen::Vector2d(4, 1).asDiagonal(), c2 = Eigen::Vector2d(1, 4).asDiagonal();
    const Eigen::VectorXd mu = Eigen::Vector2d(0.1, 0.2);
    const double diag = frechet_distance(mu, c1, mu, c2);
    report(3, gan_ok && self <= 1e-8 && std::abs(diag - 2.0) < 1e-10,
           std::string("LS-GAN values ") + (gan_ok ? "match" : "differ") + ", FPD(A,A) = " + fmt(self) +
               ", FD(diag(4,1), diag(1,4)) = " + fmt(diag));
}

void full_scale_shapes() {
    NetConfig net = NetConfig::paper_scale();
    const auto params = GeneratorParams::create(net, 70);
    const std::size_t count = parameter_count(params.named_parameters());
    const PointCloud p = testing::random_cloud(2048, 71, 0.5);
    std::string sizes;
    bool ok = true;
    NoGradGuard no_grad;
    const Index expected[] = {2048, 4096, 8192, 16384};
    for (Index it = 1; it <= 4; ++it) {
        net.iterations = it;
        const Completion c = complete(p, params, net, 72);
        ok = ok && c.synthesis.extent(0) == 1024 && c.dense.extent(0) == expected[it - 1] &&
             parameter_count(GeneratorParams::create(net, 70).named_parameters()) == count;
        sizes += (it > 1 ? "/" : "") + std::to_string(c.dense.extent(0));
    }
    report(4, ok, "P_S 1024, dense sizes " + sizes + ", " + std::to_string(count) + " generator parameters at every depth");
}

void self_supervision() {
    const PointCloud p = testing::random_cloud(400, 80, 0.5);
    std::multiset<std::array<double, 3>> full;
    for (Eigen::Index i = 0; i < p.rows(); ++i) full.insert({p(i, 0), p(i, 1), p(i, 2)});
    bool sub = true;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto pair = resample_partial(p, RemovalSpec::fraction_of(0.25), s);
        auto pool = full;
        for (Eigen::Index i = 0; i < pair.input.rows(); ++i) {
            const auto it = pool.find({pair.input(i, 0), pair.input(i, 1), pair.input(i, 2)});
            if (it == pool.end()) sub = false;
            else pool.erase(it);
        }
        sub = sub && pair.input.rows() < p.rows() && pair.target == p;
        const auto view = carve_partial_view(p, RemovalSpec::within_radius(0.3), s);
        for (Eigen::Index i = 0; i < view.kept.rows(); ++i) sub = sub && (view.kept.row(i) - view.center).norm() > 0.3;
    }

    TrainingPair a{testing::random_cloud(100, 81), testing::random_cloud(50, 82), PairSource::Labeled, "a"};
    TrainingPair b{testing::random_cloud(100, 83), testing::random_cloud(50, 84), PairSource::Labeled, "b"};
    const auto m = mixup(a, b, 1, 1, 85, 0.4);
    std::multiset<std::array<double, 3>> sa;
    for (Eigen::Index i = 0; i < a.input.rows(); ++i) sa.insert({a.input(i, 0), a.input(i, 1), a.input(i, 2)});
    Index from_a = 0;
    for (Eigen::Index i = 0; i < m.input.rows(); ++i) from_a += sa.count({m.input(i, 0), m.input(i, 1), m.input(i, 2)}) ? 1 : 0;

    std::vector<TrainingPair> labeled;
    for (std::uint64_t i = 0; i < 10; ++i) labeled.push_back({testing::random_cloud(60, 90 + i), testing::random_cloud(80, 190 + i), PairSource::Labeled, "c"});
    const auto set = build_training_set(labeled, 0.3, {true, true}, RemovalSpec::fraction_of(0.25), {1, 1}, 86);
    const auto n_labeled = std::count_if(set.begin(), set.end(), [](const auto& q) { return q.source == PairSource::Labeled; });

    report(5, sub && from_a == 40 && m.input.rows() == 100 && set.size() == 10 && n_labeled == 3,
           std::string("resampled inputs ") + (sub ? "are" : "are not") + " strict sub-multisets, mixup 0.4 takes " +
               std::to_string(from_a) + "/100 from the first pair, ratio 0.3 keeps " + std::to_string(n_labeled) +
               "/10 labeled");
}

struct SmokeResult {
    double before = 0, after = 0, secs = 0;
    std::vector<LossLogRow> log;
};

SmokeResult smoke(const TrainConfig& tc) {
    const NetConfig net;
    const auto spec = RemovalSpec::fraction_of(0.25);
    const auto train = procedural_pairs(200, net.output_points(), spec, 11);
    const auto test = procedural_pairs(20, net.output_points(), spec, 12);
    const auto t0 = Clock::now();
    auto init = TrainingState::initialize(net, tc.seed);
    const auto epoch_set = build_training_set(train, tc.labeled_ratio, {tc.resampling, tc.mixup}, tc.removal,
                                              {tc.mixup_beta_a, tc.mixup_beta_b}, derive_seed(tc.seed, 700, 0));
    init.mean_shapes = compute_mean_shapes(epoch_set, init.generator);
    SmokeResult r;
    r.before = evaluate(init, test, tc).overall.get("cd2").value();
    auto fitted = fit(train, net, tc);
    r.after = evaluate(fitted.state, test, tc).overall.get("cd2").value();
    r.secs = seconds_since(t0);
    r.log = std::move(fitted.log);
    return r;
}

TrainConfig smoke_config() {
    TrainConfig tc;
    tc.epochs = 1000;
    tc.max_iterations = 500;
    tc.eval_emd = false;
    return tc;
}

std::vector<std::string> lines(const std::vector<LossLogRow>& log) {
    std::vector<std::string> out;
    for (const auto& r : log) out.push_back(format_loss_row(r));
    return out;
}

void supervised_smoke() {
    TrainConfig tc = smoke_config();
    const auto r = smoke(tc);
    tc.max_iterations = 20;
    const auto prefix = fit(procedural_pairs(200, NetConfig{}.output_points(), RemovalSpec::fraction_of(0.25), 11),
                            NetConfig{}, tc);
    auto head = lines(r.log);
    head.resize(std::min<std::size_t>(head.size(), 20));
    const bool same = lines(prefix.log) == head;
    const double ratio = r.after / r.before;
    report(6, ratio <= 0.5 && r.secs < 900 && same,
           "test CD-2 " + fmt(r.before) + " -> " + fmt(r.after) + " (ratio " + fmt(ratio) + ") after 500 iterations in " +
               fmt(r.secs) + " s, rerun prefix " + (same ? "identical" : "differs"));
}

void selfsup_smoke() {
    TrainConfig tc = smoke_config();
    tc.labeled_ratio = 0.0;
    tc.resampling = true;
    tc.mixup = true;
    const auto r = smoke(tc);
    const double gain = 1.0 - r.after / r.before;
    report(7, gain >= 0.25, "no labeled pairs: test CD-2 " + fmt(r.before) + " -> " + fmt(r.after) + " (" +
                                fmt(100 * gain) + "% better) in " + fmt(r.secs) + " s");
}

void ablation() {
    const fs::path out = fs::temp_directory_path() / "crn_acceptance_ablate.csv";
    std::ostringstream so, se;
    const auto t0 = Clock::now();
    const int code = run_command({"ablate", "--out", out.string()}, so, se);
    std::ifstream in(out);
    std::vector<std::string> rows;
    for (std::string l; std::getline(in, l);) rows.push_back(l);
    auto fields = [](const std::string& l) { return std::count(l.begin(), l.end(), ',') + 1; };
    bool well_formed = rows.size() == 14;
    std::set<std::string> names;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        well_formed = well_formed && fields(rows[i]) == fields(rows[0]);
        names.insert(rows[i].substr(0, rows[i].find(',', rows[i].find(',') + 1)));
    }
    fs::remove(out);
    report(8, code == 0 && well_formed && names.size() == 13,
           "ablate exit " + std::to_string(code) + ", " + std::to_string(rows.empty() ? 0 : rows.size() - 1) +
               " distinct rows, " + fmt(seconds_since(t0)) + " s" + (se.str().empty() ? "" : ", stderr: " + se.str()));
}

void reproducibility() {
    const NetConfig net = testing::tiny_net();
    const auto data = testing::tiny_dataset(8);
    TrainConfig tc = testing::tiny_train();
    tc.epochs = 3;
    tc.mixup = true;
    tc.labeled_ratio = 0.5;
    tc.resampling = true;
    const fs::path dir = fs::temp_directory_path() / "crn_acceptance_ckpt";
    fs::remove_all(dir);
    FitOptions opts;
    opts.checkpoint_dir = dir;
    const auto a = fit(data, net, tc, opts);
    const auto b = fit(data, net, tc);
    const bool logs = lines(a.log) == lines(b.log);
    const auto resumed = resume(load_checkpoint(dir / "epoch_0001.ckpt"), data, tc);
    auto tail = lines(a.log);
    tail.erase(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() - resumed.log.size()));
    const bool resume_ok = lines(resumed.log) == tail && serialize_checkpoint(resumed.state) == serialize_checkpoint(a.state);
    fs::remove_all(dir);
    report(9, logs && resume_ok,
           std::string("repeated runs ") + (logs ? "bit-identical" : "differ") + ", resume from epoch 1 " +
               (resume_ok ? "reproduces" : "diverges from") + " the uninterrupted run");
}

}  // namespace

int main() {
    criterion(1, gradients);
    criterion(2, oracle_agreement);
    criterion(3, closed_forms);
    criterion(4, full_scale_shapes);
    criterion(5, self_supervision);
    criterion(6, supervised_smoke);
    criterion(7, selfsup_smoke);
    criterion(8, ablation);
    criterion(9, reproducibility);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
