#include "crn/cli.hpp"

#include "crn/checkpoint.hpp"
#include "crn/config.hpp"
#include "crn/errors.hpp"
#include "crn/io.hpp"
#include "crn/losses.hpp"
#include "crn/metrics.hpp"
#include "crn/random.hpp"
#include "crn/selfsup.hpp"
#include "crn/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace crn {

namespace fs = std::filesystem;

namespace {

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("CRN_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    RunConfig probe;
    apply_config_value(probe, "seed", raw);
    return probe.train.seed;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig c = path.empty() ? RunConfig{} : load_config(path);
    if (const auto s = env_seed()) c.train.seed = *s;
    return c;
}

void write_csv(const fs::path& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
    } else {
        write_text_file(path, text);
    }
}

std::string metric_row(const std::string& scope, const MetricsReport& r) { return scope + "," + r.to_csv_row() + "\n"; }

std::string evaluation_csv(const Evaluation& ev) {
    std::string text = "scope," + MetricsReport::csv_header() + "\n";
    text += metric_row("overall", ev.overall);
    for (const auto& [cat, r] : ev.per_category) text += metric_row(cat.empty() ? "-" : cat, r);
    return text;
}

// ---- gen-data -----------------------------------------------------------------

struct GenDataArgs {
    std::string out;
    Index count = 200;
    Index points = 512;
    double removal = 0.25;
    std::optional<std::uint64_t> seed;
};

void gen_data(const GenDataArgs& a, std::ostream& out) {
    if (a.out.empty()) throw ValueError("gen-data: --out is required");
    const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(1);
    const auto pairs = procedural_pairs(a.count, a.points, RemovalSpec::fraction_of(a.removal), seed);
    write_dataset(a.out, pairs);
    out << "wrote " << pairs.size() << " pairs to " << (fs::path(a.out) / "manifest.txt").string() << "\n";
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string data;
    std::string test;
    std::string out;
    std::optional<std::uint64_t> max_iterations;
};

void train(const TrainArgs& a, std::ostream& out) {
    RunConfig c = load_run_config(a.config);
    if (!a.data.empty()) c.train_data = a.data;
    if (!a.test.empty()) c.test_data = a.test;
    if (!a.out.empty()) c.out_dir = a.out;
    if (a.max_iterations) c.train.max_iterations = *a.max_iterations;
    if (c.train_data.empty()) throw ValueError("train: no training manifest (set train_data or --data)");
    if (c.out_dir.empty()) throw ValueError("train: no output directory (set out_dir or --out)");

    const fs::path dir = c.out_dir;
    fs::create_directories(dir);
    write_text_file(dir / "config.txt", dump_config(c));
    const auto dataset = read_manifest(c.train_data);
    std::vector<TrainingPair> test;
    if (!c.test_data.empty()) test = read_manifest(c.test_data);

    std::ofstream log(dir / "loss_log.csv", std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write " + (dir / "loss_log.csv").string());
    log << loss_log_header() << "\n";
    FitOptions options;
    options.checkpoint_dir = dir / "checkpoints";
    if (!test.empty()) options.validation = &test;
    options.on_step = [&log](const LossLogRow& row) { log << format_loss_row(row) << "\n"; };

    const FitResult result = fit(dataset, c.net, c.train, options);
    log.close();
    save_checkpoint(dir / "final.ckpt", result.state);

    if (!result.epoch_metrics.empty()) {
        std::string text = "epoch," + MetricsReport::csv_header() + "\n";
        for (std::size_t e = 0; e < result.epoch_metrics.size(); ++e) {
            text += std::to_string(e + 1) + "," + result.epoch_metrics[e].to_csv_row() + "\n";
        }
        write_text_file(dir / "metrics.csv", text);
    }
    out << "trained " << result.state.iteration << " iterations over " << result.state.epoch << " epochs; "
        << (dir / "final.ckpt").string() << "\n";
}

// ---- complete -----------------------------------------------------------------

struct CompleteArgs {
    std::string in;
    std::string out;
    std::string ckpt;
    std::string coarse_out;
    std::string category;
    std::optional<int> iters;
    std::optional<std::uint64_t> seed;
};

void complete_cloud(const CompleteArgs& a, std::ostream& out) {
    TrainingState state = load_checkpoint(a.ckpt);
    NetConfig net = state.net;
    if (a.iters) {
        if (*a.iters < 1 || *a.iters > 4) throw ValueError("complete: --iters must be in {1, 2, 3, 4}");
        net.iterations = *a.iters;
    }
    const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(1);
    const PointCloud input = prepare_input(read_cloud(a.in), net, derive_seed(seed, 900));
    NoGradGuard no_grad;
    const Tensor prior = state.mean_shapes.lookup(a.category, net.feature_dim);
    const Completion result = complete(input, state.generator, net, derive_seed(seed, 901), prior);
    write_cloud(tensor_cloud(result.dense), a.out);
    if (!a.coarse_out.empty()) write_cloud(tensor_cloud(result.coarse), a.coarse_out);
    out << "wrote " << result.dense.extent(0) << " points to " << a.out << "\n";
}

// ---- evaluate -----------------------------------------------------------------

struct EvaluateArgs {
    std::string pred;
    std::string gt;
    std::string input;
    std::string ckpt;
    std::string data;
    std::string config;
    std::string out;
    double tau = kDefaultMatchThreshold;
};

void evaluate_command(const EvaluateArgs& a, std::ostream& out) {
    RunConfig c = load_run_config(a.config);
    c.train.match_threshold = a.tau;
    Evaluation ev;
    if (!a.pred.empty() || !a.gt.empty()) {
        if (a.pred.empty() || a.gt.empty()) throw ValueError("evaluate: --pred and --gt go together");
        const PointCloud pred = read_cloud(a.pred);
        TrainingPair pair{a.input.empty() ? PointCloud{} : read_cloud(a.input), read_cloud(a.gt), PairSource::Labeled, {}};
        ev = evaluate_predictions({pred}, {pair}, c.train, {});
        ev.per_category.clear();
    } else {
        if (a.ckpt.empty() || a.data.empty()) {
            throw ValueError("evaluate: pass --pred/--gt or --ckpt/--data");
        }
        const TrainingState state = load_checkpoint(a.ckpt);
        ev = evaluate(state, read_manifest(a.data), c.train);
    }
    write_csv(a.out, evaluation_csv(ev), out);
}

// ---- ablate -------------------------------------------------------------------

struct AblateArgs {
    std::string config;
    std::string data;
    std::string test;
    std::string out;
    Index shapes = 40;
    Index test_shapes = 10;
    Index points = 0;  // 0: the net's output size
    std::uint64_t max_iterations = 20;
};

struct AblationRow {
    std::string study;
    std::string name;
    bool mirror;
    bool ce;
    bool disc;
    double ratio;
    bool resampling;
    bool mixup;
};

std::vector<AblationRow> ablation_rows() {
    std::vector<AblationRow> rows;
    for (int m = 0; m < 8; ++m) {
        const bool mirror = m & 4, ce = m & 2, disc = m & 1;
        std::string name = std::string(mirror ? "M" : "-") + (ce ? "C" : "-") + (disc ? "D" : "-");
        rows.push_back({"components", name, mirror, ce, disc, 1.0, false, false});
    }
    rows.push_back({"strategies", "full-supervision", true, true, true, 1.0, false, false});
    rows.push_back({"strategies", "labeled-only", true, true, true, 0.1, false, false});
    rows.push_back({"strategies", "resampling", true, true, true, 0.1, true, false});
    rows.push_back({"strategies", "mixup", true, true, true, 0.1, false, true});
    rows.push_back({"strategies", "resampling+mixup", true, true, true, 0.1, true, true});
    return rows;
}

std::string ablation_header() {
    return "study,name,mirror,contraction_expansion,discriminator,labeled_ratio,resampling,mixup," +
           MetricsReport::csv_header();
}

void ablate(const AblateArgs& a, std::ostream& out) {
    const RunConfig base = load_run_config(a.config);
    const Index points = a.points ? a.points : base.net.output_points();
    const RemovalSpec spec = RemovalSpec::fraction_of(0.25);
    const auto dataset = a.data.empty() ? procedural_pairs(a.shapes, points, spec, derive_seed(base.train.seed, 1000))
                                        : read_manifest(a.data);
    const auto test = a.test.empty() ? procedural_pairs(a.test_shapes, points, spec, derive_seed(base.train.seed, 1001))
                                     : read_manifest(a.test);
    for (const auto& row : ablation_rows()) {
        if (row.ratio * static_cast<double>(dataset.size()) + 1e-9 < 1.0) {
            throw ValueError("ablate: " + std::to_string(dataset.size()) + " training shapes leave no labeled pair at ratio " +
                             format_real(row.ratio) + "; use at least " + std::to_string(static_cast<int>(std::ceil(1.0 / row.ratio - 1e-9))));
        }
    }

    std::string text = ablation_header() + "\n";
    auto flag = [](bool b) { return b ? std::string("1") : std::string("0"); };
    for (const auto& row : ablation_rows()) {
        RunConfig c = base;
        c.net.mirror = row.mirror;
        c.net.contraction_expansion = row.ce;
        c.net.discriminator = row.disc;
        c.train.labeled_ratio = row.ratio;
        c.train.resampling = row.resampling;
        c.train.mixup = row.mixup;
        if (a.max_iterations) c.train.max_iterations = a.max_iterations;
        const FitResult result = fit(dataset, c.net, c.train);
        const Evaluation ev = evaluate(result.state, test, c.train);
        text += row.study + "," + row.name + "," + flag(row.mirror) + "," + flag(row.ce) + "," + flag(row.disc) + "," +
                format_real(row.ratio) + "," + flag(row.resampling) + "," + flag(row.mixup) + "," +
                ev.overall.to_csv_row() + "\n";
    }
    write_csv(a.out, text, out);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Point cloud completion with a cascaded refinement network", "crn"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write procedural (partial, complete) pairs and a manifest");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--count", gen.count, "Number of shapes")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--points", gen.points, "Points per complete cloud")->check(CLI::Range(64, 1 << 20));
    gen_cmd->add_option("--removal", gen.removal, "Fraction removed to form the partial view")->check(CLI::Range(0.0, 0.99));
    gen_cmd->add_option("--seed", gen.seed, "Random seed");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train from a config file");
    train_cmd->add_option("--config", tr.config, "key=value config file");
    train_cmd->add_option("--data", tr.data, "Training manifest (overrides train_data)");
    train_cmd->add_option("--test", tr.test, "Validation manifest (overrides test_data)");
    train_cmd->add_option("--out", tr.out, "Output directory (overrides out_dir)");
    train_cmd->add_option("--max-iterations", tr.max_iterations, "Stop after this many iterations");

    CompleteArgs co;
    auto* complete_cmd = app.add_subcommand("complete", "Complete a single partial cloud");
    complete_cmd->add_option("--in", co.in, "Partial cloud (.xyz or .ply)")->required();
    complete_cmd->add_option("--out", co.out, "Dense output cloud")->required();
    complete_cmd->add_option("--ckpt", co.ckpt, "Checkpoint file")->required();
    complete_cmd->add_option("--coarse-out", co.coarse_out, "Coarse output cloud");
    complete_cmd->add_option("--iters", co.iters, "Lifting iterations (default: as trained)");
    complete_cmd->add_option("--category", co.category, "Category for the mean-shape prior");
    complete_cmd->add_option("--seed", co.seed, "Random seed");

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Write a metrics CSV");
    eval_cmd->add_option("--pred", ev.pred, "Predicted cloud");
    eval_cmd->add_option("--gt", ev.gt, "Ground-truth cloud");
    eval_cmd->add_option("--input", ev.input, "Partial input cloud (enables fidelity)");
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint file");
    eval_cmd->add_option("--data", ev.data, "Test manifest");
    eval_cmd->add_option("--config", ev.config, "key=value config file");
    eval_cmd->add_option("--tau", ev.tau, "Match threshold for accuracy/completeness")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", ev.out, "CSV path (default: stdout)");

    AblateArgs ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the component and strategy ablation matrix");
    ablate_cmd->add_option("--config", ab.config, "Base key=value config file");
    ablate_cmd->add_option("--data", ab.data, "Training manifest (default: procedural)");
    ablate_cmd->add_option("--test", ab.test, "Test manifest (default: procedural)");
    ablate_cmd->add_option("--shapes", ab.shapes, "Procedural training shapes")->check(CLI::PositiveNumber);
    ablate_cmd->add_option("--test-shapes", ab.test_shapes, "Procedural test shapes")->check(CLI::PositiveNumber);
    ablate_cmd->add_option("--points", ab.points, "Points per procedural complete cloud");
    ablate_cmd->add_option("--max-iterations", ab.max_iterations, "Iterations per run (0: full epochs)");
    ablate_cmd->add_option("--out", ab.out, "CSV path (default: stdout)");

    std::vector<const char*> argv{"crn"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*gen_cmd) gen_data(gen, out);
        else if (*train_cmd) train(tr, out);
        else if (*complete_cmd) complete_cloud(co, out);
        else if (*eval_cmd) evaluate_command(ev, out);
        else if (*ablate_cmd) ablate(ab, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace crn
