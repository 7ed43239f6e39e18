#include "crn/selfsup.hpp"

#include "crn/errors.hpp"
#include "crn/random.hpp"
#include "crn/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace crn {

std::string_view to_string(PairSource s) {
    switch (s) {
        case PairSource::Labeled: return "labeled";
        case PairSource::Resampled: return "resampled";
        case PairSource::Mixed: return "mixed";
    }
    return "labeled";
}

PairSource parse_pair_source(std::string_view text) {
    if (text == "labeled") return PairSource::Labeled;
    if (text == "resampled") return PairSource::Resampled;
    if (text == "mixed") return PairSource::Mixed;
    throw ParseError("unknown pair source '" + std::string(text) + "'");
}

RemovalSpec RemovalSpec::fixed_count(Index n, Center c) {
    RemovalSpec s;
    s.center = c;
    s.mode = Mode::FixedCount;
    s.n_remove = n;
    return s;
}

RemovalSpec RemovalSpec::fraction_of(double f, Center c) {
    RemovalSpec s;
    s.center = c;
    s.mode = Mode::Fraction;
    s.fraction = f;
    return s;
}

RemovalSpec RemovalSpec::within_radius(double r, Center c) {
    RemovalSpec s;
    s.center = c;
    s.mode = Mode::Radius;
    s.radius = r;
    return s;
}

PartialView carve_partial_view(const PointCloud& complete, const RemovalSpec& spec, std::uint64_t seed) {
    const auto n = static_cast<Index>(complete.rows());
    if (n == 0) throw ContractError("make_partial_view: empty point cloud");
    std::mt19937_64 rng(seed);

    PartialView view;
    if (spec.center == RemovalSpec::Center::UnitSphereDirection) {
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::RowVector3d dir;
        do {
            dir = Eigen::RowVector3d(g(rng), g(rng), g(rng));
        } while (dir.norm() < 1e-12);
        view.center = dir.normalized();
    } else {
        view.center = complete.row(static_cast<Eigen::Index>(std::uniform_int_distribution<Index>(0, n - 1)(rng)));
    }

    std::vector<double> dist(n);
    for (Index i = 0; i < n; ++i) dist[i] = (complete.row(static_cast<Eigen::Index>(i)) - view.center).norm();

    std::vector<char> removed(n, 0);
    if (spec.mode == RemovalSpec::Mode::Radius) {
        if (!(spec.radius > 0.0)) throw ContractError("make_partial_view: radius must be positive");
        for (Index i = 0; i < n; ++i) removed[i] = dist[i] <= spec.radius;
    } else {
        Index count = spec.n_remove;
        if (spec.mode == RemovalSpec::Mode::Fraction) {
            if (!(spec.fraction >= 0.0 && spec.fraction < 1.0)) {
                throw ContractError("make_partial_view: removal fraction must lie in [0, 1)");
            }
            count = static_cast<Index>(std::floor(spec.fraction * static_cast<double>(n)));
        }
        if (count >= n) {
            throw ContractError("make_partial_view: removing " + std::to_string(count) + " of " +
                                std::to_string(n) + " points would empty the cloud");
        }
        std::vector<Index> order(n);
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&dist](Index a, Index b) { return dist[a] < dist[b]; });
        for (Index i = 0; i < count; ++i) removed[order[i]] = 1;
    }

    for (Index i = 0; i < n; ++i) (removed[i] ? view.removed_indices : view.kept_indices).push_back(i);
    if (view.kept_indices.empty()) throw ContractError("make_partial_view: removal would empty the cloud");
    view.kept = take_rows(complete, view.kept_indices);
    return view;
}

PointCloud make_partial_view(const PointCloud& complete, const RemovalSpec& spec, std::uint64_t seed) {
    return carve_partial_view(complete, spec, seed).kept;
}

TrainingPair resample_partial(const PointCloud& P, const RemovalSpec& spec, std::uint64_t seed,
                              std::string category) {
    return {make_partial_view(P, spec, seed), P, PairSource::Resampled, std::move(category)};
}

double sample_beta(double a, double b, std::uint64_t seed) {
    if (!(a > 0.0 && b > 0.0)) throw ContractError("sample_beta: parameters must be positive");
    std::mt19937_64 rng(seed);
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x + y > 0.0 ? x / (x + y) : 0.5;
}

namespace {

PointCloud blend(const PointCloud& a, const PointCloud& b, double gamma, std::uint64_t seed) {
    const auto n = static_cast<Index>(a.rows());
    const auto from_a = static_cast<Index>(std::lround(gamma * static_cast<double>(n)));
    const Index from_b = n - from_a;
    PointCloud out(static_cast<Eigen::Index>(n), 3);
    if (from_a > 0) {
        out.topRows(static_cast<Eigen::Index>(from_a)) =
            take_rows(a, random_subsample_indices(n, from_a, derive_seed(seed, 1)));
    }
    if (from_b > 0) {
        out.bottomRows(static_cast<Eigen::Index>(from_b)) =
            take_rows(b, random_subsample_indices(static_cast<Index>(b.rows()), from_b, derive_seed(seed, 2)));
    }
    return out;
}

}  // namespace

TrainingPair mixup(const TrainingPair& pair1, const TrainingPair& pair2, double beta_a, double beta_b,
                   std::uint64_t seed, std::optional<double> gamma_override) {
    if (pair1.input.rows() != pair2.input.rows() || pair1.target.rows() != pair2.target.rows()) {
        throw ContractError("mixup: pair sizes differ (inputs " + std::to_string(pair1.input.rows()) + "/" +
                            std::to_string(pair2.input.rows()) + ", targets " + std::to_string(pair1.target.rows()) +
                            "/" + std::to_string(pair2.target.rows()) + ")");
    }
    if (pair1.input.rows() == 0 || pair1.target.rows() == 0) throw ContractError("mixup: empty point cloud");
    const double gamma = gamma_override ? *gamma_override : sample_beta(beta_a, beta_b, derive_seed(seed, 0));
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("mixup: gamma outside [0, 1]");

    TrainingPair out;
    out.input = blend(pair1.input, pair2.input, gamma, derive_seed(seed, 10));
    out.target = blend(pair1.target, pair2.target, gamma, derive_seed(seed, 20));
    out.source = PairSource::Mixed;
    out.category = pair1.category == pair2.category ? pair1.category : pair1.category + "+" + pair2.category;
    return out;
}

namespace {

void shuffle_pairs(std::vector<TrainingPair>& pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = pairs.size(); i > 1; --i) {
        const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::swap(pairs[i - 1], pairs[j]);
    }
}

}  // namespace

std::vector<TrainingPair> build_training_set(const std::vector<TrainingPair>& labeled_pairs, double labeled_ratio,
                                             StrategyToggles toggles, const RemovalSpec& spec,
                                             std::pair<double, double> beta, std::uint64_t seed) {
    if (!(labeled_ratio >= 0.0 && labeled_ratio <= 1.0)) {
        throw ContractError("build_training_set: labeled ratio " + std::to_string(labeled_ratio) +
                            " outside [0, 1]");
    }
    const std::size_t total = labeled_pairs.size();
    if (labeled_ratio == 1.0 && !toggles.resampling && !toggles.mixup) return labeled_pairs;

    // Tolerance keeps e.g. 0.3 * 10 from flooring to 2.
    const auto keep = static_cast<std::size_t>(std::floor(labeled_ratio * static_cast<double>(total) + 1e-9));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, 100));
    for (std::size_t i = total; i > 1; --i) {
        std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    }

    std::vector<TrainingPair> out;
    out.reserve(total);
    for (std::size_t i = 0; i < keep; ++i) {
        TrainingPair p = labeled_pairs[order[i]];
        p.source = PairSource::Labeled;
        out.push_back(std::move(p));
    }
    const std::size_t remainder = total - keep;

    if (remainder > 0) {
        if (!toggles.resampling && !toggles.mixup) {
            if (keep == 0) {
                throw ContractError("build_training_set: no labeled pairs and no self-supervision strategy");
            }
            // Oversample the labeled subset to keep the pair count.
            for (std::size_t i = 0; i < remainder; ++i) out.push_back(out[i % keep]);
        } else {
            const std::size_t n_mixed = toggles.mixup ? (toggles.resampling ? remainder / 2 : remainder) : 0;
            const std::size_t n_resampled = remainder - n_mixed;
            for (std::size_t i = 0; i < n_resampled; ++i) {
                const TrainingPair& src = labeled_pairs[order[keep + i % remainder]];
                out.push_back(resample_partial(src.input, spec, derive_seed(seed, 200, i), src.category));
            }
            const std::size_t pool = out.size();
            if (n_mixed > 0 && pool == 0) {
                throw ContractError("build_training_set: MixUp needs labeled or resampled pairs to blend");
            }
            for (std::size_t i = 0; i < n_mixed; ++i) {
                std::mt19937_64 pick(derive_seed(seed, 300, i));
                std::uniform_int_distribution<std::size_t> any(0, pool - 1);
                const std::size_t a = any(pick);
                std::size_t b = any(pick);
                if (pool > 1) {
                    while (b == a) b = any(pick);
                }
                const TrainingPair& first = out[a];
                TrainingPair second = out[b];
                const auto sub = derive_seed(seed, 400, i);
                if (second.input.rows() != first.input.rows()) {
                    second.input = random_subsample(second.input, static_cast<Index>(first.input.rows()), sub);
                }
                if (second.target.rows() != first.target.rows()) {
                    second.target =
                        random_subsample(second.target, static_cast<Index>(first.target.rows()), sub + 1);
                }
                out.push_back(mixup(first, second, beta.first, beta.second, derive_seed(seed, 500, i)));
            }
        }
    }
    shuffle_pairs(out, derive_seed(seed, 600));
    return out;
}

std::vector<TrainingPair> procedural_pairs(Index count, Index points, const RemovalSpec& spec, std::uint64_t seed) {
    std::vector<TrainingPair> out;
    out.reserve(count);
    for (Index i = 0; i < count; ++i) {
        const ShapeKind kind = kAllShapeKinds[i % kAllShapeKinds.size()];
        SynthShape shape = synth_shape(kind, points, derive_seed(seed, 1, i));
        PointCloud partial = make_partial_view(shape.cloud, spec, derive_seed(seed, 2, i));
        out.push_back({std::move(partial), std::move(shape.cloud), PairSource::Labeled, std::move(shape.category)});
    }
    return out;
}

}  // namespace crn
