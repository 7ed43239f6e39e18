#pragma once

// Training-pair construction: partial-view synthesis, the resampling and
// MixUp self-supervision strategies, and hybrid training-set assembly.

#include "crn/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crn {

enum class PairSource { Labeled, Resampled, Mixed };

std::string_view to_string(PairSource s);
PairSource parse_pair_source(std::string_view text);

struct TrainingPair {
    PointCloud input;
    PointCloud target;
    PairSource source = PairSource::Labeled;
    std::string category;
};

struct RemovalSpec {
    enum class Center { UnitSphereDirection, CloudPoint };
    // Fraction removes floor(fraction * size) nearest points, a size-relative
    // form of FixedCount.
    enum class Mode { FixedCount, Fraction, Radius };

    Center center = Center::UnitSphereDirection;
    Mode mode = Mode::Fraction;
    Index n_remove = 0;
    double fraction = 0.25;
    double radius = 0.2;

    static RemovalSpec fixed_count(Index n, Center c = Center::UnitSphereDirection);
    static RemovalSpec fraction_of(double f, Center c = Center::UnitSphereDirection);
    static RemovalSpec within_radius(double r, Center c = Center::CloudPoint);
};

struct PartialView {
    PointCloud kept;
    std::vector<Index> kept_indices;
    std::vector<Index> removed_indices;
    Eigen::RowVector3d center;
};

// Removes a region around a seeded center; survivors keep their order.
PartialView carve_partial_view(const PointCloud& complete, const RemovalSpec& spec, std::uint64_t seed);
PointCloud make_partial_view(const PointCloud& complete, const RemovalSpec& spec, std::uint64_t seed);

// (P', P): a more incomplete copy of P as input, P itself as target.
TrainingPair resample_partial(const PointCloud& P, const RemovalSpec& spec, std::uint64_t seed,
                              std::string category = {});

// gamma ~ Beta(beta_a, beta_b) unless overridden.
double sample_beta(double a, double b, std::uint64_t seed);

// Draws round(gamma n) points from the first pair and the rest from the
// second, for inputs and targets alike.
TrainingPair mixup(const TrainingPair& pair1, const TrainingPair& pair2, double beta_a, double beta_b,
                   std::uint64_t seed, std::optional<double> gamma_override = std::nullopt);

struct StrategyToggles {
    bool resampling = true;
    bool mixup = true;
};

// Keeps floor(ratio N) labeled pairs and fills the rest from the
// self-supervision strategies. Output size always equals input size.
std::vector<TrainingPair> build_training_set(const std::vector<TrainingPair>& labeled_pairs, double labeled_ratio,
                                             StrategyToggles toggles, const RemovalSpec& spec,
                                             std::pair<double, double> beta, std::uint64_t seed);

// Labeled (partial, complete) pairs over procedural shapes, cycling through
// every shape kind. Complete clouds hold `points` points.
std::vector<TrainingPair> procedural_pairs(Index count, Index points, const RemovalSpec& spec, std::uint64_t seed);

}  // namespace crn
