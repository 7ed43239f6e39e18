#pragma once

// Two-branch cascaded refinement network.
//
// Completion branch: shared encoder -> fully connected coarse decoder ->
// synthesis input (partial points, mirrored, farthest-point subsampled, plus
// the coarse points) -> the lifting module applied `iterations` times with a
// single weight set. Partial branch: the same encoder followed by a fully
// connected decoder that reproduces the input. The discriminator scores
// local patches gathered around farthest-point seeds at three radii.

#include "crn/geometry.hpp"
#include "crn/tensor.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace crn {

using Widths = std::vector<Index>;

struct NetConfig {
    Index input_points = 256;  // N: encoder input and partial decoder output
    Index coarse_points = 64;  // N_c
    Index feature_dim = 128;
    Widths encoder_stage1{64, 128};
    Widths encoder_stage2{256};  // feature_dim is appended as the last layer
    Widths coarse_hidden{256, 256};
    Widths lifting_pre{128, 64};
    Widths contraction{64, 128};
    Widths expansion{64};
    Widths offset_hidden{64};
    int iterations = 2;

    bool mirror = true;
    bool contraction_expansion = true;
    bool discriminator = true;

    double grid_lo = -1.0;
    double grid_hi = 1.0;
    MirrorPlane mirror_plane = MirrorPlane::XY;

    Index disc_seeds = 32;
    std::array<double, 3> disc_radii{0.1, 0.2, 0.4};
    std::array<Index, 3> disc_neighbors{8, 12, 24};
    std::array<Widths, 3> disc_mlps{Widths{16, 16, 32}, Widths{32, 32, 64}, Widths{32, 48, 64}};

    static NetConfig desk_scale() { return {}; }
    static NetConfig paper_scale();

    Index synthesis_points() const { return 2 * coarse_points; }
    Index output_points() const { return synthesis_points() << iterations; }

    // Throws ContractError naming the first violated constraint.
    void validate() const;
};

struct Layer {
    Tensor weight;  // [fan_in, fan_out]
    Tensor bias;    // [fan_out]
};

// Per-row fully connected stack.
struct Mlp {
    std::vector<Layer> layers;

    static Mlp create(Index fan_in, const Widths& widths, std::uint64_t seed);
    // ReLU after every layer, or after all but the last.
    Tensor forward(const Tensor& x, bool relu_last) const;
    Index out_width() const { return layers.back().weight.extent(1); }
};

using NamedParameters = std::vector<std::pair<std::string, Tensor>>;

struct GeneratorParams {
    Mlp encoder_stage1;
    Mlp encoder_stage2;
    Mlp coarse_decoder;
    Mlp lifting_pre;
    Mlp contraction;
    Mlp expansion;
    Mlp offset_head;
    Mlp partial_decoder;

    static GeneratorParams create(const NetConfig& config, std::uint64_t seed);
    NamedParameters named_parameters() const;
};

struct DiscriminatorParams {
    std::array<Mlp, 3> scales;
    Layer head;

    static DiscriminatorParams create(const NetConfig& config, std::uint64_t seed);
    NamedParameters named_parameters() const;
};

std::size_t parameter_count(const NamedParameters& params);
void set_requires_grad(const NamedParameters& params, bool on);
void zero_grad(const NamedParameters& params);

// Per-category mean latent vectors with a global fallback.
class MeanShapeTable {
public:
    MeanShapeTable() = default;
    MeanShapeTable(std::map<std::string, Eigen::VectorXd> by_category, Eigen::VectorXd global);

    bool empty() const { return global_.size() == 0; }
    const std::map<std::string, Eigen::VectorXd>& by_category() const { return by_category_; }
    const Eigen::VectorXd& global() const { return global_; }

    // Unknown categories fall back to the global mean (logged once each).
    Tensor lookup(const std::string& category, Index dim) const;

private:
    std::map<std::string, Eigen::VectorXd> by_category_;
    Eigen::VectorXd global_;
    mutable std::set<std::string> warned_;
};

// Global feature f of shape [feature_dim].
Tensor encode(const Tensor& points, const GeneratorParams& params);
Tensor encode(const PointCloud& points, const GeneratorParams& params);

// [N_c, 3]
Tensor decode_coarse(const Tensor& feature, const GeneratorParams& params, const NetConfig& config);

// Farthest-point subsample of P (and its mirror image) stacked on top of the
// coarse points: [2 N_c, 3].
Tensor assemble_synthesis_input(const PointCloud& P, const Tensor& coarse, const NetConfig& config,
                                std::uint64_t seed);

// One refinement step: [n, 3] -> [2n, 3].
Tensor lifting_module(const Tensor& points, const Tensor& feature, const Tensor& mean_shape,
                      const GeneratorParams& params, const NetConfig& config, std::uint64_t seed);

Tensor dense_reconstruct(const Tensor& synthesis_input, const Tensor& feature, const Tensor& mean_shape,
                         int iterations, const GeneratorParams& params, const NetConfig& config,
                         std::uint64_t seed);

struct Completion {
    Tensor feature;
    Tensor coarse;     // [N_c, 3]
    Tensor synthesis;  // [2 N_c, 3]
    Tensor dense;      // [2 N_c 2^iterations, 3]
};

// An undefined mean_shape is treated as zeros.
Completion complete(const PointCloud& P, const GeneratorParams& params, const NetConfig& config,
                    std::uint64_t seed, const Tensor& mean_shape = {});

// Auto-encoder branch: [size(P), 3].
Tensor reconstruct_partial(const PointCloud& P, const GeneratorParams& params, const NetConfig& config);
Tensor reconstruct_partial_from_feature(const Tensor& feature, Index n, const GeneratorParams& params,
                                        const NetConfig& config);

struct DiscriminatorOutput {
    Tensor patch_scores;  // [seeds, 1]
    Tensor mean_score;    // scalar
};

// Scores patches around the given seed indices.
DiscriminatorOutput discriminate_at(const Tensor& Q, const std::vector<Index>& seeds,
                                    const DiscriminatorParams& params, const NetConfig& config);
DiscriminatorOutput discriminate(const Tensor& Q, const DiscriminatorParams& params, const NetConfig& config,
                                 std::uint64_t seed);

}  // namespace crn
