#include "crn/model.hpp"

#include "crn/errors.hpp"
#include "crn/random.hpp"

#include <cmath>
#include <iostream>
#include <random>

namespace crn {

NetConfig NetConfig::paper_scale() {
    NetConfig c;
    c.input_points = 2048;
    c.coarse_points = 512;
    c.feature_dim = 1024;
    c.encoder_stage1 = {128, 256};
    c.encoder_stage2 = {512};
    c.coarse_hidden = {1024, 1024};
    c.iterations = 4;
    c.disc_seeds = 256;
    c.disc_neighbors = {16, 32, 128};
    return c;
}

void NetConfig::validate() const {
    auto fail = [](const std::string& what) { throw ContractError("NetConfig: " + what); };
    if (coarse_points < 2) fail("coarse_points must be at least 2");
    if (input_points < 1) fail("input_points must be at least 1");
    if (feature_dim < 1) fail("feature_dim must be at least 1");
    if (iterations < 1 || iterations > 4) fail("iterations must be in {1, 2, 3, 4}");
    for (const Widths* w : {&encoder_stage1, &coarse_hidden, &lifting_pre, &contraction, &expansion, &offset_hidden}) {
        if (w->empty()) fail("every MLP block needs at least one layer");
        for (Index v : *w) {
            if (v == 0) fail("layer widths must be positive");
        }
    }
    if (contraction.back() % 2 != 0) fail("last contraction width must be even");
    if (expansion.back() != lifting_pre.back()) fail("last expansion width must equal last lifting_pre width");
    if (!(grid_lo < grid_hi)) fail("grid range needs lo < hi");
    if (disc_seeds < 1) fail("disc_seeds must be at least 1");
    for (std::size_t s = 0; s < 3; ++s) {
        if (!(disc_radii[s] > 0)) fail("discriminator radii must be positive");
        if (disc_neighbors[s] < 1) fail("discriminator neighbor counts must be positive");
        if (disc_mlps[s].empty()) fail("discriminator MLP blocks need at least one layer");
    }
}

// ---- parameters --------------------------------------------------------------

namespace {

Layer make_layer(Index fan_in, Index fan_out, std::mt19937_64& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-s, s);
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = u(rng);
    return {Tensor::parameter({fan_in, fan_out}, std::move(w)),
            Tensor::parameter({fan_out}, std::vector<double>(fan_out, 0.0))};
}

void append(NamedParameters& out, const std::string& prefix, const Mlp& mlp) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        out.emplace_back(prefix + "." + std::to_string(i) + ".weight", mlp.layers[i].weight);
        out.emplace_back(prefix + "." + std::to_string(i) + ".bias", mlp.layers[i].bias);
    }
}

Widths with_last(Widths w, Index last) {
    w.push_back(last);
    return w;
}

}  // namespace

Mlp Mlp::create(Index fan_in, const Widths& widths, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Mlp mlp;
    for (Index w : widths) {
        mlp.layers.push_back(make_layer(fan_in, w, rng));
        fan_in = w;
    }
    return mlp;
}

Tensor Mlp::forward(const Tensor& x, bool relu_last) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = affine(h, layers[i].weight, layers[i].bias);
        if (relu_last || i + 1 < layers.size()) h = relu(h);
    }
    return h;
}

GeneratorParams GeneratorParams::create(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    GeneratorParams p;
    const Index f = config.feature_dim;
    p.encoder_stage1 = Mlp::create(3, config.encoder_stage1, derive_seed(seed, 1));
    const Index w1 = p.encoder_stage1.out_width();
    p.encoder_stage2 = Mlp::create(2 * w1, with_last(config.encoder_stage2, f), derive_seed(seed, 2));
    p.coarse_decoder = Mlp::create(f, with_last(config.coarse_hidden, 3 * config.coarse_points), derive_seed(seed, 3));
    // Lifting input row: xyz (3) | grid seed (2) | mean shape (f) | global feature (f).
    p.lifting_pre = Mlp::create(5 + 2 * f, config.lifting_pre, derive_seed(seed, 4));
    const Index wp = config.lifting_pre.back();
    p.contraction = Mlp::create(2 * wp, config.contraction, derive_seed(seed, 5));
    p.expansion = Mlp::create(config.contraction.back() / 2, config.expansion, derive_seed(seed, 6));
    p.offset_head = Mlp::create(wp, with_last(config.offset_hidden, 3), derive_seed(seed, 7));
    p.partial_decoder =
        Mlp::create(f, with_last(config.coarse_hidden, 3 * config.input_points), derive_seed(seed, 8));
    return p;
}

NamedParameters GeneratorParams::named_parameters() const {
    NamedParameters out;
    append(out, "encoder.stage1", encoder_stage1);
    append(out, "encoder.stage2", encoder_stage2);
    append(out, "coarse", coarse_decoder);
    append(out, "lifting.pre", lifting_pre);
    append(out, "lifting.contraction", contraction);
    append(out, "lifting.expansion", expansion);
    append(out, "lifting.offset", offset_head);
    append(out, "partial", partial_decoder);
    return out;
}

DiscriminatorParams DiscriminatorParams::create(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    DiscriminatorParams p;
    Index concat_width = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        p.scales[s] = Mlp::create(3, config.disc_mlps[s], derive_seed(seed, 20 + s));
        concat_width += p.scales[s].out_width();
    }
    std::mt19937_64 rng(derive_seed(seed, 30));
    p.head = make_layer(concat_width, 1, rng);
    return p;
}

NamedParameters DiscriminatorParams::named_parameters() const {
    NamedParameters out;
    for (std::size_t s = 0; s < 3; ++s) append(out, "disc.scale" + std::to_string(s), scales[s]);
    out.emplace_back("disc.head.weight", head.weight);
    out.emplace_back("disc.head.bias", head.bias);
    return out;
}

std::size_t parameter_count(const NamedParameters& params) {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

void set_requires_grad(const NamedParameters& params, bool on) {
    for (auto [name, t] : params) t.set_requires_grad(on);
}

void zero_grad(const NamedParameters& params) {
    for (auto [name, t] : params) t.zero_grad();
}

// ---- mean shapes ---------------------------------------------------------------

MeanShapeTable::MeanShapeTable(std::map<std::string, Eigen::VectorXd> by_category, Eigen::VectorXd global)
    : by_category_(std::move(by_category)), global_(std::move(global)) {
    for (const auto& [name, v] : by_category_) {
        if (v.size() != global_.size()) throw DimensionError("MeanShapeTable: inconsistent vector dimension");
        if (!v.allFinite()) throw ValueError("MeanShapeTable: non-finite entry for '" + name + "'");
    }
}

Tensor MeanShapeTable::lookup(const std::string& category, Index dim) const {
    if (empty()) return Tensor::zeros({dim});
    if (static_cast<Index>(global_.size()) != dim) {
        throw DimensionError("MeanShapeTable: vectors have dimension " + std::to_string(global_.size()) +
                             ", expected " + std::to_string(dim));
    }
    const Eigen::VectorXd* v = &global_;
    if (const auto it = by_category_.find(category); it != by_category_.end()) {
        v = &it->second;
    } else if (!category.empty() && warned_.insert(category).second) {
        std::clog << "mean shape: unknown category '" << category << "', using the global mean\n";
    }
    return Tensor::constant({dim}, std::vector<double>(v->data(), v->data() + v->size()));
}

// ---- forward passes ------------------------------------------------------------

Tensor encode(const Tensor& points, const GeneratorParams& params) {
    if (points.rank() != 2 || points.extent(1) != 3) {
        throw DimensionError("encode: expected N x 3 points, got " + shape_to_string(points.shape()));
    }
    const Index n = points.extent(0);
    if (n == 0) throw ContractError("encode: empty point cloud");
    const Tensor local = params.encoder_stage1.forward(points, false);
    const Index w = local.extent(1);
    const Tensor pooled = reshape(reduce_max(local, 0), {1, w});
    const Tensor joined = concat({local, tile(pooled, 0, n)}, 1);
    return reduce_max(params.encoder_stage2.forward(joined, false), 0);
}

Tensor encode(const PointCloud& points, const GeneratorParams& params) {
    return encode(Tensor::from_matrix(points), params);
}

Tensor decode_coarse(const Tensor& feature, const GeneratorParams& params, const NetConfig& config) {
    const Tensor row = reshape(feature, {1, feature.size()});
    return reshape(params.coarse_decoder.forward(row, false), {config.coarse_points, 3});
}

Tensor assemble_synthesis_input(const PointCloud& P, const Tensor& coarse, const NetConfig& config,
                                std::uint64_t seed) {
    if (P.rows() == 0) throw ContractError("assemble_synthesis_input: empty partial cloud");
    if (coarse.rank() != 2 || coarse.extent(0) != config.coarse_points || coarse.extent(1) != 3) {
        throw DimensionError("assemble_synthesis_input: coarse cloud has shape " + shape_to_string(coarse.shape()) +
                             ", expected (" + std::to_string(config.coarse_points) + ", 3)");
    }
    PointCloud pool;
    if (config.mirror) {
        pool.resize(2 * P.rows(), 3);
        pool.topRows(P.rows()) = P;
        pool.bottomRows(P.rows()) = mirror(P, config.mirror_plane);
    } else {
        pool = P;
    }
    const Index need = config.coarse_points;
    const auto picked = static_cast<Index>(pool.rows()) >= need
                            ? farthest_point_sample(pool, need, seed)
                            : random_subsample_indices(static_cast<Index>(pool.rows()), need, seed);
    const Tensor seeds = Tensor::from_matrix(take_rows(pool, picked));
    return concat({seeds, coarse}, 0);
}

Tensor lifting_module(const Tensor& points, const Tensor& feature, const Tensor& mean_shape,
                      const GeneratorParams& params, const NetConfig& config, std::uint64_t seed) {
    if (points.rank() != 2 || points.extent(1) != 3 || points.extent(0) == 0) {
        throw DimensionError("lifting_module: expected n x 3 points, got " + shape_to_string(points.shape()));
    }
    const Index n = points.extent(0);
    const Index f = config.feature_dim;
    if (feature.size() != f || mean_shape.size() != f) {
        throw DimensionError("lifting_module: feature and mean shape must have dimension " + std::to_string(f));
    }

    // Each point repeated twice, duplicates adjacent.
    const Tensor duplicated = reshape(tile(reshape(points, {n, 1, 3}), 1, 2), {2 * n, 3});
    const Tensor grid = Tensor::from_matrix(grid_seeds(2 * n, seed, config.grid_lo, config.grid_hi));
    const Tensor local_in = concat({duplicated, grid}, 1);
    const Tensor global_in = reshape(concat({mean_shape, feature}, 0), {1, 2 * f});

    // The first layer acts on [local | tiled global]; the global rows of its
    // weight are applied once and broadcast instead of tiling 2f columns.
    const Layer& first = params.lifting_pre.layers.front();
    const Tensor local_part = affine(local_in, slice(first.weight, 0, 0, 5), first.bias);
    const Tensor global_part = linear(global_in, slice(first.weight, 0, 5, 5 + 2 * f));
    Tensor h = relu(add(local_part, tile(global_part, 0, 2 * n)));
    for (std::size_t i = 1; i < params.lifting_pre.layers.size(); ++i) {
        const Layer& l = params.lifting_pre.layers[i];
        h = relu(affine(h, l.weight, l.bias));
    }

    if (config.contraction_expansion) {
        const Index w = h.extent(1);
        const Tensor grouped = reshape(h, {n, 2 * w});
        const Tensor contracted = params.contraction.forward(grouped, true);
        const Index c = contracted.extent(1);
        const Tensor split = reshape(contracted, {2 * n, c / 2});
        const Tensor expanded = params.expansion.forward(split, true);
        h = add(h, expanded);
    }

    const Tensor offsets = params.offset_head.forward(h, false);
    return add(duplicated, offsets);
}

Tensor dense_reconstruct(const Tensor& synthesis_input, const Tensor& feature, const Tensor& mean_shape,
                         int iterations, const GeneratorParams& params, const NetConfig& config,
                         std::uint64_t seed) {
    if (iterations < 1 || iterations > 4) {
        throw ContractError("dense_reconstruct: iterations must be in {1, 2, 3, 4}, got " + std::to_string(iterations));
    }
    Tensor points = synthesis_input;
    for (int i = 0; i < iterations; ++i) {
        points = lifting_module(points, feature, mean_shape, params, config, derive_seed(seed, 50, static_cast<std::uint64_t>(i)));
    }
    return points;
}

Completion complete(const PointCloud& P, const GeneratorParams& params, const NetConfig& config,
                    std::uint64_t seed, const Tensor& mean_shape) {
    if (P.rows() == 0) throw ContractError("complete: empty partial cloud");
    Completion out;
    out.feature = encode(P, params);
    out.coarse = decode_coarse(out.feature, params, config);
    out.synthesis = assemble_synthesis_input(P, out.coarse, config, derive_seed(seed, 40));
    const Tensor prior = mean_shape.defined() ? mean_shape : Tensor::zeros({config.feature_dim});
    out.dense = dense_reconstruct(out.synthesis, out.feature, prior, config.iterations, params, config, seed);
    return out;
}

Tensor reconstruct_partial_from_feature(const Tensor& feature, Index n, const GeneratorParams& params,
                                        const NetConfig& config) {
    if (n == 0) throw ContractError("reconstruct_partial: empty partial cloud");
    if (n > config.input_points) {
        throw DimensionError("reconstruct_partial: decoder emits " + std::to_string(config.input_points) +
                             " points, cannot reproduce " + std::to_string(n));
    }
    const Tensor row = reshape(feature, {1, feature.size()});
    const Tensor all = reshape(params.partial_decoder.forward(row, false), {config.input_points, 3});
    return n == config.input_points ? all : slice(all, 0, 0, n);
}

Tensor reconstruct_partial(const PointCloud& P, const GeneratorParams& params, const NetConfig& config) {
    return reconstruct_partial_from_feature(encode(P, params), static_cast<Index>(P.rows()), params, config);
}

DiscriminatorOutput discriminate_at(const Tensor& Q, const std::vector<Index>& seeds,
                                    const DiscriminatorParams& params, const NetConfig& config) {
    if (Q.rank() != 2 || Q.extent(1) != 3) {
        throw DimensionError("discriminate: expected N x 3 points, got " + shape_to_string(Q.shape()));
    }
    const Index s = seeds.size();
    const auto cloud = Q.matrix();
    const PointCloud centers = take_rows(cloud, seeds);

    std::vector<Tensor> per_scale;
    for (std::size_t scale = 0; scale < 3; ++scale) {
        const Index k = config.disc_neighbors[scale];
        const auto groups = ball_query(cloud, centers, config.disc_radii[scale], k);
        std::vector<Index> members, owners;
        members.reserve(s * k);
        owners.reserve(s * k);
        for (Index c = 0; c < s; ++c) {
            members.insert(members.end(), groups[c].begin(), groups[c].end());
            owners.insert(owners.end(), k, seeds[c]);
        }
        // Neighborhood coordinates relative to the patch center.
        const Tensor local = sub(gather_rows(Q, members), gather_rows(Q, owners));
        const Tensor feats = params.scales[scale].forward(local, true);
        const Index w = feats.extent(1);
        per_scale.push_back(reduce_max(reshape(feats, {s, k, w}), 1));
    }
    DiscriminatorOutput out;
    out.patch_scores = affine(concat(per_scale, 1), params.head.weight, params.head.bias);
    out.mean_score = mean(out.patch_scores);
    return out;
}

DiscriminatorOutput discriminate(const Tensor& Q, const DiscriminatorParams& params, const NetConfig& config,
                                 std::uint64_t seed) {
    if (Q.rank() != 2 || Q.extent(0) < config.disc_seeds) {
        throw ContractError("discriminate: cloud of " + std::to_string(Q.rank() == 2 ? Q.extent(0) : 0) +
                            " points is smaller than the seed count " + std::to_string(config.disc_seeds));
    }
    return discriminate_at(Q, farthest_point_sample(Q.matrix(), config.disc_seeds, seed), params, config);
}

}  // namespace crn
