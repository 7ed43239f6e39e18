#pragma once

// Point-set kernels: sampling, neighborhood queries, reflection and folding
// seeds. Clouds are N x 3 row-major Eigen matrices; the kernels accept any
// Eigen expression with three columns.

#include "crn/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace crn {

template <typename Scalar>
using PointCloudT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using PointCloud = PointCloudT<double>;

using GridSeeds = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

using Index = std::size_t;

enum class MirrorPlane { XY, YZ, XZ };

namespace detail {

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const Eigen::MatrixBase<DerivedA>& cloud_a, Eigen::Index i,
                                           const Eigen::MatrixBase<DerivedB>& cloud_b, Eigen::Index j) {
    const auto dx = cloud_a(i, 0) - cloud_b(j, 0);
    const auto dy = cloud_a(i, 1) - cloud_b(j, 1);
    const auto dz = cloud_a(i, 2) - cloud_b(j, 2);
    return dx * dx + dy * dy + dz * dz;
}

inline void require_nonempty(Eigen::Index n, const char* what) {
    if (n < 1) throw ContractError(std::string(what) + ": empty point cloud");
}

}  // namespace detail

// Greedy max-min sampling starting from a given index. Ties go to the
// lowest index.
template <typename Derived>
std::vector<Index> farthest_point_sample_from(const Eigen::MatrixBase<Derived>& cloud, Index k,
                                              Index start) {
    using Scalar = typename Derived::Scalar;
    const auto n = static_cast<Index>(cloud.rows());
    if (k < 1 || k > n) {
        throw ContractError("farthest_point_sample: k = " + std::to_string(k) +
                            " outside [1, " + std::to_string(n) + "]");
    }
    if (start >= n) throw ContractError("farthest_point_sample: start index out of range");

    std::vector<Index> picked{start};
    picked.reserve(k);
    std::vector<Scalar> min_d(n, std::numeric_limits<Scalar>::infinity());
    Index last = start;
    while (picked.size() < k) {
        Index best = 0;
        Scalar best_d = -1;
        for (Index i = 0; i < n; ++i) {
            const Scalar d = detail::squared_distance(cloud, static_cast<Eigen::Index>(i), cloud,
                                                      static_cast<Eigen::Index>(last));
            if (d < min_d[i]) min_d[i] = d;
            if (min_d[i] > best_d) {
                best_d = min_d[i];
                best = i;
            }
        }
        picked.push_back(best);
        last = best;
    }
    return picked;
}

// The first index is drawn uniformly from the seed.
template <typename Derived>
std::vector<Index> farthest_point_sample(const Eigen::MatrixBase<Derived>& cloud, Index k,
                                         std::uint64_t seed) {
    const auto n = static_cast<Index>(cloud.rows());
    if (k < 1 || k > n) {
        throw ContractError("farthest_point_sample: k = " + std::to_string(k) +
                            " outside [1, " + std::to_string(n) + "]");
    }
    std::mt19937_64 rng(seed);
    const Index start = std::uniform_int_distribution<Index>(0, n - 1)(rng);
    return farthest_point_sample_from(cloud, k, start);
}

// For each center: indices within `radius` (inclusive) in ascending order,
// truncated to K. Short lists repeat their first entry; an empty ball falls
// back to the nearest point overall.
template <typename DerivedC, typename DerivedQ>
std::vector<std::vector<Index>> ball_query(const Eigen::MatrixBase<DerivedC>& cloud,
                                           const Eigen::MatrixBase<DerivedQ>& centers,
                                           double radius, Index K) {
    detail::require_nonempty(cloud.rows(), "ball_query");
    if (!(radius > 0.0)) throw ContractError("ball_query: radius must be positive");
    if (K < 1) throw ContractError("ball_query: K must be at least 1");
    const double r2 = radius * radius;
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(centers.rows()));
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        auto& list = out[static_cast<std::size_t>(c)];
        list.reserve(K);
        Index nearest = 0;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
            const double d = static_cast<double>(detail::squared_distance(cloud, i, centers, c));
            if (d < nearest_d) {
                nearest_d = d;
                nearest = static_cast<Index>(i);
            }
            if (d <= r2 && list.size() < K) list.push_back(static_cast<Index>(i));
        }
        if (list.empty()) list.push_back(nearest);
        list.resize(K, list.front());
    }
    return out;
}

template <typename Scalar>
struct NearestNeighbors {
    std::vector<Scalar> distance;          // Euclidean
    std::vector<Scalar> squared_distance;  // same pairs, before the root
    std::vector<Index> index;
};

// Exact nearest neighbor in `Y` for every point of `X`, lowest index on ties.
template <typename DerivedX, typename DerivedY>
NearestNeighbors<typename DerivedX::Scalar> nearest_neighbor_dists(const Eigen::MatrixBase<DerivedX>& X,
                                                                   const Eigen::MatrixBase<DerivedY>& Y) {
    using Scalar = typename DerivedX::Scalar;
    detail::require_nonempty(X.rows(), "nearest_neighbor_dists");
    detail::require_nonempty(Y.rows(), "nearest_neighbor_dists");
    const auto n = static_cast<std::size_t>(X.rows());
    NearestNeighbors<Scalar> nn;
    nn.distance.resize(n);
    nn.squared_distance.resize(n);
    nn.index.resize(n);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Scalar best = std::numeric_limits<Scalar>::infinity();
        Index arg = 0;
        for (Eigen::Index j = 0; j < Y.rows(); ++j) {
            const Scalar d = detail::squared_distance(X, i, Y, j);
            if (d < best) {
                best = d;
                arg = static_cast<Index>(j);
            }
        }
        const auto u = static_cast<std::size_t>(i);
        nn.squared_distance[u] = best;
        nn.distance[u] = std::sqrt(best);
        nn.index[u] = arg;
    }
    return nn;
}

// Indices of a uniform sample of size m: without replacement when m <= n,
// otherwise a full permutation followed by draws with replacement.
std::vector<Index> random_subsample_indices(Index n, Index m, std::uint64_t seed);

template <typename Derived>
PointCloudT<typename Derived::Scalar> take_rows(const Eigen::MatrixBase<Derived>& cloud,
                                                const std::vector<Index>& rows) {
    PointCloudT<typename Derived::Scalar> out(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = cloud.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

template <typename Derived>
PointCloudT<typename Derived::Scalar> random_subsample(const Eigen::MatrixBase<Derived>& cloud, Index m,
                                                       std::uint64_t seed) {
    detail::require_nonempty(cloud.rows(), "random_subsample");
    return take_rows(cloud, random_subsample_indices(static_cast<Index>(cloud.rows()), m, seed));
}

inline int mirror_axis(MirrorPlane plane) {
    switch (plane) {
        case MirrorPlane::XY: return 2;
        case MirrorPlane::YZ: return 0;
        case MirrorPlane::XZ: return 1;
    }
    return 2;
}

// Reflection across an axis-aligned plane through the origin.
template <typename Derived>
PointCloudT<typename Derived::Scalar> mirror(const Eigen::MatrixBase<Derived>& cloud,
                                             MirrorPlane plane = MirrorPlane::XY) {
    PointCloudT<typename Derived::Scalar> out = cloud;
    out.col(mirror_axis(plane)) *= -1;
    return out;
}

// n distinct 2D vectors drawn uniformly from [lo, hi]^2.
GridSeeds grid_seeds(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace crn
