#include "crn/geometry.hpp"

#include <set>
#include <utility>

namespace crn {

std::vector<Index> random_subsample_indices(Index n, Index m, std::uint64_t seed) {
    if (n < 1) throw ContractError("random_subsample: empty point cloud");
    if (m < 1) throw ContractError("random_subsample: sample size must be at least 1");
    std::mt19937_64 rng(seed);
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    const Index head = std::min(n, m);
    // Partial Fisher-Yates: the first `head` slots become a uniform sample.
    for (Index i = 0; i < head; ++i) {
        const Index j = std::uniform_int_distribution<Index>(i, n - 1)(rng);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(head);
    std::uniform_int_distribution<Index> any(0, n - 1);
    while (idx.size() < m) idx.push_back(any(rng));
    return idx;
}

GridSeeds grid_seeds(Index n, std::uint64_t seed, double lo, double hi) {
    if (n < 1) throw ContractError("grid_seeds: n must be at least 1");
    if (!(lo < hi)) throw ContractError("grid_seeds: need lo < hi");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    GridSeeds out(static_cast<Eigen::Index>(n), 2);
    std::set<std::pair<double, double>> seen;
    for (Index i = 0; i < n;) {
        const double a = u(rng), b = u(rng);
        if (!seen.emplace(a, b).second) continue;
        out(static_cast<Eigen::Index>(i), 0) = a;
        out(static_cast<Eigen::Index>(i), 1) = b;
        ++i;
    }
    return out;
}

}  // namespace crn
