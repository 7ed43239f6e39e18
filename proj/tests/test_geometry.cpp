#include "crn/errors.hpp"
#include "crn/geometry.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace crn;
using crn::testing::random_cloud;

namespace {

std::multiset<std::array<double, 3>> as_multiset(const PointCloud& c) {
    std::multiset<std::array<double, 3>> s;
    for (Eigen::Index i = 0; i < c.rows(); ++i) s.insert({c(i, 0), c(i, 1), c(i, 2)});
    return s;
}

}  // namespace

TEST_SUITE("geometry") {
TEST_CASE("farthest point sampling basics") {
    const PointCloud c = random_cloud(30, 1);
    auto all = farthest_point_sample(c, 30, 5);
    std::sort(all.begin(), all.end());
    for (Index i = 0; i < 30; ++i) CHECK(all[i] == i);

    PointCloud line(3, 3);
    line << 0, 0, 0, 0.1, 0, 0, 1, 0, 0;
    const auto picks = farthest_point_sample_from(line, 2, 0);
    CHECK(picks[1] == 2);

    CHECK_THROWS_AS(farthest_point_sample(c, 31, 1), ContractError);
    CHECK_THROWS_AS(farthest_point_sample(c, 0, 1), ContractError);
}

TEST_CASE("farthest point sampling equals the greedy oracle") {
    for (std::uint64_t s = 0; s < 40; ++s) {
        const Index n = 8 + (s * 7) % 57;
        const PointCloud c = random_cloud(n, 100 + s);
        const Index k = 1 + s % n;
        const Index start = (s * 13) % n;
        CHECK(farthest_point_sample_from(c, k, start) == testing::fps_oracle(c, k, start));
    }
}

TEST_CASE("farthest point sampling is seed deterministic") {
    const PointCloud c = random_cloud(50, 2);
    CHECK(farthest_point_sample(c, 10, 42) == farthest_point_sample(c, 10, 42));
}

TEST_CASE("ball query contracts") {
    const PointCloud c = random_cloud(20, 3);
    const auto every = ball_query(c, c.topRows(2), 10.0, 20);
    for (const auto& list : every) {
        std::vector<Index> sorted = list;
        std::sort(sorted.begin(), sorted.end());
        for (Index i = 0; i < 20; ++i) CHECK(sorted[i] == i);
    }

    const auto self = ball_query(c, c.row(7), 1e-9, 5);
    CHECK(self[0] == std::vector<Index>(5, 7));

    // Empty ball: falls back to the nearest point.
    PointCloud far(1, 3);
    far << 10, 10, 10;
    const auto nn = nearest_neighbor_dists(far, c);
    CHECK(ball_query(c, far, 0.1, 3)[0] == std::vector<Index>(3, nn.index[0]));
}

TEST_CASE("ball query membership equals a distance filter") {
    const PointCloud c = random_cloud(20, 4);
    const double r = 0.8;
    const auto lists = ball_query(c, c, r, 20);
    for (Eigen::Index q = 0; q < c.rows(); ++q) {
        std::set<Index> expected;
        for (Eigen::Index i = 0; i < c.rows(); ++i) {
            if (testing::sq(c, i, c, q) <= r * r) expected.insert(static_cast<Index>(i));
        }
        const auto& got = lists[static_cast<std::size_t>(q)];
        CHECK(std::set<Index>(got.begin(), got.end()) == expected);
        CHECK(got.size() == 20);
    }
}

TEST_CASE("nearest neighbors") {
    const PointCloud x = random_cloud(50, 5);
    const PointCloud y = random_cloud(60, 6);
    auto self = nearest_neighbor_dists(x, x);
    for (double d : self.distance) CHECK(d == 0.0);

    PointCloud a(1, 3), b(2, 3);
    a << 0, 0, 0;
    b << 1, 0, 0, 0, 2, 0;
    const auto hand = nearest_neighbor_dists(a, b);
    CHECK(hand.distance[0] == 1.0);
    CHECK(hand.index[0] == 0);

    const auto nn = nearest_neighbor_dists(x, y);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = 1e300;
        Index arg = 0;
        for (Eigen::Index j = 0; j < y.rows(); ++j) {
            const double d = testing::sq(x, i, y, j);
            if (d < best) {
                best = d;
                arg = static_cast<Index>(j);
            }
        }
        CHECK(nn.squared_distance[static_cast<std::size_t>(i)] == best);
        CHECK(nn.index[static_cast<std::size_t>(i)] == arg);
    }
}

TEST_CASE("random subsample") {
    const PointCloud c = random_cloud(25, 7);
    const PointCloud perm = random_subsample(c, 25, 3);
    CHECK(as_multiset(perm) == as_multiset(c));

    const PointCloud sub = random_subsample(c, 10, 3);
    const auto full = as_multiset(c);
    for (const auto& p : as_multiset(sub)) CHECK(full.count(p) >= 1);
    CHECK(random_subsample(c, 10, 3) == sub);

    const PointCloud over = random_subsample(c, 60, 4);
    CHECK(over.rows() == 60);
    for (const auto& p : as_multiset(over)) CHECK(full.count(p) >= 1);
}

TEST_CASE("mirror") {
    PointCloud p(1, 3);
    p << 1, 2, 3;
    const PointCloud m = mirror(p);
    CHECK(m(0, 0) == 1);
    CHECK(m(0, 1) == 2);
    CHECK(m(0, 2) == -3);
    CHECK(mirror(p, MirrorPlane::YZ)(0, 0) == -1);
    CHECK(mirror(p, MirrorPlane::XZ)(0, 1) == -2);

    const PointCloud c = random_cloud(10, 8);
    CHECK(mirror(mirror(c)) == c);
    PointCloud flat = c;
    flat.col(2).setZero();
    CHECK(mirror(flat) == flat);
}

TEST_CASE("grid seeds") {
    const auto one = grid_seeds(1, 1, -1, 1);
    CHECK(one.rows() == 1);
    CHECK(one.cwiseAbs().maxCoeff() <= 1.0);

    const auto many = grid_seeds(500, 2);
    std::set<std::pair<double, double>> seen;
    for (Eigen::Index i = 0; i < many.rows(); ++i) seen.emplace(many(i, 0), many(i, 1));
    CHECK(seen.size() == 500);

    const auto big = grid_seeds(100000, 3, 0.0, 2.0);
    CHECK(std::abs(big.col(0).mean() - 1.0) < 0.02);
    CHECK(std::abs(big.col(1).mean() - 1.0) < 0.02);
    CHECK(big.minCoeff() >= 0.0);
    CHECK(big.maxCoeff() <= 2.0);
}
}
