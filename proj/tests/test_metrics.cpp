#include "crn/errors.hpp"
#include "crn/metrics.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace crn;
using crn::testing::random_cloud;

TEST_SUITE("metrics") {
TEST_CASE("emd hand cases and contract") {
    PointCloud x(2, 3), y(2, 3);
    x << 0, 0, 0, 1, 0, 0;
    y << 1, 0, 0, 0, 0, 1;
    CHECK(emd(x, y) == doctest::Approx(0.5).epsilon(1e-15));

    const PointCloud c = random_cloud(9, 1);
    PointCloud shuffled = c;
    shuffled.row(0).swap(shuffled.row(5));
    CHECK(emd(c, shuffled) == 0.0);

    CHECK_THROWS_WITH_AS(emd(random_cloud(3, 2), random_cloud(4, 3)), doctest::Contains("3 vs 4"), ContractError);
}

TEST_CASE("emd equals exhaustive permutation search") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Index n = 1 + s % 6;
        const PointCloud x = random_cloud(n, 200 + s);
        const PointCloud y = random_cloud(n, 300 + s);
        CHECK(std::abs(emd(x, y) - testing::emd_oracle(x, y)) < 1e-12);
        CHECK(emd(x, y) >= testing::one_sided(x, y, false) - 1e-15);
    }
}

TEST_CASE("assignment solver on a hand matrix") {
    Eigen::MatrixXd cost(3, 3);
    cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const auto m = solve_assignment(cost);
    double total = 0;
    for (Eigen::Index i = 0; i < 3; ++i) total += cost(i, static_cast<Eigen::Index>(m[static_cast<std::size_t>(i)]));
    CHECK(total == 5.0);
}

TEST_CASE("matched fraction, fscore and fidelity") {
    const PointCloud c = random_cloud(15, 4);
    CHECK(matched_fraction(c, c, kDefaultMatchThreshold) == 1.0);
    CHECK(kDefaultMatchThreshold == 0.03);

    PointCloud a(2, 3), b(1, 3);
    a << 0, 0, 0, 1, 0, 0;
    b << 0, 0, 0;
    CHECK(matched_fraction(a, b, 0.5) == 0.5);

    const PointCloud y = random_cloud(20, 5);
    double prev = 0.0;
    for (double tau : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        const double f = matched_fraction(c, y, tau);
        CHECK(f >= prev);
        prev = f;
    }

    CHECK(fscore(1, 1) == 1.0);
    CHECK(fscore(0.37, 0.37) == doctest::Approx(0.37).epsilon(1e-15));
    CHECK(fscore(0.5, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(fscore(0, 0) == 0.0);

    CHECK(fidelity(c.topRows(5), c) == 0.0);
    PointCloud in(1, 3), out(1, 3);
    in << 0, 0, 0;
    out << 0, 0, 3;
    CHECK(fidelity(in, out) == 3.0);
    CHECK(fidelity(c, y) != fidelity(y, c));
}

TEST_CASE("frechet distance") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd f(40, 5);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(rng);
    CHECK(std::abs(fpd(f, f)) <= 1e-8);

    Eigen::RowVectorXd v(5);
    v << 1, -2, 0.5, 0, 3;
    const Eigen::MatrixXd shifted = f.rowwise() + v;
    CHECK(fpd(f, shifted) == doctest::Approx(v.squaredNorm()).epsilon(1e-9));

    Eigen::MatrixXd c1 = Eigen::Vector2d(4, 1).asDiagonal();
    Eigen::MatrixXd c2 = Eigen::Vector2d(1, 4).asDiagonal();
    const Eigen::VectorXd mu = Eigen::Vector2d(0.3, -0.7);
    CHECK(std::abs(frechet_distance(mu, c1, mu, c2) - 2.0) < 1e-8);

    // Direct oracle: sqrt of c1 c2 via eigen decomposition of the product.
    Eigen::EigenSolver<Eigen::MatrixXd> es(c1 * c2);
    const double cross = es.eigenvalues().cwiseSqrt().real().sum();
    CHECK(std::abs(frechet_distance(mu, c1, mu, c2) - (c1.trace() + c2.trace() - 2 * cross)) < 1e-12);

    Eigen::MatrixXd g(40, 5);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = 2.0 * n(rng) + 0.5;
    CHECK(fpd(f, g) >= -1e-8);

    CHECK_THROWS_AS(fpd(f, Eigen::MatrixXd(40, 4)), ContractError);
    CHECK_THROWS_AS(fpd(f.topRows(1), f), ContractError);
}

TEST_CASE("metrics report serialization") {
    MetricsReport r;
    r.set("cd2", 0.25);
    r.set("fscore", 1.0);
    CHECK(r.get("cd2") == 0.25);
    CHECK_FALSE(r.get("emd").has_value());
    CHECK(MetricsReport::csv_header() == "cd1,cd2,emd,accuracy,completeness,fscore,fidelity,fpd");
    CHECK(r.to_csv_row() == ",0.25,,,,1,,");
    CHECK(r.to_key_value() == "cd2=0.25\nfscore=1\n");
    CHECK_THROWS_AS(r.set("bogus", 1.0), ContractError);
    CHECK_THROWS_AS(r.set("cd1", std::nan("")), ValueError);
}
}
