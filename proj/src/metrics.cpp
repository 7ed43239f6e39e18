#include "crn/metrics.hpp"

#include "crn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace crn {

std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    if (cost.cols() != cost.rows()) throw DimensionError("solve_assignment: cost matrix must be square");
    // Shortest augmenting path with row/column potentials; arrays are
    // 1-based with slot 0 as the virtual source column.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                                   u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> match(n);
    for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
    return match;
}

double emd(const PointCloud& X, const PointCloud& Y) {
    if (X.rows() != Y.rows()) {
        throw ContractError("emd: point counts differ (" + std::to_string(X.rows()) + " vs " +
                            std::to_string(Y.rows()) + ")");
    }
    if (X.rows() == 0) throw ContractError("emd: empty point cloud");
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = std::sqrt(detail::squared_distance(X, i, Y, j));
    }
    const auto match = solve_assignment(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += cost(i, static_cast<Eigen::Index>(match[static_cast<std::size_t>(i)]));
    return total / static_cast<double>(n);
}

double matched_fraction(const PointCloud& A, const PointCloud& B, double tau) {
    if (!(tau > 0.0)) throw ContractError("matched_fraction: tau must be positive");
    const auto nn = nearest_neighbor_dists(A, B);
    const auto hits = std::count_if(nn.distance.begin(), nn.distance.end(), [tau](double d) { return d < tau; });
    return static_cast<double>(hits) / static_cast<double>(A.rows());
}

double fscore(double accuracy, double completeness) {
    const double s = accuracy + completeness;
    return s == 0.0 ? 0.0 : 2.0 * accuracy * completeness / s;
}

double fidelity(const PointCloud& input, const PointCloud& output) {
    const auto nn = nearest_neighbor_dists(input, output);
    double acc = 0.0;
    for (double d : nn.distance) acc += d;
    return acc / static_cast<double>(input.rows());
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                        const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2) {
    const auto d = mean1.size();
    if (mean2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d) {
        throw ContractError("frechet_distance: dimension mismatch");
    }
    // Tr((S1 S2)^{1/2}) = Tr((S1^{1/2} S2 S1^{1/2})^{1/2}); the inner matrix is symmetric.
    const Eigen::MatrixXd s1 = psd_sqrt(cov1);
    Eigen::MatrixXd inner = s1 * cov2 * s1;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
    const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return (mean1 - mean2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * cross;
}

double fpd(const Eigen::MatrixXd& feats_x, const Eigen::MatrixXd& feats_y) {
    if (feats_x.cols() != feats_y.cols()) {
        throw ContractError("fpd: feature dimensions differ (" + std::to_string(feats_x.cols()) + " vs " +
                            std::to_string(feats_y.cols()) + ")");
    }
    if (feats_x.rows() < 2 || feats_y.rows() < 2) throw ContractError("fpd: need at least two feature vectors per set");
    auto moments = [](const Eigen::MatrixXd& f) {
        const Eigen::VectorXd m = f.colwise().mean().transpose();
        const Eigen::MatrixXd c = f.rowwise() - m.transpose();
        return std::pair{m, Eigen::MatrixXd((c.transpose() * c) / static_cast<double>(f.rows() - 1))};
    };
    const auto [mx, cx] = moments(feats_x);
    const auto [my, cy] = moments(feats_y);
    return frechet_distance(mx, cx, my, cy);
}

const std::vector<std::string>& MetricsReport::columns() {
    static const std::vector<std::string> cols{"cd1",    "cd2",      "emd",   "accuracy",
                                               "completeness", "fscore", "fidelity", "fpd"};
    return cols;
}

void MetricsReport::set(const std::string& key, double value) {
    if (std::find(columns().begin(), columns().end(), key) == columns().end()) {
        throw ContractError("MetricsReport: unknown metric '" + key + "'");
    }
    if (!std::isfinite(value)) throw ValueError("MetricsReport: non-finite value for '" + key + "'");
    values_[key] = value;
}

std::optional<double> MetricsReport::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

namespace {
std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}
}  // namespace

std::string MetricsReport::to_key_value() const {
    std::string out;
    for (const auto& c : columns()) {
        if (const auto v = get(c)) out += c + "=" + format_real(*v) + "\n";
    }
    return out;
}

std::string MetricsReport::csv_header() {
    std::string out;
    for (std::size_t i = 0; i < columns().size(); ++i) {
        if (i) out += ',';
        out += columns()[i];
    }
    return out;
}

std::string MetricsReport::to_csv_row() const {
    std::string out;
    for (std::size_t i = 0; i < columns().size(); ++i) {
        if (i) out += ',';
        if (const auto v = get(columns()[i])) out += format_real(*v);
    }
    return out;
}

}  // namespace crn
