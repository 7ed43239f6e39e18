#pragma once

// Evaluation metrics. None of these participate in autodiff.

#include "crn/geometry.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crn {

// Minimum mean Euclidean distance over bijections, solved exactly.
double emd(const PointCloud& X, const PointCloud& Y);

// Optimal assignment for a square cost matrix: row i is matched to
// column result[i]. O(n^3).
std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost);

// Fraction of points of A whose nearest neighbor in B is strictly closer
// than tau.
double matched_fraction(const PointCloud& A, const PointCloud& B, double tau);

inline constexpr double kDefaultMatchThreshold = 0.03;

double fscore(double accuracy, double completeness);

// Mean Euclidean distance from each input point to the output cloud.
double fidelity(const PointCloud& input, const PointCloud& output);

// Frechet distance between Gaussians N(m1, s1) and N(m2, s2).
double frechet_distance(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                        const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2);

// Feature sets hold one sample per row; covariance uses the n-1 normalizer.
double fpd(const Eigen::MatrixXd& feats_x, const Eigen::MatrixXd& feats_y);

// Named scalar results with a fixed serialization order.
class MetricsReport {
public:
    static const std::vector<std::string>& columns();

    void set(const std::string& key, double value);
    std::optional<double> get(const std::string& key) const;
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, double>& values() const { return values_; }

    // "key=value" lines in column order; absent entries are skipped.
    std::string to_key_value() const;
    static std::string csv_header();
    // Absent entries become empty fields.
    std::string to_csv_row() const;

private:
    std::map<std::string, double> values_;
};

}  // namespace crn
