#include "crn/losses.hpp"

#include "crn/errors.hpp"

#include <cmath>

namespace crn {

std::string_view to_string(ChamferVariant v) { return v == ChamferVariant::CD1 ? "CD1" : "CD2"; }

ChamferVariant parse_chamfer_variant(std::string_view text) {
    if (text == "CD1" || text == "cd1") return ChamferVariant::CD1;
    if (text == "CD2" || text == "cd2") return ChamferVariant::CD2;
    throw ValueError("unknown chamfer variant '" + std::string(text) + "' (expected CD1 or CD2)");
}

Tensor cloud_tensor(const PointCloud& cloud) { return Tensor::from_matrix(cloud); }

PointCloud tensor_cloud(const Tensor& points) {
    if (points.rank() != 2 || points.extent(1) != 3) {
        throw DimensionError("expected an N x 3 point tensor, got " + shape_to_string(points.shape()));
    }
    return points.matrix();
}

namespace {

void require_points(const Tensor& t, const char* name) {
    if (t.rank() != 2 || t.extent(1) != 3) {
        throw DimensionError(std::string("chamfer: ") + name + " must be N x 3, got " +
                             shape_to_string(t.shape()));
    }
    if (t.extent(0) == 0) throw ContractError(std::string("chamfer: ") + name + " is empty");
}

// One-sided mean term and its gradient contributions.
template <typename MapA, typename MapB>
double one_sided(const MapA& A, const MapB& B, ChamferVariant variant, std::vector<Index>* match) {
    const auto nn = nearest_neighbor_dists(A, B);
    if (match) *match = nn.index;
    double acc = 0.0;
    const auto& terms = variant == ChamferVariant::CD1 ? nn.squared_distance : nn.distance;
    for (double t : terms) acc += t;
    return acc / static_cast<double>(A.rows());
}

// d term / d a for one matched pair a -> b, scaled by `w`.
inline void pair_gradient(const double* a, const double* b, ChamferVariant variant, double w,
                          double* ga, double* gb) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    double f;
    if (variant == ChamferVariant::CD1) {
        f = 2.0 * w;
    } else {
        const double n = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (n == 0.0) return;  // subgradient 0 at coincident points
        f = w / n;
    }
    if (ga) {
        ga[0] += f * dx;
        ga[1] += f * dy;
        ga[2] += f * dz;
    }
    if (gb) {
        gb[0] -= f * dx;
        gb[1] -= f * dy;
        gb[2] -= f * dz;
    }
}

}  // namespace

Tensor chamfer(const Tensor& X, const Tensor& Y, ChamferVariant variant) {
    require_points(X, "X");
    require_points(Y, "Y");
    const auto xm = X.matrix();
    const auto ym = Y.matrix();
    std::vector<Index> x_to_y, y_to_x;
    const double value = one_sided(xm, ym, variant, &x_to_y) + one_sided(ym, xm, variant, &y_to_x);

    return make_op({}, {value}, {X, Y},
                   [X, Y, variant, x_to_y = std::move(x_to_y), y_to_x = std::move(y_to_x)](
                       std::span<const double> g, std::span<std::vector<double>*> sinks) {
                       const double* xv = X.values().data();
                       const double* yv = Y.values().data();
                       double* gx = sinks[0] ? sinks[0]->data() : nullptr;
                       double* gy = sinks[1] ? sinks[1]->data() : nullptr;
                       const double wx = g[0] / static_cast<double>(x_to_y.size());
                       for (std::size_t i = 0; i < x_to_y.size(); ++i) {
                           const std::size_t j = x_to_y[i];
                           pair_gradient(xv + 3 * i, yv + 3 * j, variant, wx, gx ? gx + 3 * i : nullptr,
                                         gy ? gy + 3 * j : nullptr);
                       }
                       const double wy = g[0] / static_cast<double>(y_to_x.size());
                       for (std::size_t j = 0; j < y_to_x.size(); ++j) {
                           const std::size_t i = y_to_x[j];
                           pair_gradient(yv + 3 * j, xv + 3 * i, variant, wy, gy ? gy + 3 * j : nullptr,
                                         gx ? gx + 3 * i : nullptr);
                       }
                   });
}

double chamfer(const PointCloud& X, const PointCloud& Y, ChamferVariant variant) {
    if (X.rows() == 0 || Y.rows() == 0) throw ContractError("chamfer: empty point cloud");
    return one_sided(X, Y, variant, nullptr) + one_sided(Y, X, variant, nullptr);
}

Tensor lsgan_generator_loss(const Tensor& d_of_fake) {
    return scale(square(add_scalar(d_of_fake, -1.0)), 0.5);
}

Tensor lsgan_discriminator_loss(const Tensor& d_of_fake, const Tensor& d_of_real) {
    return scale(add(square(d_of_fake), square(add_scalar(d_of_real, -1.0))), 0.5);
}

ReconstructionTerms reconstruction_terms(const Tensor& P_coarse, const Tensor& Q, const Tensor& P_hat,
                                         const Tensor& P, const Tensor& Q_prime, double lambda_f,
                                         double lambda_ae, ChamferVariant variant) {
    ReconstructionTerms t;
    t.coarse = chamfer(P_coarse, Q_prime, variant);
    t.dense = chamfer(Q, Q_prime, variant);
    t.total = add(t.coarse, scale(t.dense, lambda_f));
    if (P_hat.defined()) {
        t.partial = chamfer(P_hat, P, variant);
        t.total = add(t.total, scale(t.partial, lambda_ae));
    }
    return t;
}

Tensor reconstruction_loss(const Tensor& P_coarse, const Tensor& Q, const Tensor& P_hat, const Tensor& P,
                           const Tensor& Q_prime, double lambda_f, double lambda_ae,
                           ChamferVariant variant) {
    return reconstruction_terms(P_coarse, Q, P_hat, P, Q_prime, lambda_f, lambda_ae, variant).total;
}

Tensor total_generator_loss(const Tensor& gan_loss, const Tensor& rec_loss, double lambda, double beta) {
    return add(scale(gan_loss, lambda), scale(rec_loss, beta));
}

}  // namespace crn
