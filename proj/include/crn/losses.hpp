#pragma once

// Differentiable training objectives: Chamfer distance, LS-GAN terms and
// their weighted combinations.

#include "crn/geometry.hpp"
#include "crn/tensor.hpp"

#include <string_view>

namespace crn {

// CD1 averages squared nearest-neighbor distances, CD2 averages the
// Euclidean norms.
enum class ChamferVariant { CD1, CD2 };

std::string_view to_string(ChamferVariant v);
ChamferVariant parse_chamfer_variant(std::string_view text);

Tensor cloud_tensor(const PointCloud& cloud);
PointCloud tensor_cloud(const Tensor& points);

// CD(X, Y) = L(X, Y) + L(Y, X) over N x 3 tensors. Gradients flow through
// the coordinates with the nearest-neighbor assignment fixed at forward time.
Tensor chamfer(const Tensor& X, const Tensor& Y, ChamferVariant variant);
double chamfer(const PointCloud& X, const PointCloud& Y, ChamferVariant variant);

// 1/2 (D(Q) - 1)^2
Tensor lsgan_generator_loss(const Tensor& d_of_fake);
// 1/2 [D(Q)^2 + (D(Q') - 1)^2]
Tensor lsgan_discriminator_loss(const Tensor& d_of_fake, const Tensor& d_of_real);

struct ReconstructionTerms {
    Tensor coarse;  // CD(P_coarse, Q')
    Tensor dense;   // CD(Q, Q')
    Tensor partial; // CD(P_hat, P); undefined when the partial branch is off
    Tensor total;
};

// CD(P_coarse, Q') + lambda_f CD(Q, Q') + lambda_ae CD(P_hat, P). Pass an
// undefined `P_hat` to drop the auto-encoder term.
ReconstructionTerms reconstruction_terms(const Tensor& P_coarse, const Tensor& Q, const Tensor& P_hat,
                                         const Tensor& P, const Tensor& Q_prime, double lambda_f,
                                         double lambda_ae, ChamferVariant variant);

Tensor reconstruction_loss(const Tensor& P_coarse, const Tensor& Q, const Tensor& P_hat, const Tensor& P,
                           const Tensor& Q_prime, double lambda_f, double lambda_ae,
                           ChamferVariant variant);

// lambda L_GAN + beta L_rec
Tensor total_generator_loss(const Tensor& gan_loss, const Tensor& rec_loss, double lambda, double beta);

}  // namespace crn
