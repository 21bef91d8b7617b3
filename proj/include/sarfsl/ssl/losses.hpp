#pragma once

#include <Eigen/Dense>

#include "sarfsl/nn/loss.hpp"

namespace sarfsl::ssl {

/// NT-Xent over a (2N x P) projection matrix whose rows are ordered
/// [a_1..a_N, b_1..b_N], (a_i, b_i) being positive pairs. Rows are
/// L2-normalised, similarities divided by `temperature`, self-similarity
/// excluded, and the cross-entropy of picking the positive is averaged over
/// all 2N anchors.
double nt_xent_loss(const Eigen::MatrixXd& projections, double temperature);
/// Same value plus dLoss/dprojections (2N x P).
nn::LossAndGrad<double> nt_xent_loss_and_grad(const Eigen::MatrixXd& projections,
                                              double temperature);

/// 2 - 2 cos(p, z); 0 for aligned vectors, 4 for opposite ones.
double byol_regression_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);

/// Symmetrised BYOL loss. Both matrices are (2B x P) with rows ordered
/// [view a, view b]; online row i regresses target row (i + B) mod 2B. Each
/// sample contributes the average of its two directed terms, and the result is
/// the mean over the B samples, so the value lies in [0, 4]. The gradient is
/// taken with respect to the online predictions only.
nn::LossAndGrad<double> byol_loss_and_grad(const Eigen::MatrixXd& online_predictions,
                                           const Eigen::MatrixXd& target_projections);

}  // namespace sarfsl::ssl
