#include "sarfsl/ssl/losses.hpp"

#include <cmath>

#include "sarfsl/core/error.hpp"

namespace sarfsl::ssl {

namespace {

Eigen::VectorXd row_norms(const Eigen::MatrixXd& m, const char* who) {
  Eigen::VectorXd norms = m.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    require(norms(i) > 0.0 && std::isfinite(norms(i)), ErrorKind::kParameter,
            std::string(who) + ": cannot normalise row " + std::to_string(i) + " (zero or non-finite norm)");
  }
  return norms;
}

}  // namespace

nn::LossAndGrad<double> nt_xent_loss_and_grad(const Eigen::MatrixXd& projections, double temperature) {
  require(temperature > 0.0, ErrorKind::kParameter, "nt_xent: temperature must be positive");
  const Eigen::Index two_n = projections.rows();
  require(two_n % 2 == 0 && two_n >= 4, ErrorKind::kParameter,
          "nt_xent: degenerate batch, need an even row count of at least 4 (N >= 2)");
  const Eigen::Index n = two_n / 2;

  const Eigen::VectorXd norms = row_norms(projections, "nt_xent");
  const Eigen::MatrixXd z = norms.cwiseInverse().asDiagonal() * projections;
  const Eigen::MatrixXd logits = (z * z.transpose()) / temperature;

  // g(i, k) = dLoss / dlogits(i, k).
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(two_n, two_n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < two_n; ++i) {
    const Eigen::Index pos = i < n ? i + n : i - n;
    double row_max = -INFINITY;
    for (Eigen::Index k = 0; k < two_n; ++k) {
      if (k != i) row_max = std::max(row_max, logits(i, k));
    }
    double denom = 0.0;
    for (Eigen::Index k = 0; k < two_n; ++k) {
      if (k == i) continue;
      const double e = std::exp(logits(i, k) - row_max);
      g(i, k) = e;
      denom += e;
    }
    total += std::log(denom) + row_max - logits(i, pos);
    g.row(i) /= denom;
    g(i, pos) -= 1.0;
  }
  g /= static_cast<double>(two_n);

  nn::LossAndGrad<double> out;
  out.loss = total / static_cast<double>(two_n);
  const Eigen::MatrixXd dz = ((g + g.transpose()) * z) / temperature;
  // Back through row normalisation: dp = (dz - z (z . dz)) / |p|.
  const Eigen::VectorXd radial = (z.cwiseProduct(dz)).rowwise().sum();
  out.grad = norms.cwiseInverse().asDiagonal() * (dz - radial.asDiagonal() * z);
  return out;
}

double nt_xent_loss(const Eigen::MatrixXd& projections, double temperature) {
  return nt_xent_loss_and_grad(projections, temperature).loss;
}

double byol_regression_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target) {
  const double pn = prediction.norm();
  const double tn = target.norm();
  require(pn > 0.0 && tn > 0.0, ErrorKind::kParameter, "byol: cannot normalise a zero vector");
  return 2.0 - 2.0 * prediction.dot(target) / (pn * tn);
}

nn::LossAndGrad<double> byol_loss_and_grad(const Eigen::MatrixXd& online_predictions,
                                           const Eigen::MatrixXd& target_projections) {
  require(online_predictions.rows() == target_projections.rows() &&
              online_predictions.cols() == target_projections.cols(),
          ErrorKind::kShape, "byol: prediction and target shapes differ");
  const Eigen::Index two_b = online_predictions.rows();
  require(two_b >= 2 && two_b % 2 == 0, ErrorKind::kParameter, "byol: need an even, nonzero row count");
  const Eigen::Index b = two_b / 2;

  const Eigen::VectorXd pn = row_norms(online_predictions, "byol");
  const Eigen::VectorXd tn = row_norms(target_projections, "byol");
  const Eigen::MatrixXd p = pn.cwiseInverse().asDiagonal() * online_predictions;
  const Eigen::MatrixXd t = tn.cwiseInverse().asDiagonal() * target_projections;

  nn::LossAndGrad<double> out;
  out.grad = Eigen::MatrixXd::Zero(two_b, online_predictions.cols());
  // Each directed term carries weight 1 / (2B): half of a per-sample average.
  const double w = 1.0 / static_cast<double>(two_b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < two_b; ++i) {
    const Eigen::Index j = i < b ? i + b : i - b;
    const double c = p.row(i).dot(t.row(j));
    total += 2.0 - 2.0 * c;
    out.grad.row(i) = (-2.0 * w / pn(i)) * (t.row(j) - c * p.row(i));
  }
  out.loss = total * w;
  return out;
}

}  // namespace sarfsl::ssl
