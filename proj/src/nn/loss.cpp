#include "sarfsl/nn/loss.hpp"

#include <cmath>

#include "sarfsl/core/error.hpp"

namespace sarfsl::nn {

template <typename T>
LossAndGrad<T> soft_cross_entropy(const Matrix<T>& logits, const Matrix<T>& targets) {
  require(logits.rows() == targets.rows() && logits.cols() == targets.cols(), ErrorKind::kShape,
          "cross-entropy: logits and targets differ in shape");
  require(logits.cols() >= 1, ErrorKind::kShape, "cross-entropy: empty batch");
  const Eigen::Index classes = logits.rows();
  const Eigen::Index batch = logits.cols();
  LossAndGrad<T> out;
  out.grad.resize(classes, batch);
  double total = 0.0;
  for (Eigen::Index n = 0; n < batch; ++n) {
    double max_logit = static_cast<double>(logits(0, n));
    for (Eigen::Index k = 1; k < classes; ++k) max_logit = std::max(max_logit, static_cast<double>(logits(k, n)));
    double denom = 0.0;
    for (Eigen::Index k = 0; k < classes; ++k) denom += std::exp(static_cast<double>(logits(k, n)) - max_logit);
    const double log_denom = std::log(denom);
    double loss = 0.0;
    for (Eigen::Index k = 0; k < classes; ++k) {
      const double z = static_cast<double>(logits(k, n)) - max_logit;
      const double t = static_cast<double>(targets(k, n));
      loss -= t * (z - log_denom);
      out.grad(k, n) = static_cast<T>((std::exp(z - log_denom) - t) / static_cast<double>(batch));
    }
    total += loss;
  }
  out.loss = total / static_cast<double>(batch);
  return out;
}

template <typename T>
Matrix<T> smoothed_targets(const std::vector<int>& labels, int num_classes, double smoothing) {
  require(num_classes >= 1, ErrorKind::kParameter, "smoothed_targets: need at least one class");
  require(smoothing >= 0.0 && smoothing < 1.0, ErrorKind::kParameter,
          "label smoothing must lie in [0, 1)");
  const double off = smoothing / num_classes;
  Matrix<T> t = Matrix<T>::Constant(num_classes, static_cast<Eigen::Index>(labels.size()), static_cast<T>(off));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, ErrorKind::kParameter,
            "smoothed_targets: label out of range");
    t(labels[i], static_cast<Eigen::Index>(i)) = static_cast<T>(1.0 - smoothing + off);
  }
  return t;
}

template <typename T>
Matrix<T> uniform_targets(int num_classes, int batch) {
  return Matrix<T>::Constant(num_classes, batch, static_cast<T>(1.0 / num_classes));
}

template LossAndGrad<float> soft_cross_entropy(const Matrix<float>&, const Matrix<float>&);
template LossAndGrad<double> soft_cross_entropy(const Matrix<double>&, const Matrix<double>&);
template Matrix<float> smoothed_targets<float>(const std::vector<int>&, int, double);
template Matrix<double> smoothed_targets<double>(const std::vector<int>&, int, double);
template Matrix<float> uniform_targets<float>(int, int);
template Matrix<double> uniform_targets<double>(int, int);

}  // namespace sarfsl::nn
