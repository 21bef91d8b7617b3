#pragma once

#include "sarfsl/nn/layers.hpp"

namespace sarfsl::nn {

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  Matrix<T> grad;  // same shape as the logits
};

/// Mean over columns of -sum_k target(k) * log softmax(logits)(k).
/// `logits` and `targets` are (classes, batch); each target column is a
/// probability vector. The gradient is (softmax - target) / batch.
template <typename T>
LossAndGrad<T> soft_cross_entropy(const Matrix<T>& logits, const Matrix<T>& targets);

/// Column-wise smoothed one-hot targets: 1 - s + s/M on the true class and
/// s/M elsewhere.
template <typename T>
Matrix<T> smoothed_targets(const std::vector<int>& labels, int num_classes, double smoothing);

template <typename T>
Matrix<T> uniform_targets(int num_classes, int batch);

}  // namespace sarfsl::nn
