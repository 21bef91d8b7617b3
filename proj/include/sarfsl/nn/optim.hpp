#pragma once

#include <cstdint>
#include <vector>

#include "sarfsl/nn/layers.hpp"

namespace sarfsl::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // coupled L2, added to the gradient
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// One update of every trainable parameter; the parameter list must be the
  /// same (same order) on every call.
  void step(const std::vector<Param<T>*>& params, double learning_rate);
  std::int64_t steps() const { return steps_; }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<Matrix<T>> m_;
  std::vector<Matrix<T>> v_;
};

/// Cosine decay from `base` at step 0 towards 0 at `total_steps`.
double cosine_lr(double base, std::int64_t step, std::int64_t total_steps);

}  // namespace sarfsl::nn
