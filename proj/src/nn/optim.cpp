#include "sarfsl/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "sarfsl/core/error.hpp"

namespace sarfsl::nn {

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params, double learning_rate) {
  if (m_.empty()) {
    for (const Param<T>* p : params) {
      m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  require(m_.size() == params.size(), ErrorKind::kRuntime, "adam: parameter list changed");
  ++steps_;
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T bias1 = static_cast<T>(1.0 - std::pow(options_.beta1, static_cast<double>(steps_)));
  const T bias2 = static_cast<T>(1.0 - std::pow(options_.beta2, static_cast<double>(steps_)));
  const T lr = static_cast<T>(learning_rate);
  const T eps = static_cast<T>(options_.eps);
  const T wd = static_cast<T>(options_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    if (!p.trainable) continue;
    auto w = p.value.array();
    auto m = m_[i].array();
    auto v = v_[i].array();
    const auto g = (p.grad.array() + wd * w).eval();
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.square();
    w -= lr * (m / bias1) / ((v / bias2).sqrt() + eps);
  }
}

double cosine_lr(double base, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return base;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sarfsl::nn
