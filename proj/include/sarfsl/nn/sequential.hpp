#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sarfsl/nn/layers.hpp"

namespace sarfsl::nn {

template <typename T>
class Sequential {
 public:
  explicit Sequential(Shape input = {}) : input_(input) {}
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  /// Appends a layer constructed with the current output shape as its first
  /// argument.
  template <template <typename> class L, typename... Args>
  L<T>& add(Args&&... args) {
    auto layer = std::make_unique<L<T>>(output_shape(), std::forward<Args>(args)...);
    L<T>& ref = *layer;
    push(std::move(layer));
    return ref;
  }
  void push(std::unique_ptr<Layer<T>> layer);

  Matrix<T> forward(const Matrix<T>& x);
  Matrix<T> infer(const Matrix<T>& x) const;
  Matrix<T> backward(const Matrix<T>& grad_out);

  void zero_grad();
  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  std::size_t num_parameters() const;

  Shape input_shape() const { return input_; }
  Shape output_shape() const;
  bool empty() const { return layers_.empty(); }
  std::size_t size() const { return layers_.size(); }

  /// Human-readable structure string; hashed into checkpoint descriptors.
  std::string describe() const;
  void set_input_grad_required(bool required);

 private:
  Shape input_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// y = branch(x) + shortcut(x); the shortcut is the identity when empty.
template <typename T>
class Residual final : public Layer<T> {
 public:
  Residual(Shape in, Sequential<T> branch, Sequential<T> shortcut);

  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  void collect_parameters(std::vector<Param<T>*>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Residual>(*this); }
  std::string describe() const override;

 private:
  Sequential<T> branch_;
  Sequential<T> shortcut_;
};

/// Concatenation of every parameter (trainable or not) in network order.
template <typename T>
std::vector<T> flatten_parameters(const Sequential<T>& net);
template <typename T>
void assign_parameters(Sequential<T>& net, const std::vector<T>& flat);
/// Order-sensitive hash over raw parameter bytes.
template <typename T>
std::uint64_t parameter_checksum(const Sequential<T>& net);

}  // namespace sarfsl::nn
