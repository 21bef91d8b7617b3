#pragma once

// Minimal layer library for the encoders, projection heads, classifier heads
// and scratch baselines.
//
// Activation layout: a batch is an Eigen column-major matrix with
// `channels` rows and `batch * height * width` columns. Column
// (n * height + y) * width + x holds every channel of pixel (y, x) of sample
// n, so each sample occupies one contiguous block in HWC order and a dense
// (channels, 1, 1) activation is simply a (features, batch) matrix.

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

#include "sarfsl/core/rng.hpp"

namespace sarfsl::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  int spatial() const { return height * width; }
  int numel() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;  // false for running statistics
};

template <typename T>
class Layer {
 public:
  Layer(Shape in, Shape out) : in_(in), out_(out) {}
  virtual ~Layer() = default;

  Shape input_shape() const { return in_; }
  Shape output_shape() const { return out_; }

  /// Training pass. Caches whatever backward() needs.
  virtual Matrix<T> forward(const Matrix<T>& x) = 0;
  /// Inference pass. Touches no state, so a const layer is safe to share
  /// across threads.
  virtual Matrix<T> infer(const Matrix<T>& x) const = 0;
  /// Accumulates parameter gradients (+=) and returns dL/dx for the most
  /// recent forward().
  virtual Matrix<T> backward(const Matrix<T>& grad_out) = 0;

  virtual void collect_parameters(std::vector<Param<T>*>& out) { (void)out; }
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
  virtual std::string describe() const = 0;

  /// The first layer of a network never needs dL/dinput.
  void set_input_grad_required(bool required) { need_input_grad_ = required; }

 protected:
  int batch_of(const Matrix<T>& x) const;

  Shape in_;
  Shape out_;
  bool need_input_grad_ = true;
};

/// 2-D convolution, square kernel, zero padding.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  /// `init_gain` scales the He-normal initialisation; 0 gives an all-zero
  /// kernel (used on the last conv of residual branches).
  Conv2d(Shape in, int out_channels, int kernel, int stride, int padding, Rng& rng,
         double init_gain = 1.0);

  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  void collect_parameters(std::vector<Param<T>*>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string describe() const override;

 private:
  Matrix<T> im2col(const Matrix<T>& x, int batch) const;
  Matrix<T> col2im(const Matrix<T>& cols, int batch) const;

  int kernel_;
  int stride_;
  int padding_;
  Param<T> weight_;  // (out_channels, kernel * kernel * in_channels), (ky, kx, c) order
  Param<T> bias_;    // (out_channels, 1)
  Matrix<T> cols_;
  int batch_ = 0;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(Shape in, int window);

  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  std::string describe() const override;

 private:
  Matrix<T> pool(const Matrix<T>& x, std::vector<Eigen::Index>* argmax) const;

  int window_;
  std::vector<Eigen::Index> argmax_;
  Eigen::Index input_cols_ = 0;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  explicit ReLU(Shape in) : Layer<T>(in, in) {}

  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
  std::string describe() const override { return "relu"; }

 private:
  Matrix<T> output_;
};

/// (C, H, W) -> (C*H*W, 1, 1). Pure reshape thanks to the HWC sample blocks.
template <typename T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(Shape in) : Layer<T>(in, Shape{in.numel(), 1, 1}) {}

  Matrix<T> forward(const Matrix<T>& x) override { return infer(x); }
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
  std::string describe() const override { return "flatten"; }
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  explicit GlobalAvgPool(Shape in) : Layer<T>(in, Shape{in.channels, 1, 1}) {}

  Matrix<T> forward(const Matrix<T>& x) override { return infer(x); }
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
  std::string describe() const override { return "gap"; }
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(Shape in, int out_features, Rng& rng, double init_gain = 1.0);

  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  void collect_parameters(std::vector<Param<T>*>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }
  std::string describe() const override;

 private:
  Param<T> weight_;  // (out, in)
  Param<T> bias_;    // (out, 1)
  Matrix<T> input_;
};

/// Batch normalisation over a dense (features, batch) activation.
template <typename T>
class BatchNorm1d final : public Layer<T> {
 public:
  explicit BatchNorm1d(Shape in, double momentum = 0.1, double eps = 1e-5);

  Matrix<T> forward(const Matrix<T>& x) override;
  Matrix<T> infer(const Matrix<T>& x) const override;
  Matrix<T> backward(const Matrix<T>& grad_out) override;
  void collect_parameters(std::vector<Param<T>*>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm1d>(*this); }
  std::string describe() const override;

 private:
  double momentum_;
  double eps_;
  Param<T> gamma_;
  Param<T> beta_;
  Param<T> running_mean_;
  Param<T> running_var_;
  Matrix<T> xhat_;
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std_;
};

}  // namespace sarfsl::nn
