#include "sarfsl/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "sarfsl/core/error.hpp"

namespace sarfsl::nn {

std::string to_string(const Shape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

template <typename T>
int Layer<T>::batch_of(const Matrix<T>& x) const {
  const Eigen::Index spatial = in_.spatial();
  require(x.rows() == in_.channels && spatial > 0 && x.cols() % spatial == 0, ErrorKind::kShape,
          describe() + ": input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
              " incompatible with shape " + to_string(in_));
  return static_cast<int>(x.cols() / spatial);
}

namespace {

template <typename T>
void he_normal(Matrix<T>& w, int fan_in, double gain, Rng& rng) {
  const double stddev = gain * std::sqrt(2.0 / std::max(1, fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w.data()[i] = gain == 0.0 ? T(0) : static_cast<T>(rng.normal(0.0, stddev));
  }
}

int conv_out_dim(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(Shape in, int out_channels, int kernel, int stride, int padding, Rng& rng,
                  double init_gain)
    : Layer<T>(in, Shape{out_channels, conv_out_dim(in.height, kernel, stride, padding),
                         conv_out_dim(in.width, kernel, stride, padding)}),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
  require(kernel >= 1 && stride >= 1 && padding >= 0 && out_channels >= 1, ErrorKind::kParameter,
          "conv: invalid geometry");
  require(this->out_.height >= 1 && this->out_.width >= 1, ErrorKind::kShape,
          "conv: kernel larger than padded input " + to_string(in));
  const int fan_in = kernel * kernel * in.channels;
  weight_ = {"weight", Matrix<T>(out_channels, fan_in), Matrix<T>::Zero(out_channels, fan_in)};
  bias_ = {"bias", Matrix<T>::Zero(out_channels, 1), Matrix<T>::Zero(out_channels, 1)};
  he_normal(weight_.value, fan_in, init_gain, rng);
}

template <typename T>
Matrix<T> Conv2d<T>::im2col(const Matrix<T>& x, int batch) const {
  const Shape in = this->in_;
  const Shape out = this->out_;
  const int c = in.channels;
  const Eigen::Index k = static_cast<Eigen::Index>(kernel_) * kernel_ * c;
  Matrix<T> cols(k, static_cast<Eigen::Index>(batch) * out.spatial());
  const T* src = x.data();
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        T* dst = cols.data() + ((static_cast<Eigen::Index>(n) * out.height + oy) * out.width + ox) * k;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = oy * stride_ - padding_ + ky;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = ox * stride_ - padding_ + kx;
            T* d = dst + (ky * kernel_ + kx) * c;
            if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) {
              std::fill(d, d + c, T(0));
            } else {
              const T* s = src + ((static_cast<Eigen::Index>(n) * in.height + iy) * in.width + ix) * c;
              std::memcpy(d, s, sizeof(T) * c);
            }
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
Matrix<T> Conv2d<T>::col2im(const Matrix<T>& cols, int batch) const {
  const Shape in = this->in_;
  const Shape out = this->out_;
  const int c = in.channels;
  const Eigen::Index k = static_cast<Eigen::Index>(kernel_) * kernel_ * c;
  Matrix<T> dx = Matrix<T>::Zero(c, static_cast<Eigen::Index>(batch) * in.spatial());
  T* dst = dx.data();
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        const T* src =
            cols.data() + ((static_cast<Eigen::Index>(n) * out.height + oy) * out.width + ox) * k;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = oy * stride_ - padding_ + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = ox * stride_ - padding_ + kx;
            if (ix < 0 || ix >= in.width) continue;
            const T* s = src + (ky * kernel_ + kx) * c;
            T* d = dst + ((static_cast<Eigen::Index>(n) * in.height + iy) * in.width + ix) * c;
            for (int ch = 0; ch < c; ++ch) d[ch] += s[ch];
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
Matrix<T> Conv2d<T>::forward(const Matrix<T>& x) {
  batch_ = this->batch_of(x);
  cols_ = im2col(x, batch_);
  Matrix<T> y(weight_.value.rows(), cols_.cols());
  y.noalias() = weight_.value * cols_;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> Conv2d<T>::infer(const Matrix<T>& x) const {
  const int batch = this->batch_of(x);
  const Matrix<T> cols = im2col(x, batch);
  Matrix<T> y(weight_.value.rows(), cols.cols());
  y.noalias() = weight_.value * cols;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> Conv2d<T>::backward(const Matrix<T>& grad_out) {
  require(grad_out.cols() == cols_.cols(), ErrorKind::kShape, "conv: backward without forward");
  weight_.grad.noalias() += grad_out * cols_.transpose();
  bias_.grad += grad_out.rowwise().sum();
  if (!this->need_input_grad_) return {};
  Matrix<T> dcols(cols_.rows(), cols_.cols());
  dcols.noalias() = weight_.value.transpose() * grad_out;
  return col2im(dcols, batch_);
}

template <typename T>
void Conv2d<T>::collect_parameters(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
std::string Conv2d<T>::describe() const {
  return "conv(" + std::to_string(this->in_.channels) + "->" + std::to_string(this->out_.channels) +
         ",k" + std::to_string(kernel_) + ",s" + std::to_string(stride_) + ",p" +
         std::to_string(padding_) + ")";
}

// ---------------------------------------------------------------------------
// MaxPool2d

template <typename T>
MaxPool2d<T>::MaxPool2d(Shape in, int window)
    : Layer<T>(in, Shape{in.channels, in.height / window, in.width / window}), window_(window) {
  require(window >= 1 && in.height >= window && in.width >= window, ErrorKind::kShape,
          "maxpool: window larger than input " + to_string(in));
}

template <typename T>
Matrix<T> MaxPool2d<T>::pool(const Matrix<T>& x, std::vector<Eigen::Index>* argmax) const {
  const Shape in = this->in_;
  const Shape out = this->out_;
  const int batch = this->batch_of(x);
  const int c = in.channels;
  Matrix<T> y(c, static_cast<Eigen::Index>(batch) * out.spatial());
  if (argmax) argmax->assign(static_cast<std::size_t>(y.size()), 0);
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        const Eigen::Index ocol = (static_cast<Eigen::Index>(n) * out.height + oy) * out.width + ox;
        for (int ch = 0; ch < c; ++ch) {
          T best = -std::numeric_limits<T>::infinity();
          Eigen::Index best_idx = 0;
          for (int wy = 0; wy < window_; ++wy) {
            for (int wx = 0; wx < window_; ++wx) {
              const Eigen::Index icol =
                  (static_cast<Eigen::Index>(n) * in.height + oy * window_ + wy) * in.width +
                  ox * window_ + wx;
              const Eigen::Index idx = icol * c + ch;
              const T v = x.data()[idx];
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          y.data()[ocol * c + ch] = best;
          if (argmax) (*argmax)[static_cast<std::size_t>(ocol * c + ch)] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Matrix<T> MaxPool2d<T>::forward(const Matrix<T>& x) {
  input_cols_ = x.cols();
  return pool(x, &argmax_);
}

template <typename T>
Matrix<T> MaxPool2d<T>::infer(const Matrix<T>& x) const {
  return pool(x, nullptr);
}

template <typename T>
Matrix<T> MaxPool2d<T>::backward(const Matrix<T>& grad_out) {
  require(static_cast<std::size_t>(grad_out.size()) == argmax_.size(), ErrorKind::kShape,
          "maxpool: backward without forward");
  Matrix<T> dx = Matrix<T>::Zero(this->in_.channels, input_cols_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) dx.data()[argmax_[i]] += grad_out.data()[i];
  return dx;
}

template <typename T>
std::string MaxPool2d<T>::describe() const {
  return "maxpool(" + std::to_string(window_) + ")";
}

// ---------------------------------------------------------------------------
// ReLU / Flatten / GlobalAvgPool

template <typename T>
Matrix<T> ReLU<T>::forward(const Matrix<T>& x) {
  output_ = x.cwiseMax(T(0));
  return output_;
}

template <typename T>
Matrix<T> ReLU<T>::infer(const Matrix<T>& x) const {
  return x.cwiseMax(T(0));
}

template <typename T>
Matrix<T> ReLU<T>::backward(const Matrix<T>& grad_out) {
  require(grad_out.size() == output_.size(), ErrorKind::kShape, "relu: backward without forward");
  return (output_.array() > T(0)).select(grad_out.array(), T(0)).matrix();
}

template <typename T>
Matrix<T> Flatten<T>::infer(const Matrix<T>& x) const {
  const int batch = this->batch_of(x);
  return Eigen::Map<const Matrix<T>>(x.data(), this->out_.channels, batch);
}

template <typename T>
Matrix<T> Flatten<T>::backward(const Matrix<T>& grad_out) {
  return Eigen::Map<const Matrix<T>>(grad_out.data(), this->in_.channels,
                                     grad_out.cols() * this->in_.spatial());
}

template <typename T>
Matrix<T> GlobalAvgPool<T>::infer(const Matrix<T>& x) const {
  const int batch = this->batch_of(x);
  const Eigen::Index spatial = this->in_.spatial();
  Matrix<T> y(this->in_.channels, batch);
  for (int n = 0; n < batch; ++n) {
    y.col(n) = x.middleCols(n * spatial, spatial).rowwise().sum() / static_cast<T>(spatial);
  }
  return y;
}

template <typename T>
Matrix<T> GlobalAvgPool<T>::backward(const Matrix<T>& grad_out) {
  const Eigen::Index spatial = this->in_.spatial();
  Matrix<T> dx(this->in_.channels, grad_out.cols() * spatial);
  for (Eigen::Index n = 0; n < grad_out.cols(); ++n) {
    dx.middleCols(n * spatial, spatial).colwise() = grad_out.col(n) / static_cast<T>(spatial);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(Shape in, int out_features, Rng& rng, double init_gain)
    : Layer<T>(in, Shape{out_features, 1, 1}) {
  require(in.height == 1 && in.width == 1, ErrorKind::kShape,
          "linear: expects a flattened input, got " + to_string(in));
  require(out_features >= 1, ErrorKind::kParameter, "linear: out_features must be positive");
  weight_ = {"weight", Matrix<T>(out_features, in.channels),
             Matrix<T>::Zero(out_features, in.channels)};
  bias_ = {"bias", Matrix<T>::Zero(out_features, 1), Matrix<T>::Zero(out_features, 1)};
  he_normal(weight_.value, in.channels, init_gain, rng);
}

template <typename T>
Matrix<T> Linear<T>::forward(const Matrix<T>& x) {
  input_ = x;
  return infer(x);
}

template <typename T>
Matrix<T> Linear<T>::infer(const Matrix<T>& x) const {
  require(x.rows() == weight_.value.cols(), ErrorKind::kShape,
          "linear: expected " + std::to_string(weight_.value.cols()) + " input features, got " +
              std::to_string(x.rows()));
  Matrix<T> y(weight_.value.rows(), x.cols());
  y.noalias() = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> Linear<T>::backward(const Matrix<T>& grad_out) {
  require(grad_out.cols() == input_.cols(), ErrorKind::kShape, "linear: backward without forward");
  weight_.grad.noalias() += grad_out * input_.transpose();
  bias_.grad += grad_out.rowwise().sum();
  if (!this->need_input_grad_) return {};
  Matrix<T> dx(input_.rows(), input_.cols());
  dx.noalias() = weight_.value.transpose() * grad_out;
  return dx;
}

template <typename T>
void Linear<T>::collect_parameters(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
std::string Linear<T>::describe() const {
  return "linear(" + std::to_string(this->in_.channels) + "->" +
         std::to_string(this->out_.channels) + ")";
}

// ---------------------------------------------------------------------------
// BatchNorm1d

template <typename T>
BatchNorm1d<T>::BatchNorm1d(Shape in, double momentum, double eps)
    : Layer<T>(in, in), momentum_(momentum), eps_(eps) {
  require(in.height == 1 && in.width == 1, ErrorKind::kShape, "batchnorm1d: expects dense input");
  const int d = in.channels;
  gamma_ = {"gamma", Matrix<T>::Ones(d, 1), Matrix<T>::Zero(d, 1)};
  beta_ = {"beta", Matrix<T>::Zero(d, 1), Matrix<T>::Zero(d, 1)};
  running_mean_ = {"running_mean", Matrix<T>::Zero(d, 1), Matrix<T>::Zero(d, 1), false};
  running_var_ = {"running_var", Matrix<T>::Ones(d, 1), Matrix<T>::Zero(d, 1), false};
}

template <typename T>
Matrix<T> BatchNorm1d<T>::forward(const Matrix<T>& x) {
  const Eigen::Index n = x.cols();
  require(n >= 2, ErrorKind::kShape, "batchnorm1d: training needs a batch of at least 2");
  const Eigen::Matrix<T, Eigen::Dynamic, 1> mean = x.rowwise().mean();
  const Matrix<T> centered = x.colwise() - mean;
  const Eigen::Matrix<T, Eigen::Dynamic, 1> var =
      centered.array().square().rowwise().sum() / static_cast<T>(n);
  inv_std_ = (var.array() + static_cast<T>(eps_)).rsqrt();
  xhat_ = centered.array().colwise() * inv_std_.array();
  const T m = static_cast<T>(momentum_);
  running_mean_.value = (1 - m) * running_mean_.value + m * mean;
  running_var_.value =
      (1 - m) * running_var_.value + m * var * (static_cast<T>(n) / static_cast<T>(n - 1));
  Matrix<T> y = xhat_.array().colwise() * gamma_.value.col(0).array();
  y.colwise() += beta_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> BatchNorm1d<T>::infer(const Matrix<T>& x) const {
  const Eigen::Matrix<T, Eigen::Dynamic, 1> scale =
      gamma_.value.col(0).array() * (running_var_.value.col(0).array() + static_cast<T>(eps_)).rsqrt();
  Matrix<T> y = (x.colwise() - running_mean_.value.col(0)).array().colwise() * scale.array();
  y.colwise() += beta_.value.col(0);
  return y;
}

template <typename T>
Matrix<T> BatchNorm1d<T>::backward(const Matrix<T>& grad_out) {
  require(grad_out.cols() == xhat_.cols(), ErrorKind::kShape, "batchnorm1d: backward without forward");
  const T n = static_cast<T>(grad_out.cols());
  gamma_.grad += (grad_out.array() * xhat_.array()).rowwise().sum().matrix();
  beta_.grad += grad_out.rowwise().sum();
  const Matrix<T> dxhat = grad_out.array().colwise() * gamma_.value.col(0).array();
  const Eigen::Matrix<T, Eigen::Dynamic, 1> sum_dxhat = dxhat.rowwise().sum();
  const Eigen::Matrix<T, Eigen::Dynamic, 1> sum_dxhat_xhat =
      (dxhat.array() * xhat_.array()).rowwise().sum();
  Matrix<T> dx = (n * dxhat.array()).matrix();
  dx.colwise() -= sum_dxhat;
  dx -= (xhat_.array().colwise() * sum_dxhat_xhat.array()).matrix();
  dx = dx.array().colwise() * (inv_std_.array() / n);
  return dx;
}

template <typename T>
void BatchNorm1d<T>::collect_parameters(std::vector<Param<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

template <typename T>
std::string BatchNorm1d<T>::describe() const {
  return "bn1d(" + std::to_string(this->in_.channels) + ")";
}

#define SARFSL_INSTANTIATE(T)      \
  template class Layer<T>;         \
  template class Conv2d<T>;        \
  template class MaxPool2d<T>;     \
  template class ReLU<T>;          \
  template class Flatten<T>;       \
  template class GlobalAvgPool<T>; \
  template class Linear<T>;        \
  template class BatchNorm1d<T>;

SARFSL_INSTANTIATE(float)
SARFSL_INSTANTIATE(double)
#undef SARFSL_INSTANTIATE

}  // namespace sarfsl::nn
