#include "sarfsl/nn/sequential.hpp"

#include <cstring>

#include "sarfsl/core/error.hpp"
#include "sarfsl/core/io.hpp"

namespace sarfsl::nn {

template <typename T>
Sequential<T>::Sequential(const Sequential& other) : input_(other.input_) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Sequential<T>::push(std::unique_ptr<Layer<T>> layer) {
  require(layer->input_shape() == output_shape(), ErrorKind::kShape,
          "sequential: layer " + layer->describe() + " expects " + to_string(layer->input_shape()) +
              " but network produces " + to_string(output_shape()));
  layers_.push_back(std::move(layer));
}

template <typename T>
Shape Sequential<T>::output_shape() const {
  return layers_.empty() ? input_ : layers_.back()->output_shape();
}

template <typename T>
Matrix<T> Sequential<T>::forward(const Matrix<T>& x) {
  if (layers_.empty()) return x;
  Matrix<T> h = layers_.front()->forward(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h);
  return h;
}

template <typename T>
Matrix<T> Sequential<T>::infer(const Matrix<T>& x) const {
  if (layers_.empty()) return x;
  Matrix<T> h = layers_.front()->infer(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->infer(h);
  return h;
}

template <typename T>
Matrix<T> Sequential<T>::backward(const Matrix<T>& grad_out) {
  Matrix<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (Param<T>* p : parameters()) p->grad.setZero();
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_) layer->collect_parameters(out);
  return out;
}

template <typename T>
std::vector<const Param<T>*> Sequential<T>::parameters() const {
  std::vector<Param<T>*> mut;
  for (auto& layer : layers_) layer->collect_parameters(mut);
  return {mut.begin(), mut.end()};
}

template <typename T>
std::size_t Sequential<T>::num_parameters() const {
  std::size_t n = 0;
  for (const Param<T>* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename T>
std::string Sequential<T>::describe() const {
  std::string s = "in=" + to_string(input_);
  for (const auto& layer : layers_) s += "|" + layer->describe();
  return s;
}

template <typename T>
void Sequential<T>::set_input_grad_required(bool required) {
  if (!layers_.empty()) layers_.front()->set_input_grad_required(required);
}

// ---------------------------------------------------------------------------

template <typename T>
Residual<T>::Residual(Shape in, Sequential<T> branch, Sequential<T> shortcut)
    : Layer<T>(in, branch.output_shape()), branch_(std::move(branch)), shortcut_(std::move(shortcut)) {
  require(branch_.input_shape() == in && shortcut_.input_shape() == in, ErrorKind::kShape,
          "residual: branch input shape mismatch");
  require(shortcut_.output_shape() == branch_.output_shape(), ErrorKind::kShape,
          "residual: shortcut output " + to_string(shortcut_.output_shape()) +
              " differs from branch output " + to_string(branch_.output_shape()));
}

template <typename T>
Matrix<T> Residual<T>::forward(const Matrix<T>& x) {
  Matrix<T> y = branch_.forward(x);
  y += shortcut_.forward(x);
  return y;
}

template <typename T>
Matrix<T> Residual<T>::infer(const Matrix<T>& x) const {
  Matrix<T> y = branch_.infer(x);
  y += shortcut_.infer(x);
  return y;
}

template <typename T>
Matrix<T> Residual<T>::backward(const Matrix<T>& grad_out) {
  Matrix<T> dx = branch_.backward(grad_out);
  dx += shortcut_.backward(grad_out);
  return dx;
}

template <typename T>
void Residual<T>::collect_parameters(std::vector<Param<T>*>& out) {
  for (Param<T>* p : branch_.parameters()) out.push_back(p);
  for (Param<T>* p : shortcut_.parameters()) out.push_back(p);
}

template <typename T>
std::string Residual<T>::describe() const {
  return "res[" + branch_.describe() + "][" + shortcut_.describe() + "]";
}

// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> flatten_parameters(const Sequential<T>& net) {
  std::vector<T> flat;
  flat.reserve(net.num_parameters());
  for (const Param<T>* p : net.parameters()) {
    flat.insert(flat.end(), p->value.data(), p->value.data() + p->value.size());
  }
  return flat;
}

template <typename T>
void assign_parameters(Sequential<T>& net, const std::vector<T>& flat) {
  require(flat.size() == net.num_parameters(), ErrorKind::kShape,
          "assign_parameters: expected " + std::to_string(net.num_parameters()) + " values, got " +
              std::to_string(flat.size()));
  std::size_t offset = 0;
  for (Param<T>* p : net.parameters()) {
    std::memcpy(p->value.data(), flat.data() + offset, sizeof(T) * static_cast<std::size_t>(p->value.size()));
    offset += static_cast<std::size_t>(p->value.size());
  }
}

template <typename T>
std::uint64_t parameter_checksum(const Sequential<T>& net) {
  std::uint64_t h = fnv1a(std::string_view{});
  for (const Param<T>* p : net.parameters()) {
    h = fnv1a(p->value.data(), sizeof(T) * static_cast<std::size_t>(p->value.size()), h);
  }
  return h;
}

template class Sequential<float>;
template class Sequential<double>;
template class Residual<float>;
template class Residual<double>;
template std::vector<float> flatten_parameters(const Sequential<float>&);
template std::vector<double> flatten_parameters(const Sequential<double>&);
template void assign_parameters(Sequential<float>&, const std::vector<float>&);
template void assign_parameters(Sequential<double>&, const std::vector<double>&);
template std::uint64_t parameter_checksum(const Sequential<float>&);
template std::uint64_t parameter_checksum(const Sequential<double>&);

}  // namespace sarfsl::nn
