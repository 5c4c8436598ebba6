#include "tiger/nn/tensor.hpp"

#include <algorithm>

#include "tiger/common/error.hpp"

namespace tiger::nn {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<TensorNode<T>>()) {
  node_->value.assign(element_count(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<TensorNode<T>>()) {
  if (element_count(shape) != values.size()) {
    throw InvalidArgument("tensor: shape " + to_string(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw InvalidArgument("tensor: item() needs exactly one element");
  return node_->value.front();
}

template <typename T>
void Tensor<T>::accumulate_grad(std::span<const T> g) const {
  if (!requires_grad()) return;
  auto& dst = node_->ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value);
}

namespace {
template <typename T>
GradientTape<T>*& active_tape() {
  thread_local GradientTape<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename T>
GradientTape<T>::GradientTape() : previous_(active_tape<T>()) {
  active_tape<T>() = this;
}

template <typename T>
GradientTape<T>::~GradientTape() {
  active_tape<T>() = previous_;
}

template <typename T>
GradientTape<T>* GradientTape<T>::active() {
  return active_tape<T>();
}

template <typename T>
void GradientTape<T>::record(std::shared_ptr<TensorNode<T>> output, std::function<void()> step) {
  entries_.push_back({std::move(output), std::move(step)});
}

template <typename T>
void GradientTape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) throw InvalidArgument("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;
  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->step();
}

template <typename T>
std::size_t GradientTape<T>::retained_bytes() const {
  std::size_t bytes = 0;
  for (const auto& e : entries_) bytes += (e.output->value.size() + e.output->grad.size()) * sizeof(T);
  return bytes;
}

template <typename T>
void attach_backward(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs,
                     std::function<void(std::span<const T>)> backward) {
  auto* tape = GradientTape<T>::active();
  if (tape == nullptr) return;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<T>* t) { return t && t->requires_grad(); });
  if (!any) return;
  out.set_requires_grad(true);
  auto node = out.node();
  tape->record(node, [node, fn = std::move(backward)] {
    if (node->grad.empty()) return;
    fn(node->grad);
  });
}

template <typename T>
void attach_backward(Tensor<T>& out, const std::vector<Tensor<T>>& inputs,
                     std::function<void(std::span<const T>)> backward) {
  auto* tape = GradientTape<T>::active();
  if (tape == nullptr) return;
  const bool any =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) { return t.requires_grad(); });
  if (!any) return;
  out.set_requires_grad(true);
  auto node = out.node();
  tape->record(node, [node, fn = std::move(backward)] {
    if (node->grad.empty()) return;
    fn(node->grad);
  });
}

template class Tensor<float>;
template class Tensor<double>;
template class GradientTape<float>;
template class GradientTape<double>;
template void attach_backward(Tensor<float>&, std::initializer_list<const Tensor<float>*>,
                              std::function<void(std::span<const float>)>);
template void attach_backward(Tensor<double>&, std::initializer_list<const Tensor<double>*>,
                              std::function<void(std::span<const double>)>);
template void attach_backward(Tensor<float>&, const std::vector<Tensor<float>>&,
                              std::function<void(std::span<const float>)>);
template void attach_backward(Tensor<double>&, const std::vector<Tensor<double>>&,
                              std::function<void(std::span<const double>)>);

}  // namespace tiger::nn
