#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tiger::nn {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Dense row-major array with reference semantics: copies of a Tensor share
/// storage, which is how one parameter is referenced from several sites.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }
  std::span<const T> grad() const { return node_->grad; }
  std::vector<T>& grad_buffer() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  /// Accumulates `g` into this tensor's gradient if it requires one.
  void accumulate_grad(std::span<const T> g) const;

  /// Fresh tensor with a copy of the values and no gradient history.
  Tensor detach() const;

  bool shares_storage_with(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Records reverse-mode steps for operations executed on this thread while
/// the tape is alive. Without an active tape operations record nothing.
template <typename T>
class GradientTape {
 public:
  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* active();

  void record(std::shared_ptr<TensorNode<T>> output, std::function<void()> step);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }
  /// Bytes held by recorded intermediate values and gradients.
  std::size_t retained_bytes() const;

 private:
  struct Entry {
    std::shared_ptr<TensorNode<T>> output;
    std::function<void()> step;
  };
  std::vector<Entry> entries_;
  GradientTape* previous_ = nullptr;
};

/// Connects `out` to the active tape when any input requires a gradient.
/// `backward` receives d(loss)/d(out) and accumulates into the inputs.
template <typename T>
void attach_backward(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs,
                     std::function<void(std::span<const T>)> backward);

template <typename T>
void attach_backward(Tensor<T>& out, const std::vector<Tensor<T>>& inputs,
                     std::function<void(std::span<const T>)> backward);

}  // namespace tiger::nn
