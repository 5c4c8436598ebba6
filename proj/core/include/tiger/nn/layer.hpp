#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tiger/nn/ops.hpp"
#include "tiger/nn/parameter_store.hpp"

namespace tiger::nn {

enum class LayerKind {
  Conv1d,     // along axis 1 of [C, L] or [C, L, M]
  Conv2d1x1,  // pointwise over every position of [C, ...]
  GroupNorm,
  LayerNorm,  // over channels at each position
  PRelu,
  Relu,
  Sigmoid,
  Softmax,
  AvgPool,
  NearestUpsample,
};

std::string to_string(LayerKind kind);

/// Declarative description of one layer. Convolutions use zero "same"
/// padding of kernel/2, which needs an odd kernel.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t groups = 1;   // conv groups, or group count for GroupNorm
  std::size_t axis = 1;     // softmax / pooling axis
  std::size_t factor = 2;   // pooling / upsampling factor
  bool bias = true;
  double eps = 1e-5;

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel,
                        std::size_t stride = 1, std::size_t groups = 1, bool bias = true);
  static LayerSpec depthwise(std::size_t channels, std::size_t kernel, std::size_t stride = 1);
  static LayerSpec pointwise(std::size_t in, std::size_t out, bool bias = true);
  static LayerSpec group_norm(std::size_t channels, std::size_t groups);
  static LayerSpec layer_norm(std::size_t channels);
  /// `channels` = 1 gives a single shared slope.
  static LayerSpec prelu(std::size_t channels);
  static LayerSpec relu() { return {.kind = LayerKind::Relu}; }
  static LayerSpec sigmoid() { return {.kind = LayerKind::Sigmoid}; }
  static LayerSpec softmax(std::size_t axis) { return {.kind = LayerKind::Softmax, .axis = axis}; }
  static LayerSpec avg_pool(std::size_t axis, std::size_t factor);
  static LayerSpec upsample(std::size_t axis, std::size_t factor);

  std::size_t padding() const { return kernel / 2; }
  void validate() const;

  /// Trainable tensors in registration order, with their init rules.
  std::vector<std::pair<std::string, Shape>> parameter_shapes() const;
  std::size_t parameter_count() const;
  /// Multiply-accumulates for `positions` output positions (convolutions
  /// only; everything else is zero by convention).
  std::uint64_t macs(std::uint64_t positions) const;
};

/// A layer bound to its parameters in a store.
template <typename T>
class Layer {
 public:
  Layer() = default;
  /// Registers parameters under "<prefix>.weight", "<prefix>.bias", ...
  Layer(ParameterStore<T>& store, const std::string& prefix, const LayerSpec& spec);

  Tensor<T> operator()(const Tensor<T>& x) const;

  const LayerSpec& spec() const { return spec_; }
  const std::vector<Tensor<T>>& parameters() const { return params_; }

 private:
  LayerSpec spec_;
  std::vector<Tensor<T>> params_;
};

/// Elementwise selective fusion sigma(x) * y + z.
template <typename T>
Tensor<T> sa_fuse(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& z);

}  // namespace tiger::nn
