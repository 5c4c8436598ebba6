#pragma once

#include <cstddef>
#include <vector>

#include "tiger/nn/tensor.hpp"

// Differentiable primitives. Unless noted otherwise, shapes must match
// exactly (there is no broadcasting). "Channel" means dimension 0.

namespace tiger::nn {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
/// Sum of all elements, shape [1].
template <typename T> Tensor<T> sum(const Tensor<T>& x);

template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
/// `slope` has one element (shared) or one per channel.
template <typename T> Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);
/// Normalises along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// x: [Cin, L] or [Cin, L, M] where M is an independent batch axis.
/// weight: [Cout, Cin/groups, kernel]; bias: [Cout] or undefined.
/// Zero padding on both ends of L; output [Cout, Lout(, M)] with
/// Lout = (L + 2 padding - kernel) / stride + 1.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv1dOptions& options);

/// Group normalisation over [C, ...]; each of `groups` channel groups is
/// normalised over all its elements. gamma/beta: [C].
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps);

/// Normalises over the channel axis independently at every position.
template <typename T>
Tensor<T> layer_norm_channels(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              double eps);

/// Average pooling with window = stride = factor along `axis`; the axis
/// length must be divisible by factor.
template <typename T> Tensor<T> avg_pool(const Tensor<T>& x, std::size_t axis, std::size_t factor);
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t axis, std::size_t factor);

/// Zero padding along `axis`.
template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Output dimension i is input dimension perm[i].
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);

/// [m, k] x [k, n] -> [m, n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// [m, k] x [n, k]^T -> [m, n]
template <typename T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

/// Multi-head attention across axis 1 of [channels, L, M] feature maps.
/// q, k: [heads*E, L, M]; v: [heads*Dv, L, M]. For head h the query and key
/// matrices are L x (E*M) (channels of the head folded with M), the map is
/// softmax(Q K^T * scale) of size L x L, and the output rows are mixed
/// values. Returns [heads*Dv, L, M].
template <typename T>
Tensor<T> multihead_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              std::size_t heads, T scale);

}  // namespace tiger::nn
