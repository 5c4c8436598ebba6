#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tiger/nn/layer.hpp"

namespace tiger::separator {

/// Order of the two paths inside one block: F = attend across sub-bands,
/// T = attend across frames.
enum class PathOrder { FrequencyTime, TimeTime, FrequencyFrequency };

std::string to_string(PathOrder order);
/// Accepts "F-T", "T-T" and "F-F".
PathOrder parse_path_order(std::string_view text);

enum class Axis { Frequency, Time };

struct SeparatorConfig {
  std::size_t N = 128;  // feature channels
  std::size_t H = 256;  // multi-scale hidden channels
  std::size_t D = 4;    // downsampling depth
  std::size_t B = 4;    // block repetitions (parameters shared)
  std::size_t A = 4;    // attention heads
  std::size_t E = 4;    // query/key channels per head
  PathOrder order = PathOrder::FrequencyTime;

  void validate() const;
  std::vector<Axis> path_axes() const;

  friend bool operator==(const SeparatorConfig&, const SeparatorConfig&) = default;
};

/// Multi-scale selective attention over axis 1 of an [N, L, M] map.
///
/// The axis is zero-padded to a multiple of 2^D. A pointwise conv gives
/// E_0 at width H; depthwise stride-2 convs give E_1..E_D. All levels are
/// average-pooled to the coarsest length and summed into G, which a small
/// conv stack turns into G'. Two depthwise convs of G' give tau and rho, and
/// every level is fused as L_d = sa(up(tau), phi_d(E_d), up(rho)). Decoding
/// runs top-down with D_D = L_D and
/// D_d = sa(up(alpha_d(D_{d+1})), gamma_d(L_d), up(beta_d(D_{d+1}))).
/// D_0 is cropped back to L and projected to N channels.
template <typename T>
class Msa {
 public:
  Msa() = default;
  Msa(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
      std::size_t hidden, std::size_t depth);

  /// `trace`, when given, receives the shapes of E_0..E_D.
  nn::Tensor<T> operator()(const nn::Tensor<T>& x, std::vector<nn::Shape>* trace = nullptr) const;

  std::size_t depth() const { return depth_; }

 private:
  std::size_t depth_ = 0;
  nn::Layer<T> in_proj_;
  std::vector<nn::Layer<T>> down_;
  std::vector<nn::Layer<T>> mlc_;
  nn::Layer<T> tau_, rho_;
  std::vector<nn::Layer<T>> phi_;
  std::vector<nn::Layer<T>> alpha_, beta_, gamma_;
  nn::Layer<T> out_proj_;
};

/// Full-band attention across axis 1 of an [N, L, M] map. Queries and keys
/// have A*E channels, values N; for each head the channels are folded with
/// M so the attention map is L x L with scale 1/sqrt(E*M).
template <typename T>
class F3a {
 public:
  F3a() = default;
  F3a(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
      std::size_t heads, std::size_t head_channels);

  nn::Tensor<T> operator()(const nn::Tensor<T>& x) const;

 private:
  std::size_t heads_ = 0;
  std::size_t head_channels_ = 0;
  nn::Layer<T> query_, key_, value_, out_;
};

/// One path: LayerNorm(F3A(MSA(u))) + u over the chosen axis of N x K x T.
template <typename T>
class FfiPath {
 public:
  FfiPath() = default;
  FfiPath(nn::ParameterStore<T>& store, const std::string& prefix, const SeparatorConfig& cfg,
          Axis axis);

  nn::Tensor<T> operator()(const nn::Tensor<T>& features) const;

  Axis axis() const { return axis_; }
  const Msa<T>& msa() const { return msa_; }
  const F3a<T>& f3a() const { return f3a_; }

 private:
  Axis axis_ = Axis::Frequency;
  Msa<T> msa_;
  F3a<T> f3a_;
  nn::Layer<T> norm_;
};

/// B repetitions of one block of two paths with a single parameter set.
template <typename T>
class Separator {
 public:
  Separator() = default;
  Separator(nn::ParameterStore<T>& store, const std::string& prefix, const SeparatorConfig& cfg);

  nn::Tensor<T> block(const nn::Tensor<T>& features) const;
  nn::Tensor<T> operator()(const nn::Tensor<T>& features) const;

  const SeparatorConfig& config() const { return cfg_; }
  const std::vector<FfiPath<T>>& paths() const { return paths_; }

 private:
  SeparatorConfig cfg_;
  std::vector<FfiPath<T>> paths_;
};

}  // namespace tiger::separator
