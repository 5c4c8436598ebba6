#include "tiger/separator/separator.hpp"

#include <cmath>

#include "tiger/common/error.hpp"

namespace tiger::separator {

using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;

std::string to_string(PathOrder order) {
  switch (order) {
    case PathOrder::FrequencyTime: return "F-T";
    case PathOrder::TimeTime: return "T-T";
    case PathOrder::FrequencyFrequency: return "F-F";
  }
  return "?";
}

PathOrder parse_path_order(std::string_view text) {
  if (text == "F-T") return PathOrder::FrequencyTime;
  if (text == "T-T") return PathOrder::TimeTime;
  if (text == "F-F") return PathOrder::FrequencyFrequency;
  throw InvalidArgument("unknown path order '" + std::string(text) + "' (use F-T, T-T or F-F)");
}

void SeparatorConfig::validate() const {
  if (N == 0 || H == 0 || E == 0) throw InvalidArgument("separator: N, H and E must be positive");
  if (D == 0) throw InvalidArgument("separator: D must be at least 1");
  if (B == 0) throw InvalidArgument("separator: B must be at least 1");
  if (A == 0 || N % A != 0) {
    throw InvalidArgument("separator: N=" + std::to_string(N) + " is not divisible by A=" +
                          std::to_string(A));
  }
}

std::vector<Axis> SeparatorConfig::path_axes() const {
  switch (order) {
    case PathOrder::FrequencyTime: return {Axis::Frequency, Axis::Time};
    case PathOrder::TimeTime: return {Axis::Time, Axis::Time};
    case PathOrder::FrequencyFrequency: return {Axis::Frequency, Axis::Frequency};
  }
  return {};
}

// ---------------------------------------------------------------------------

template <typename T>
Msa<T>::Msa(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
            std::size_t hidden, std::size_t depth)
    : depth_(depth) {
  if (depth == 0) throw InvalidArgument("msa: depth must be at least 1");
  const std::string p = prefix + ".";
  in_proj_ = nn::Layer<T>(store, p + "in_proj", LayerSpec::pointwise(channels, hidden));
  for (std::size_t d = 1; d <= depth; ++d) {
    down_.emplace_back(store, p + "down." + std::to_string(d), LayerSpec::depthwise(hidden, 5, 2));
  }
  mlc_.emplace_back(store, p + "mlc.0", LayerSpec::pointwise(hidden, hidden, false));
  mlc_.emplace_back(store, p + "mlc.1", LayerSpec::group_norm(hidden, 1));
  mlc_.emplace_back(store, p + "mlc.2", LayerSpec::depthwise(hidden, 5));
  mlc_.emplace_back(store, p + "mlc.3", LayerSpec::relu());
  mlc_.emplace_back(store, p + "mlc.4", LayerSpec::pointwise(hidden, hidden, false));
  mlc_.emplace_back(store, p + "mlc.5", LayerSpec::group_norm(hidden, 1));
  tau_ = nn::Layer<T>(store, p + "tau", LayerSpec::depthwise(hidden, 3));
  rho_ = nn::Layer<T>(store, p + "rho", LayerSpec::depthwise(hidden, 3));
  for (std::size_t d = 0; d <= depth; ++d) {
    phi_.emplace_back(store, p + "phi." + std::to_string(d), LayerSpec::depthwise(hidden, 3));
  }
  for (std::size_t d = 0; d < depth; ++d) {
    const std::string s = std::to_string(d);
    alpha_.emplace_back(store, p + "alpha." + s, LayerSpec::depthwise(hidden, 3));
    beta_.emplace_back(store, p + "beta." + s, LayerSpec::depthwise(hidden, 3));
    gamma_.emplace_back(store, p + "gamma." + s, LayerSpec::depthwise(hidden, 3));
  }
  out_proj_ = nn::Layer<T>(store, p + "out_proj", LayerSpec::pointwise(hidden, channels));
}

template <typename T>
Tensor<T> Msa<T>::operator()(const Tensor<T>& x, std::vector<Shape>* trace) const {
  if (x.rank() != 3) throw InvalidArgument("msa: expected [N, L, M], got " + nn::to_string(x.shape()));
  const std::size_t len = x.dim(1);
  const std::size_t unit = std::size_t{1} << depth_;
  const std::size_t padded = (len + unit - 1) / unit * unit;
  const Tensor<T> input = padded == len ? x : nn::pad(x, 1, 0, padded - len);

  std::vector<Tensor<T>> levels;
  levels.push_back(in_proj_(input));
  for (const auto& down : down_) levels.push_back(down(levels.back()));
  if (trace != nullptr) {
    for (const auto& e : levels) trace->push_back(e.shape());
  }

  Tensor<T> global = levels[depth_];
  for (std::size_t d = 0; d < depth_; ++d) {
    global = nn::add(global, nn::avg_pool(levels[d], 1, std::size_t{1} << (depth_ - d)));
  }
  for (const auto& layer : mlc_) global = layer(global);
  const Tensor<T> tau = tau_(global);
  const Tensor<T> rho = rho_(global);

  std::vector<Tensor<T>> fused(depth_ + 1);
  for (std::size_t d = 0; d <= depth_; ++d) {
    const std::size_t factor = std::size_t{1} << (depth_ - d);
    fused[d] = nn::sa_fuse(nn::upsample_nearest(tau, 1, factor), phi_[d](levels[d]),
                           nn::upsample_nearest(rho, 1, factor));
  }

  Tensor<T> decoded = fused[depth_];
  for (std::size_t d = depth_; d-- > 0;) {
    decoded = nn::sa_fuse(nn::upsample_nearest(alpha_[d](decoded), 1, 2), gamma_[d](fused[d]),
                          nn::upsample_nearest(beta_[d](decoded), 1, 2));
  }
  if (padded != len) decoded = nn::slice(decoded, 1, 0, len);
  return out_proj_(decoded);
}

// ---------------------------------------------------------------------------

template <typename T>
F3a<T>::F3a(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
            std::size_t heads, std::size_t head_channels)
    : heads_(heads), head_channels_(head_channels) {
  if (heads == 0 || channels % heads != 0) {
    throw InvalidArgument("f3a: " + std::to_string(channels) + " channels not divisible by " +
                          std::to_string(heads) + " heads");
  }
  const std::string p = prefix + ".";
  const std::size_t qk = heads * head_channels;
  query_ = nn::Layer<T>(store, p + "query", LayerSpec::pointwise(channels, qk));
  // A key bias shifts every logit of a row equally and cancels in softmax.
  key_ = nn::Layer<T>(store, p + "key", LayerSpec::pointwise(channels, qk, false));
  value_ = nn::Layer<T>(store, p + "value", LayerSpec::pointwise(channels, channels));
  out_ = nn::Layer<T>(store, p + "out", LayerSpec::pointwise(channels, channels));
}

template <typename T>
Tensor<T> F3a<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 3) throw InvalidArgument("f3a: expected [N, L, M], got " + nn::to_string(x.shape()));
  const std::size_t folded = head_channels_ * x.dim(2);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(folded)));
  const Tensor<T> mixed = nn::multihead_attention(query_(x), key_(x), value_(x), heads_, scale);
  return out_(mixed);
}

// ---------------------------------------------------------------------------

template <typename T>
FfiPath<T>::FfiPath(nn::ParameterStore<T>& store, const std::string& prefix,
                    const SeparatorConfig& cfg, Axis axis)
    : axis_(axis),
      msa_(store, prefix + ".msa", cfg.N, cfg.H, cfg.D),
      f3a_(store, prefix + ".f3a", cfg.N, cfg.A, cfg.E),
      norm_(store, prefix + ".norm", LayerSpec::layer_norm(cfg.N)) {}

template <typename T>
Tensor<T> FfiPath<T>::operator()(const Tensor<T>& features) const {
  if (features.rank() != 3) {
    throw InvalidArgument("ffi path: expected N x K x T, got " + nn::to_string(features.shape()));
  }
  if (axis_ == Axis::Frequency) return nn::add(norm_(f3a_(msa_(features))), features);
  const Tensor<T> frames = nn::permute(features, {0, 2, 1});
  const Tensor<T> y = nn::permute(norm_(f3a_(msa_(frames))), {0, 2, 1});
  return nn::add(y, features);
}

// ---------------------------------------------------------------------------

template <typename T>
Separator<T>::Separator(nn::ParameterStore<T>& store, const std::string& prefix,
                        const SeparatorConfig& cfg)
    : cfg_(cfg) {
  cfg.validate();
  const auto axes = cfg.path_axes();
  for (std::size_t i = 0; i < axes.size(); ++i) {
    paths_.emplace_back(store, prefix + ".path" + std::to_string(i), cfg, axes[i]);
  }
}

template <typename T>
Tensor<T> Separator<T>::block(const Tensor<T>& features) const {
  Tensor<T> x = features;
  for (const auto& path : paths_) x = path(x);
  return x;
}

template <typename T>
Tensor<T> Separator<T>::operator()(const Tensor<T>& features) const {
  if (features.rank() != 3 || features.dim(0) != cfg_.N) {
    throw InvalidArgument("separator: expected " + std::to_string(cfg_.N) + " x K x T, got " +
                          nn::to_string(features.shape()));
  }
  Tensor<T> x = features;
  for (std::size_t b = 0; b < cfg_.B; ++b) x = block(x);
  return x;
}

template class Msa<float>;
template class Msa<double>;
template class F3a<float>;
template class F3a<double>;
template class FfiPath<float>;
template class FfiPath<double>;
template class Separator<float>;
template class Separator<double>;

}  // namespace tiger::separator
