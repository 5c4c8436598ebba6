#include "tiger/nn/layer.hpp"

#include <cmath>

#include "tiger/common/error.hpp"

namespace tiger::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Conv2d1x1: return "conv2d_1x1";
    case LayerKind::GroupNorm: return "group_norm";
    case LayerKind::LayerNorm: return "layer_norm";
    case LayerKind::PRelu: return "prelu";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::AvgPool: return "avg_pool";
    case LayerKind::NearestUpsample: return "nearest_upsample";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                          std::size_t groups, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::Conv1d;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.groups = groups;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::depthwise(std::size_t channels, std::size_t kernel, std::size_t stride) {
  return conv(channels, channels, kernel, stride, channels, true);
}

LayerSpec LayerSpec::pointwise(std::size_t in, std::size_t out, bool bias) {
  LayerSpec s = conv(in, out, 1, 1, 1, bias);
  s.kind = LayerKind::Conv2d1x1;
  return s;
}

LayerSpec LayerSpec::group_norm(std::size_t channels, std::size_t groups) {
  LayerSpec s;
  s.kind = LayerKind::GroupNorm;
  s.in_channels = s.out_channels = channels;
  s.groups = groups;
  return s;
}

LayerSpec LayerSpec::layer_norm(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::LayerNorm;
  s.in_channels = s.out_channels = channels;
  return s;
}

LayerSpec LayerSpec::prelu(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::PRelu;
  s.in_channels = s.out_channels = channels;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t axis, std::size_t factor) {
  return {.kind = LayerKind::AvgPool, .axis = axis, .factor = factor};
}

LayerSpec LayerSpec::upsample(std::size_t axis, std::size_t factor) {
  return {.kind = LayerKind::NearestUpsample, .axis = axis, .factor = factor};
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::Conv1d:
    case LayerKind::Conv2d1x1:
      if (in_channels == 0 || out_channels == 0) throw InvalidArgument("conv: zero channels");
      if (groups == 0 || in_channels % groups != 0 || out_channels % groups != 0) {
        throw InvalidArgument("conv: groups " + std::to_string(groups) +
                              " must divide in/out channels " + std::to_string(in_channels) +
                              "/" + std::to_string(out_channels));
      }
      if (stride == 0) throw InvalidArgument("conv: stride must be >= 1");
      if (kernel % 2 == 0) throw InvalidArgument("conv: same padding needs an odd kernel");
      if (kind == LayerKind::Conv2d1x1 && (kernel != 1 || stride != 1)) {
        throw InvalidArgument("conv2d_1x1: kernel and stride must be 1");
      }
      break;
    case LayerKind::GroupNorm:
      if (groups == 0 || in_channels == 0 || in_channels % groups != 0) {
        throw InvalidArgument("group_norm: group count must divide channels");
      }
      break;
    case LayerKind::LayerNorm:
    case LayerKind::PRelu:
      if (in_channels == 0) throw InvalidArgument(to_string(kind) + ": zero channels");
      break;
    case LayerKind::AvgPool:
    case LayerKind::NearestUpsample:
      if (factor == 0) throw InvalidArgument(to_string(kind) + ": factor must be >= 1");
      break;
    default:
      break;
  }
}

std::vector<std::pair<std::string, Shape>> LayerSpec::parameter_shapes() const {
  switch (kind) {
    case LayerKind::Conv1d:
    case LayerKind::Conv2d1x1: {
      std::vector<std::pair<std::string, Shape>> p{
          {"weight", Shape{out_channels, in_channels / groups, kernel}}};
      if (bias) p.push_back({"bias", Shape{out_channels}});
      return p;
    }
    case LayerKind::GroupNorm:
    case LayerKind::LayerNorm:
      return {{"weight", Shape{in_channels}}, {"bias", Shape{in_channels}}};
    case LayerKind::PRelu:
      return {{"slope", Shape{in_channels}}};
    default:
      return {};
  }
}

std::size_t LayerSpec::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameter_shapes()) n += element_count(p.second);
  return n;
}

std::uint64_t LayerSpec::macs(std::uint64_t positions) const {
  if (kind != LayerKind::Conv1d && kind != LayerKind::Conv2d1x1) return 0;
  return static_cast<std::uint64_t>(out_channels) * (in_channels / groups) * kernel * positions;
}

template <typename T>
Layer<T>::Layer(ParameterStore<T>& store, const std::string& prefix, const LayerSpec& spec)
    : spec_(spec) {
  spec_.validate();
  const bool is_conv = spec.kind == LayerKind::Conv1d || spec.kind == LayerKind::Conv2d1x1;
  const double bound = is_conv ? std::sqrt(1.0 / static_cast<double>(
                                                     spec.in_channels / spec.groups * spec.kernel))
                               : 0.0;
  for (const auto& [name, shape] : spec.parameter_shapes()) {
    InitRule rule;
    if (is_conv) {
      rule = InitRule::uniform(bound);
    } else if (spec.kind == LayerKind::PRelu) {
      rule = InitRule::constant(0.25);
    } else {
      rule = InitRule::constant(name == "weight" ? 1.0 : 0.0);
    }
    params_.push_back(store.add(prefix + "." + name, shape, rule));
  }
}

template <typename T>
Tensor<T> Layer<T>::operator()(const Tensor<T>& x) const {
  switch (spec_.kind) {
    case LayerKind::Conv1d:
    case LayerKind::Conv2d1x1: {
      if (x.dim(0) != spec_.in_channels) {
        throw InvalidArgument("conv: input has " + std::to_string(x.dim(0)) +
                              " channels, layer expects " + std::to_string(spec_.in_channels));
      }
      const Tensor<T> bias = spec_.bias ? params_[1] : Tensor<T>();
      if (spec_.kind == LayerKind::Conv2d1x1 && x.rank() > 3) {
        // Fold trailing axes into one batch axis.
        const Shape shape = x.shape();
        Tensor<T> flat = reshape(x, Shape{shape[0], x.numel() / shape[0]});
        Tensor<T> y = conv1d(flat, params_[0], bias, {});
        Shape out_shape = shape;
        out_shape[0] = spec_.out_channels;
        return reshape(y, out_shape);
      }
      return conv1d(x, params_[0], bias,
                    {.stride = spec_.stride, .padding = spec_.padding(), .groups = spec_.groups});
    }
    case LayerKind::GroupNorm:
      return group_norm(x, spec_.groups, params_[0], params_[1], spec_.eps);
    case LayerKind::LayerNorm:
      return layer_norm_channels(x, params_[0], params_[1], spec_.eps);
    case LayerKind::PRelu:
      return prelu(x, params_[0]);
    case LayerKind::Relu:
      return relu(x);
    case LayerKind::Sigmoid:
      return sigmoid(x);
    case LayerKind::Softmax:
      return softmax(x, spec_.axis);
    case LayerKind::AvgPool:
      return avg_pool(x, spec_.axis, spec_.factor);
    case LayerKind::NearestUpsample:
      return upsample_nearest(x, spec_.axis, spec_.factor);
  }
  throw InvalidArgument("layer: unknown kind");
}

template <typename T>
Tensor<T> sa_fuse(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& z) {
  if (x.shape() != y.shape() || x.shape() != z.shape()) {
    throw InvalidArgument("sa_fuse: shapes differ " + to_string(x.shape()) + ", " +
                          to_string(y.shape()) + ", " + to_string(z.shape()));
  }
  return add(mul(sigmoid(x), y), z);
}

template class Layer<float>;
template class Layer<double>;
template Tensor<float> sa_fuse(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> sa_fuse(const Tensor<double>&, const Tensor<double>&,
                                const Tensor<double>&);

}  // namespace tiger::nn
