#include "tiger/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tiger/common/error.hpp"
#include "tiger/nn/mac_counter.hpp"

namespace tiger::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

// A tensor viewed as [outer, n, inner] around one axis.
struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw InvalidArgument(std::string(op) + ": axis " + std::to_string(axis) +
                          " out of range for shape " + to_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
  }
}

template <typename T>
std::size_t positions_after_channel(const Tensor<T>& x) {
  return x.numel() / x.dim(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  auto y = out.mutable_data();
  const auto x1 = a.data();
  const auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] + x2[i];
  attach_backward<T>(out, {&a, &b}, [a, b](std::span<const T> g) {
    a.accumulate_grad(g);
    b.accumulate_grad(g);
  });
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  auto y = out.mutable_data();
  const auto x1 = a.data();
  const auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] - x2[i];
  attach_backward<T>(out, {&a, &b}, [a, b](std::span<const T> g) {
    a.accumulate_grad(g);
    if (b.requires_grad()) {
      std::vector<T> neg(g.begin(), g.end());
      for (auto& v : neg) v = -v;
      b.accumulate_grad(neg);
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  auto y = out.mutable_data();
  const auto x1 = a.data();
  const auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] * x2[i];
  attach_backward<T>(out, {&a, &b}, [a, b](std::span<const T> g) {
    std::vector<T> tmp(g.size());
    if (a.requires_grad()) {
      const auto other = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * other[i];
      a.accumulate_grad(tmp);
    }
    if (b.requires_grad()) {
      const auto other = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * other[i];
      b.accumulate_grad(tmp);
    }
  });
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = factor * in[i];
  attach_backward<T>(out, {&x}, [x, factor](std::span<const T> g) {
    std::vector<T> dx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = factor * g[i];
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto in = x.data();
  Tensor<T> out(Shape{1}, std::accumulate(in.begin(), in.end(), T(0)));
  attach_backward<T>(out, {&x}, [x](std::span<const T> g) {
    std::vector<T> dx(x.numel(), g[0]);
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = T(1) / (T(1) + std::exp(-in[i]));
  auto node = out.node();
  attach_backward<T>(out, {&x}, [x, node](std::span<const T> g) {
    const auto& s = node->value;
    std::vector<T> dx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * s[i] * (T(1) - s[i]);
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] > T(0) ? in[i] : T(0);
  attach_backward<T>(out, {&x}, [x](std::span<const T> g) {
    const auto in = x.data();
    std::vector<T> dx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = in[i] > T(0) ? g[i] : T(0);
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  const std::size_t channels = x.dim(0);
  const std::size_t per = positions_after_channel(x);
  if (slope.numel() != 1 && slope.numel() != channels) {
    throw InvalidArgument("prelu: slope must have 1 or " + std::to_string(channels) + " elements");
  }
  const bool shared = slope.numel() == 1;
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  const auto a = slope.data();
  for (std::size_t c = 0; c < channels; ++c) {
    const T s = a[shared ? 0 : c];
    for (std::size_t p = 0; p < per; ++p) {
      const T v = in[c * per + p];
      y[c * per + p] = v > T(0) ? v : s * v;
    }
  }
  attach_backward<T>(out, {&x, &slope}, [x, slope, channels, per, shared](std::span<const T> g) {
    const auto in = x.data();
    const auto a = slope.data();
    std::vector<T> dx(x.requires_grad() ? g.size() : 0);
    std::vector<T> da(slope.numel(), T(0));
    for (std::size_t c = 0; c < channels; ++c) {
      const T s = a[shared ? 0 : c];
      T acc = 0;
      for (std::size_t p = 0; p < per; ++p) {
        const std::size_t i = c * per + p;
        const T v = in[i];
        if (v > T(0)) {
          if (!dx.empty()) dx[i] = g[i];
        } else {
          if (!dx.empty()) dx[i] = s * g[i];
          acc += v * g[i];
        }
      }
      da[shared ? 0 : c] += acc;
    }
    if (!dx.empty()) x.accumulate_grad(dx);
    slope.accumulate_grad(da);
  });
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis, "softmax");
  if (v.n == 0) throw InvalidArgument("softmax: empty axis");
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      T peak = in[base];
      for (std::size_t j = 1; j < v.n; ++j) peak = std::max(peak, in[base + j * v.inner]);
      T total = 0;
      for (std::size_t j = 0; j < v.n; ++j) {
        const T e = std::exp(in[base + j * v.inner] - peak);
        y[base + j * v.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < v.n; ++j) y[base + j * v.inner] /= total;
    }
  }
  auto node = out.node();
  attach_backward<T>(out, {&x}, [x, node, v](std::span<const T> g) {
    const auto& s = node->value;
    std::vector<T> dx(g.size());
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.n * v.inner + i;
        T dot = 0;
        for (std::size_t j = 0; j < v.n; ++j) dot += g[base + j * v.inner] * s[base + j * v.inner];
        for (std::size_t j = 0; j < v.n; ++j) {
          const std::size_t k = base + j * v.inner;
          dx[k] = s[k] * (g[k] - dot);
        }
      }
    }
    x.accumulate_grad(dx);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv1dOptions& options) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw InvalidArgument("conv1d: input must be [C, L] or [C, L, M], got " + to_string(x.shape()));
  }
  if (weight.rank() != 3) throw InvalidArgument("conv1d: weight must be [Cout, Cin/groups, k]");
  const std::size_t cin = x.dim(0);
  const std::size_t len = x.dim(1);
  const std::size_t batch = x.rank() == 3 ? x.dim(2) : 1;
  const std::size_t cout = weight.dim(0);
  const std::size_t kernel = weight.dim(2);
  const std::size_t groups = options.groups;
  const std::size_t stride = options.stride;
  const std::size_t padding = options.padding;
  if (groups == 0 || stride == 0) throw InvalidArgument("conv1d: groups and stride must be >= 1");
  if (cin % groups != 0 || cout % groups != 0) {
    throw InvalidArgument("conv1d: groups " + std::to_string(groups) +
                          " must divide in/out channels " + std::to_string(cin) + "/" +
                          std::to_string(cout));
  }
  const std::size_t cin_g = cin / groups;
  const std::size_t cout_g = cout / groups;
  if (weight.dim(1) != cin_g) {
    throw InvalidArgument("conv1d: channel mismatch, input has " + std::to_string(cin) +
                          " channels but weight expects " + std::to_string(weight.dim(1) * groups));
  }
  if (bias.defined() && bias.numel() != cout) {
    throw InvalidArgument("conv1d: bias must have " + std::to_string(cout) + " elements");
  }
  if (len + 2 * padding < kernel) throw InvalidArgument("conv1d: input shorter than kernel");
  const std::size_t out_len = (len + 2 * padding - kernel) / stride + 1;

  Shape out_shape = x.rank() == 3 ? Shape{cout, out_len, batch} : Shape{cout, out_len};
  Tensor<T> out(out_shape);
  const auto in = x.data();
  const auto w = weight.data();
  auto y = out.mutable_data();
  MacCounter::add(static_cast<std::uint64_t>(cout) * cin_g * kernel * out_len * batch);

  const bool pointwise = kernel == 1 && stride == 1 && padding == 0 && groups == 1;
  const std::size_t in_plane = len * batch;
  const std::size_t out_plane = out_len * batch;
  if (pointwise) {
    ConstMapMatrix<T> W(w.data(), cout, cin);
    ConstMapMatrix<T> X(in.data(), cin, in_plane);
    MapMatrix<T> Y(y.data(), cout, out_plane);
    Y.noalias() = W * X;
  } else {
    for (std::size_t co = 0; co < cout; ++co) {
      const std::size_t grp = co / cout_g;
      T* yc = y.data() + co * out_plane;
      for (std::size_t cl = 0; cl < cin_g; ++cl) {
        const T* xc = in.data() + (grp * cin_g + cl) * in_plane;
        for (std::size_t j = 0; j < kernel; ++j) {
          const T wv = w[(co * cin_g + cl) * kernel + j];
          for (std::size_t lo = 0; lo < out_len; ++lo) {
            const auto li = static_cast<std::ptrdiff_t>(lo * stride + j) -
                            static_cast<std::ptrdiff_t>(padding);
            if (li < 0 || li >= static_cast<std::ptrdiff_t>(len)) continue;
            const T* src = xc + static_cast<std::size_t>(li) * batch;
            T* dst = yc + lo * batch;
            for (std::size_t m = 0; m < batch; ++m) dst[m] += wv * src[m];
          }
        }
      }
    }
  }
  if (bias.defined()) {
    const auto b = bias.data();
    for (std::size_t co = 0; co < cout; ++co) {
      T* yc = y.data() + co * out_plane;
      for (std::size_t p = 0; p < out_plane; ++p) yc[p] += b[co];
    }
  }

  attach_backward<T>(
      out, {&x, &weight, &bias},
      [=](std::span<const T> g) {
        const auto in = x.data();
        const auto w = weight.data();
        if (bias.requires_grad()) {
          std::vector<T> db(cout, T(0));
          for (std::size_t co = 0; co < cout; ++co) {
            const T* gc = g.data() + co * out_plane;
            T acc = 0;
            for (std::size_t p = 0; p < out_plane; ++p) acc += gc[p];
            db[co] = acc;
          }
          bias.accumulate_grad(db);
        }
        if (pointwise) {
          ConstMapMatrix<T> G(g.data(), cout, out_plane);
          if (x.requires_grad()) {
            std::vector<T> dx(cin * in_plane);
            MapMatrix<T>(dx.data(), cin, in_plane).noalias() =
                ConstMapMatrix<T>(w.data(), cout, cin).transpose() * G;
            x.accumulate_grad(dx);
          }
          if (weight.requires_grad()) {
            std::vector<T> dw(cout * cin);
            MapMatrix<T>(dw.data(), cout, cin).noalias() =
                G * ConstMapMatrix<T>(in.data(), cin, in_plane).transpose();
            weight.accumulate_grad(dw);
          }
          return;
        }
        std::vector<T> dx(x.requires_grad() ? cin * in_plane : 0, T(0));
        std::vector<T> dw(weight.requires_grad() ? weight.numel() : 0, T(0));
        for (std::size_t co = 0; co < cout; ++co) {
          const std::size_t grp = co / cout_g;
          const T* gc = g.data() + co * out_plane;
          for (std::size_t cl = 0; cl < cin_g; ++cl) {
            const std::size_t ci = grp * cin_g + cl;
            const T* xc = in.data() + ci * in_plane;
            for (std::size_t j = 0; j < kernel; ++j) {
              const std::size_t widx = (co * cin_g + cl) * kernel + j;
              const T wv = w[widx];
              T acc = 0;
              for (std::size_t lo = 0; lo < out_len; ++lo) {
                const auto li = static_cast<std::ptrdiff_t>(lo * stride + j) -
                                static_cast<std::ptrdiff_t>(padding);
                if (li < 0 || li >= static_cast<std::ptrdiff_t>(len)) continue;
                const std::size_t off = static_cast<std::size_t>(li) * batch;
                const T* go = gc + lo * batch;
                if (!dx.empty()) {
                  T* dst = dx.data() + ci * in_plane + off;
                  for (std::size_t m = 0; m < batch; ++m) dst[m] += wv * go[m];
                }
                if (!dw.empty()) {
                  const T* src = xc + off;
                  for (std::size_t m = 0; m < batch; ++m) acc += go[m] * src[m];
                }
              }
              if (!dw.empty()) dw[widx] += acc;
            }
          }
        }
        if (!dx.empty()) x.accumulate_grad(dx);
        if (!dw.empty()) weight.accumulate_grad(dw);
      });
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation

namespace {

// Shared backward for normalisations expressed as a set of "groups", each a
// list of element indices normalised together. `xhat` holds the normalised
// values and `inv_std` the per-group reciprocal deviation.
template <typename T>
void norm_input_grad(std::span<const T> dxhat, std::span<const T> xhat, const std::size_t* idx,
                     std::size_t count, T inv_std, std::vector<T>& dx) {
  T sum_d = 0;
  T sum_dx = 0;
  for (std::size_t i = 0; i < count; ++i) {
    sum_d += dxhat[idx[i]];
    sum_dx += dxhat[idx[i]] * xhat[idx[i]];
  }
  const T n = static_cast<T>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = idx[i];
    dx[k] += inv_std / n * (n * dxhat[k] - sum_d - xhat[k] * sum_dx);
  }
}

}  // namespace

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps) {
  const std::size_t channels = x.dim(0);
  const std::size_t per = positions_after_channel(x);
  if (groups == 0 || channels % groups != 0) {
    throw InvalidArgument("group_norm: " + std::to_string(groups) + " groups do not divide " +
                          std::to_string(channels) + " channels");
  }
  if (per == 0) throw InvalidArgument("group_norm: empty normalisation region");
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw InvalidArgument("group_norm: affine parameters must have one entry per channel");
  }
  const std::size_t group_size = channels / groups * per;
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  const auto ga = gamma.data();
  const auto be = beta.data();
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const T* src = in.data() + gi * group_size;
    // Two-pass moments in double keep float inputs stable.
    double mean = 0;
    for (std::size_t i = 0; i < group_size; ++i) mean += src[i];
    mean /= static_cast<double>(group_size);
    double var = 0;
    for (std::size_t i = 0; i < group_size; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(group_size);
    const T inv = static_cast<T>(1.0 / std::sqrt(var + eps));
    inv_std[gi] = inv;
    for (std::size_t i = 0; i < group_size; ++i) {
      const std::size_t k = gi * group_size + i;
      const std::size_t c = k / per;
      xhat[k] = static_cast<T>((src[i] - mean)) * inv;
      y[k] = ga[c] * xhat[k] + be[c];
    }
  }
  attach_backward<T>(
      out, {&x, &gamma, &beta},
      [x, gamma, beta, groups, group_size, per, channels, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](std::span<const T> g) {
        const auto ga = gamma.data();
        if (gamma.requires_grad() || beta.requires_grad()) {
          std::vector<T> dg(channels, T(0));
          std::vector<T> db(channels, T(0));
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t p = 0; p < per; ++p) {
              dg[c] += g[c * per + p] * xhat[c * per + p];
              db[c] += g[c * per + p];
            }
          }
          gamma.accumulate_grad(dg);
          beta.accumulate_grad(db);
        }
        if (!x.requires_grad()) return;
        std::vector<T> dxhat(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) dxhat[k] = g[k] * ga[k / per];
        std::vector<T> dx(g.size(), T(0));
        std::vector<std::size_t> idx(group_size);
        for (std::size_t gi = 0; gi < groups; ++gi) {
          std::iota(idx.begin(), idx.end(), gi * group_size);
          norm_input_grad<T>(dxhat, xhat, idx.data(), group_size, inv_std[gi], dx);
        }
        x.accumulate_grad(dx);
      });
  return out;
}

template <typename T>
Tensor<T> layer_norm_channels(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              double eps) {
  const std::size_t channels = x.dim(0);
  const std::size_t per = positions_after_channel(x);
  if (channels == 0 || per == 0) throw InvalidArgument("layer_norm: empty normalisation region");
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw InvalidArgument("layer_norm: affine parameters must have one entry per channel");
  }
  Tensor<T> out(x.shape());
  auto y = out.mutable_data();
  const auto in = x.data();
  const auto ga = gamma.data();
  const auto be = beta.data();
  std::vector<double> mean(per, 0.0);
  std::vector<double> var(per, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < per; ++p) mean[p] += in[c * per + p];
  }
  for (auto& m : mean) m /= static_cast<double>(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < per; ++p) {
      const double d = in[c * per + p] - mean[p];
      var[p] += d * d;
    }
  }
  std::vector<T> inv_std(per);
  for (std::size_t p = 0; p < per; ++p) {
    inv_std[p] = static_cast<T>(1.0 / std::sqrt(var[p] / static_cast<double>(channels) + eps));
  }
  std::vector<T> xhat(x.numel());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < per; ++p) {
      const std::size_t k = c * per + p;
      xhat[k] = static_cast<T>(in[k] - mean[p]) * inv_std[p];
      y[k] = ga[c] * xhat[k] + be[c];
    }
  }
  attach_backward<T>(
      out, {&x, &gamma, &beta},
      [x, gamma, beta, channels, per, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](std::span<const T> g) {
        const auto ga = gamma.data();
        if (gamma.requires_grad() || beta.requires_grad()) {
          std::vector<T> dg(channels, T(0));
          std::vector<T> db(channels, T(0));
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t p = 0; p < per; ++p) {
              dg[c] += g[c * per + p] * xhat[c * per + p];
              db[c] += g[c * per + p];
            }
          }
          gamma.accumulate_grad(dg);
          beta.accumulate_grad(db);
        }
        if (!x.requires_grad()) return;
        std::vector<T> sum_d(per, T(0));
        std::vector<T> sum_dx(per, T(0));
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t p = 0; p < per; ++p) {
            const std::size_t k = c * per + p;
            const T d = g[k] * ga[c];
            sum_d[p] += d;
            sum_dx[p] += d * xhat[k];
          }
        }
        const T n = static_cast<T>(channels);
        std::vector<T> dx(g.size());
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t p = 0; p < per; ++p) {
            const std::size_t k = c * per + p;
            const T d = g[k] * ga[c];
            dx[k] = inv_std[p] / n * (n * d - sum_d[p] - xhat[k] * sum_dx[p]);
          }
        }
        x.accumulate_grad(dx);
      });
  return out;
}

// ---------------------------------------------------------------------------
// Resampling and layout

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, std::size_t axis, std::size_t factor) {
  const AxisView v = axis_view(x.shape(), axis, "avg_pool");
  if (factor == 0 || v.n % factor != 0) {
    throw InvalidArgument("avg_pool: axis length " + std::to_string(v.n) +
                          " not divisible by factor " + std::to_string(factor));
  }
  Shape shape = x.shape();
  shape[axis] /= factor;
  const std::size_t n_out = v.n / factor;
  Tensor<T> out(shape);
  auto y = out.mutable_data();
  const auto in = x.data();
  const T w = T(1) / static_cast<T>(factor);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < n_out; ++j) {
      T* dst = y.data() + (o * n_out + j) * v.inner;
      for (std::size_t r = 0; r < factor; ++r) {
        const T* src = in.data() + (o * v.n + j * factor + r) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
      }
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] *= w;
    }
  }
  attach_backward<T>(out, {&x}, [x, v, factor, n_out, w](std::span<const T> g) {
    std::vector<T> dx(x.numel());
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t j = 0; j < n_out; ++j) {
        const T* src = g.data() + (o * n_out + j) * v.inner;
        for (std::size_t r = 0; r < factor; ++r) {
          T* dst = dx.data() + (o * v.n + j * factor + r) * v.inner;
          for (std::size_t i = 0; i < v.inner; ++i) dst[i] = w * src[i];
        }
      }
    }
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t axis, std::size_t factor) {
  const AxisView v = axis_view(x.shape(), axis, "upsample_nearest");
  if (factor == 0) throw InvalidArgument("upsample_nearest: factor must be >= 1");
  Shape shape = x.shape();
  shape[axis] *= factor;
  const std::size_t n_out = v.n * factor;
  Tensor<T> out(shape);
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < n_out; ++j) {
      const T* src = in.data() + (o * v.n + j / factor) * v.inner;
      std::copy(src, src + v.inner, y.data() + (o * n_out + j) * v.inner);
    }
  }
  attach_backward<T>(out, {&x}, [x, v, factor, n_out](std::span<const T> g) {
    std::vector<T> dx(x.numel(), T(0));
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t j = 0; j < n_out; ++j) {
        const T* src = g.data() + (o * n_out + j) * v.inner;
        T* dst = dx.data() + (o * v.n + j / factor) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
      }
    }
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after) {
  const AxisView v = axis_view(x.shape(), axis, "pad");
  Shape shape = x.shape();
  shape[axis] += before + after;
  const std::size_t n_out = shape[axis];
  Tensor<T> out(shape);
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy(in.data() + o * v.n * v.inner, in.data() + (o + 1) * v.n * v.inner,
              y.data() + (o * n_out + before) * v.inner);
  }
  attach_backward<T>(out, {&x}, [x, v, before, n_out](std::span<const T> g) {
    std::vector<T> dx(x.numel());
    for (std::size_t o = 0; o < v.outer; ++o) {
      const T* src = g.data() + (o * n_out + before) * v.inner;
      std::copy(src, src + v.n * v.inner, dx.data() + o * v.n * v.inner);
    }
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisView v = axis_view(x.shape(), axis, "slice");
  if (start + length > v.n) {
    throw InvalidArgument("slice: range [" + std::to_string(start) + ", " +
                          std::to_string(start + length) + ") exceeds axis length " +
                          std::to_string(v.n));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  Tensor<T> out(shape);
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    const T* src = in.data() + (o * v.n + start) * v.inner;
    std::copy(src, src + length * v.inner, y.data() + o * length * v.inner);
  }
  attach_backward<T>(out, {&x}, [x, v, start, length](std::span<const T> g) {
    std::vector<T> dx(x.numel(), T(0));
    for (std::size_t o = 0; o < v.outer; ++o) {
      const T* src = g.data() + o * length * v.inner;
      std::copy(src, src + length * v.inner, dx.data() + (o * v.n + start) * v.inner);
    }
    x.accumulate_grad(dx);
  });
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  Shape shape = parts.front().shape();
  axis_view(shape, axis, "concat");
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) throw InvalidArgument("concat: rank mismatch");
    total += s[axis];
    s[axis] = shape[axis];
    if (s != shape) throw InvalidArgument("concat: shapes differ outside the concat axis");
  }
  shape[axis] = total;
  Tensor<T> out(shape);
  const AxisView v = axis_view(shape, axis, "concat");
  auto y = out.mutable_data();
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t n = p.dim(axis);
    const auto in = p.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy(in.data() + o * n * v.inner, in.data() + (o + 1) * n * v.inner,
                y.data() + (o * total + offset) * v.inner);
    }
    offsets.push_back(offset);
    offset += n;
  }
  attach_backward<T>(out, parts, [parts, axis, v, total, offsets](std::span<const T> g) {
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const auto& p = parts[pi];
      if (!p.requires_grad()) continue;
      const std::size_t n = p.dim(axis);
      std::vector<T> dx(p.numel());
      for (std::size_t o = 0; o < v.outer; ++o) {
        const T* src = g.data() + (o * total + offsets[pi]) * v.inner;
        std::copy(src, src + n * v.inner, dx.data() + o * n * v.inner);
      }
      p.accumulate_grad(dx);
    }
  });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (element_count(shape) != x.numel()) {
    throw InvalidArgument("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  const auto in = x.data();
  Tensor<T> out(std::move(shape), std::vector<T>(in.begin(), in.end()));
  attach_backward<T>(out, {&x}, [x](std::span<const T> g) { x.accumulate_grad(g); });
  return out;
}

namespace {

// Index map from output linear index to input linear index.
std::vector<std::size_t> permutation_map(const Shape& in_shape, const std::vector<std::size_t>& perm,
                                         Shape& out_shape) {
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  out_shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];
  const std::size_t total = element_count(in_shape);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += counter[i] * in_strides[perm[i]];
    map[lin] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++counter[i] < out_shape[i]) break;
      counter[i] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  if (perm.size() != x.rank()) throw InvalidArgument("permute: permutation rank mismatch");
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) throw InvalidArgument("permute: not a permutation");
    seen[p] = true;
  }
  Shape out_shape;
  auto map = permutation_map(x.shape(), perm, out_shape);
  Tensor<T> out(out_shape);
  auto y = out.mutable_data();
  const auto in = x.data();
  for (std::size_t i = 0; i < map.size(); ++i) y[i] = in[map[i]];
  attach_backward<T>(out, {&x}, [x, map = std::move(map)](std::span<const T> g) {
    std::vector<T> dx(x.numel());
    for (std::size_t i = 0; i < map.size(); ++i) dx[map[i]] = g[i];
    x.accumulate_grad(dx);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw InvalidArgument("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                          to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out(Shape{m, n});
  MapMatrix<T>(out.mutable_data().data(), m, n).noalias() =
      ConstMapMatrix<T>(a.data().data(), m, k) * ConstMapMatrix<T>(b.data().data(), k, n);
  MacCounter::add(static_cast<std::uint64_t>(m) * k * n);
  attach_backward<T>(out, {&a, &b}, [a, b, m, k, n](std::span<const T> g) {
    ConstMapMatrix<T> G(g.data(), m, n);
    if (a.requires_grad()) {
      std::vector<T> da(m * k);
      MapMatrix<T>(da.data(), m, k).noalias() =
          G * ConstMapMatrix<T>(b.data().data(), k, n).transpose();
      a.accumulate_grad(da);
    }
    if (b.requires_grad()) {
      std::vector<T> db(k * n);
      MapMatrix<T>(db.data(), k, n).noalias() =
          ConstMapMatrix<T>(a.data().data(), m, k).transpose() * G;
      b.accumulate_grad(db);
    }
  });
  return out;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw InvalidArgument("matmul_nt: incompatible shapes " + to_string(a.shape()) + " and " +
                          to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor<T> out(Shape{m, n});
  MapMatrix<T>(out.mutable_data().data(), m, n).noalias() =
      ConstMapMatrix<T>(a.data().data(), m, k) *
      ConstMapMatrix<T>(b.data().data(), n, k).transpose();
  MacCounter::add(static_cast<std::uint64_t>(m) * k * n);
  attach_backward<T>(out, {&a, &b}, [a, b, m, k, n](std::span<const T> g) {
    ConstMapMatrix<T> G(g.data(), m, n);
    if (a.requires_grad()) {
      std::vector<T> da(m * k);
      MapMatrix<T>(da.data(), m, k).noalias() = G * ConstMapMatrix<T>(b.data().data(), n, k);
      a.accumulate_grad(da);
    }
    if (b.requires_grad()) {
      std::vector<T> db(n * k);
      MapMatrix<T>(db.data(), n, k).noalias() =
          G.transpose() * ConstMapMatrix<T>(a.data().data(), m, k);
      b.accumulate_grad(db);
    }
  });
  return out;
}

namespace {

// Copies head `h` of a [heads*C, L, M] map into an L x (C*M) matrix whose
// row l lists channel-major (c, m) entries.
template <typename T>
void gather_head(std::span<const T> src, std::size_t h, std::size_t c_per_head, std::size_t len,
                 std::size_t batch, RowMatrix<T>& dst) {
  dst.resize(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(c_per_head * batch));
  for (std::size_t c = 0; c < c_per_head; ++c) {
    const T* plane = src.data() + (h * c_per_head + c) * len * batch;
    for (std::size_t l = 0; l < len; ++l) {
      std::copy(plane + l * batch, plane + (l + 1) * batch, dst.data() + l * c_per_head * batch + c * batch);
    }
  }
}

template <typename T>
void scatter_head(const RowMatrix<T>& src, std::size_t h, std::size_t c_per_head, std::size_t len,
                  std::size_t batch, std::span<T> dst) {
  for (std::size_t c = 0; c < c_per_head; ++c) {
    T* plane = dst.data() + (h * c_per_head + c) * len * batch;
    for (std::size_t l = 0; l < len; ++l) {
      const T* row = src.data() + l * c_per_head * batch + c * batch;
      for (std::size_t m = 0; m < batch; ++m) plane[l * batch + m] += row[m];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> multihead_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              std::size_t heads, T scale) {
  if (q.rank() != 3 || k.shape() != q.shape() || v.rank() != 3 || v.dim(1) != q.dim(1) ||
      v.dim(2) != q.dim(2)) {
    throw InvalidArgument("multihead_attention: expected q,k [H*E, L, M] and v [H*Dv, L, M]");
  }
  if (heads == 0 || q.dim(0) % heads != 0 || v.dim(0) % heads != 0) {
    throw InvalidArgument("multihead_attention: heads must divide query and value channels");
  }
  const std::size_t len = q.dim(1);
  const std::size_t batch = q.dim(2);
  const std::size_t e = q.dim(0) / heads;
  const std::size_t dv = v.dim(0) / heads;
  Tensor<T> out(v.shape());
  auto y = out.mutable_data();
  std::vector<RowMatrix<T>> probs(heads);
  RowMatrix<T> qh, kh, vh, oh;
  for (std::size_t h = 0; h < heads; ++h) {
    gather_head(q.data(), h, e, len, batch, qh);
    gather_head(k.data(), h, e, len, batch, kh);
    gather_head(v.data(), h, dv, len, batch, vh);
    RowMatrix<T> s = (qh * kh.transpose()) * scale;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const T peak = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - peak).exp();
      s.row(r) /= s.row(r).sum();
    }
    oh.noalias() = s * vh;
    scatter_head(oh, h, dv, len, batch, y);
    probs[h] = std::move(s);
  }
  MacCounter::add(static_cast<std::uint64_t>(heads) * len * len * (e + dv) * batch);

  attach_backward<T>(
      out, {&q, &k, &v},
      [q, k, v, heads, scale, len, batch, e, dv, probs = std::move(probs)](std::span<const T> g) {
        std::vector<T> dq(q.requires_grad() ? q.numel() : 0, T(0));
        std::vector<T> dk(k.requires_grad() ? k.numel() : 0, T(0));
        std::vector<T> dvv(v.requires_grad() ? v.numel() : 0, T(0));
        RowMatrix<T> qh, kh, vh, go, tmp;
        for (std::size_t h = 0; h < heads; ++h) {
          const RowMatrix<T>& p = probs[h];
          gather_head(g, h, dv, len, batch, go);
          if (!dvv.empty()) {
            tmp.noalias() = p.transpose() * go;
            scatter_head<T>(tmp, h, dv, len, batch, dvv);
          }
          if (dq.empty() && dk.empty()) continue;
          gather_head(v.data(), h, dv, len, batch, vh);
          RowMatrix<T> dp = go * vh.transpose();
          RowMatrix<T> ds = p.cwiseProduct(dp);
          const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
          ds.noalias() -= p.cwiseProduct(row_dot.replicate(1, p.cols()));
          ds *= scale;
          if (!dq.empty()) {
            gather_head(k.data(), h, e, len, batch, kh);
            tmp.noalias() = ds * kh;
            scatter_head<T>(tmp, h, e, len, batch, dq);
          }
          if (!dk.empty()) {
            gather_head(q.data(), h, e, len, batch, qh);
            tmp.noalias() = ds.transpose() * qh;
            scatter_head<T>(tmp, h, e, len, batch, dk);
          }
        }
        if (!dq.empty()) q.accumulate_grad(dq);
        if (!dk.empty()) k.accumulate_grad(dk);
        if (!dvv.empty()) v.accumulate_grad(dvv);
      });
  return out;
}

#define TIGER_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                            const Conv1dOptions&);                                             \
  template Tensor<T> group_norm(const Tensor<T>&, std::size_t, const Tensor<T>&,               \
                                const Tensor<T>&, double);                                     \
  template Tensor<T> layer_norm_channels(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                         double);                                              \
  template Tensor<T> avg_pool(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> upsample_nearest(const Tensor<T>&, std::size_t, std::size_t);             \
  template Tensor<T> pad(const Tensor<T>&, std::size_t, std::size_t, std::size_t);             \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);           \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> multihead_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                         std::size_t, T);

TIGER_INSTANTIATE_OPS(float)
TIGER_INSTANTIATE_OPS(double)

#undef TIGER_INSTANTIATE_OPS

}  // namespace tiger::nn
