#include "tiger/profiler/profiler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "tiger/common/error.hpp"
#include "tiger/nn/layer.hpp"
#include "tiger/nn/mac_counter.hpp"
#include "tiger/training/losses.hpp"

namespace tiger::profiler {

using nn::LayerSpec;

namespace {

const char* kModules[] = {"band_split", "separator", "band_restore"};

class RowBuilder {
 public:
  explicit RowBuilder(std::vector<CostRow>& rows) : rows_(rows) {}

  void layer(const std::string& module, const std::string& name, const LayerSpec& spec,
             std::uint64_t positions, std::uint64_t repeats = 1) {
    rows_.push_back({name, module, spec.parameter_count(), spec.macs(positions) * repeats});
  }
  void product(const std::string& module, const std::string& name, std::uint64_t macs) {
    rows_.push_back({name, module, 0, macs});
  }

 private:
  std::vector<CostRow>& rows_;
};

void add_path(RowBuilder& rb, const std::string& prefix, const model::TigerConfig& cfg,
              std::uint64_t axis_len, std::uint64_t other, std::uint64_t repeats) {
  const auto& s = cfg.separator;
  const std::uint64_t unit = std::uint64_t{1} << s.D;
  const std::uint64_t padded = (axis_len + unit - 1) / unit * unit;
  const std::uint64_t coarse = padded / unit;
  const std::string m = prefix + ".msa.";
  const std::string sep = "separator";
  auto at = [&](std::uint64_t len) { return len * other; };

  rb.layer(sep, m + "in_proj", LayerSpec::pointwise(s.N, s.H), at(padded), repeats);
  for (std::size_t d = 1; d <= s.D; ++d) {
    rb.layer(sep, m + "down." + std::to_string(d), LayerSpec::depthwise(s.H, 5, 2),
             at(padded >> d), repeats);
  }
  rb.layer(sep, m + "mlc.0", LayerSpec::pointwise(s.H, s.H, false), at(coarse), repeats);
  rb.layer(sep, m + "mlc.1", LayerSpec::group_norm(s.H, 1), at(coarse), repeats);
  rb.layer(sep, m + "mlc.2", LayerSpec::depthwise(s.H, 5), at(coarse), repeats);
  rb.layer(sep, m + "mlc.4", LayerSpec::pointwise(s.H, s.H, false), at(coarse), repeats);
  rb.layer(sep, m + "mlc.5", LayerSpec::group_norm(s.H, 1), at(coarse), repeats);
  rb.layer(sep, m + "tau", LayerSpec::depthwise(s.H, 3), at(coarse), repeats);
  rb.layer(sep, m + "rho", LayerSpec::depthwise(s.H, 3), at(coarse), repeats);
  for (std::size_t d = 0; d <= s.D; ++d) {
    rb.layer(sep, m + "phi." + std::to_string(d), LayerSpec::depthwise(s.H, 3), at(padded >> d),
             repeats);
  }
  for (std::size_t d = 0; d < s.D; ++d) {
    const std::string i = std::to_string(d);
    rb.layer(sep, m + "alpha." + i, LayerSpec::depthwise(s.H, 3), at(padded >> (d + 1)), repeats);
    rb.layer(sep, m + "beta." + i, LayerSpec::depthwise(s.H, 3), at(padded >> (d + 1)), repeats);
    rb.layer(sep, m + "gamma." + i, LayerSpec::depthwise(s.H, 3), at(padded >> d), repeats);
  }
  rb.layer(sep, m + "out_proj", LayerSpec::pointwise(s.H, s.N), at(axis_len), repeats);

  const std::string f = prefix + ".f3a.";
  const std::uint64_t qk = s.A * s.E;
  rb.layer(sep, f + "query", LayerSpec::pointwise(s.N, qk), at(axis_len), repeats);
  rb.layer(sep, f + "key", LayerSpec::pointwise(s.N, qk, false), at(axis_len), repeats);
  rb.layer(sep, f + "value", LayerSpec::pointwise(s.N, s.N), at(axis_len), repeats);
  rb.product(sep, f + "attention",
             s.A * axis_len * axis_len * (s.E + s.N / s.A) * other * repeats);
  rb.layer(sep, f + "out", LayerSpec::pointwise(s.N, s.N), at(axis_len), repeats);
  rb.layer(sep, prefix + ".norm", LayerSpec::layer_norm(s.N), at(axis_len), repeats);
}

std::string with_unit(double v) {
  char buf[64];
  if (v >= 1e9) {
    std::snprintf(buf, sizeof buf, "%.3f G", v / 1e9);
  } else if (v >= 1e6) {
    std::snprintf(buf, sizeof buf, "%.3f M", v / 1e6);
  } else if (v >= 1e3) {
    std::snprintf(buf, sizeof buf, "%.3f K", v / 1e3);
  } else {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  }
  return buf;
}

std::vector<double> noise_input(std::size_t length) {
  Rng rng(0x5eed);
  std::vector<double> x(length);
  for (auto& v : x) v = 0.1 * rng.normal();
  return x;
}

template <typename T>
nn::Tensor<T> surrogate_loss(const std::vector<nn::Tensor<T>>& outputs,
                             const std::vector<double>& input) {
  std::vector<std::vector<double>> refs(outputs.size(), input);
  return training::pit_loss(outputs, refs).loss;
}

}  // namespace

std::vector<CostRow> CostReport::modules() const {
  std::vector<CostRow> out;
  for (const char* m : kModules) {
    CostRow agg{m, m, 0, 0};
    for (const auto& r : rows) {
      if (r.module == m) {
        agg.params += r.params;
        agg.macs += r.macs;
      }
    }
    out.push_back(agg);
  }
  return out;
}

std::uint64_t CostReport::module_macs(const std::string& module) const {
  std::uint64_t total = 0;
  for (const auto& r : rows) {
    if (r.module == module) total += r.macs;
  }
  return total;
}

std::string CostReport::to_text(bool per_layer) const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "preset: %s\naudio: %.3f s (%zu frames)\n", preset.c_str(),
                seconds, frames);
  out += buf;
  out += "parameters: " + std::to_string(params) + " (" + with_unit(double(params)) + ")\n";
  out += "macs: " + std::to_string(macs) + " (" + with_unit(double(macs)) + ")\n";
  out += "modules:\n";
  for (const auto& m : modules()) {
    std::snprintf(buf, sizeof buf, "  %-13s params %10llu  macs %14llu\n", m.name.c_str(),
                  static_cast<unsigned long long>(m.params),
                  static_cast<unsigned long long>(m.macs));
    out += buf;
  }
  if (forward) {
    std::snprintf(buf, sizeof buf, "forward: %.3f ms +- %.3f ms over %zu runs\n", forward->mean_ms,
                  forward->stddev_ms, forward->runs);
    out += buf;
  }
  if (forward_backward) {
    std::snprintf(buf, sizeof buf, "forward+backward: %.3f ms +- %.3f ms over %zu runs\n",
                  forward_backward->mean_ms, forward_backward->stddev_ms, forward_backward->runs);
    out += buf;
  }
  if (working_set_bytes) {
    out += "working set: " + with_unit(double(*working_set_bytes)) + "B\n";
  }
  if (per_layer) {
    out += "layers:\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "  %-40s params %9llu  macs %14llu\n", r.name.c_str(),
                    static_cast<unsigned long long>(r.params),
                    static_cast<unsigned long long>(r.macs));
      out += buf;
    }
  }
  return out;
}

std::string CostReport::to_csv() const {
  std::string out = "name,module,params,macs\n";
  for (const auto& r : rows) {
    out += r.name + "," + r.module + "," + std::to_string(r.params) + "," +
           std::to_string(r.macs) + "\n";
  }
  out += "total,all," + std::to_string(params) + "," + std::to_string(macs) + "\n";
  return out;
}

template <typename T>
std::uint64_t count_params(const model::TigerModel<T>& model) {
  return model.parameters().scalar_count();
}

CostReport count_macs(const model::TigerConfig& config, double seconds) {
  config.validate();
  if (!(seconds > 0)) throw InvalidArgument("count_macs: seconds must be positive");
  CostReport rep;
  rep.preset = config.preset;
  rep.seconds = seconds;
  auto length = static_cast<std::size_t>(std::llround(seconds * config.sample_rate));
  length = std::max(length, config.stft.window_size);
  const std::uint64_t t = config.stft.frames(length);
  rep.frames = t;
  const std::uint64_t k = config.scheme.bands();
  const auto& s = config.separator;
  RowBuilder rb(rep.rows);

  for (std::size_t b = 0; b < k; ++b) {
    const std::string p = "band_split." + std::to_string(b);
    const std::size_t in = 2 * config.scheme.widths[b];
    rb.layer("band_split", p + ".norm", LayerSpec::group_norm(in, 1), t);
    rb.layer("band_split", p + ".conv", LayerSpec::conv(in, s.N, 1), t);
  }
  const auto axes = s.path_axes();
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const bool freq = axes[i] == separator::Axis::Frequency;
    add_path(rb, "separator.path" + std::to_string(i), config, freq ? k : t, freq ? t : k, s.B);
  }
  for (std::size_t b = 0; b < k; ++b) {
    const std::string p = "band_restore." + std::to_string(b);
    rb.layer("band_restore", p + ".prelu", LayerSpec::prelu(s.N), t);
    rb.layer("band_restore", p + ".conv",
             LayerSpec::conv(s.N, 2 * config.scheme.widths[b] * config.sources, 1), t);
  }
  for (const auto& r : rep.rows) {
    rep.params += r.params;
    rep.macs += r.macs;
  }
  return rep;
}

template <typename T>
std::uint64_t measure_macs(const model::TigerModel<T>& model, double seconds) {
  const auto length =
      static_cast<std::size_t>(std::llround(seconds * model.config().sample_rate));
  const auto input = noise_input(length);
  nn::MacCounter counter;
  model.separate(input);
  return counter.count();
}

template <typename T>
Timing benchmark(const model::TigerModel<T>& model, std::size_t runs, BenchMode mode,
                 std::size_t warmup, double seconds) {
  if (runs == 0) throw InvalidArgument("benchmark: runs must be positive");
  const auto length =
      static_cast<std::size_t>(std::llround(seconds * model.config().sample_rate));
  const auto input = noise_input(length);
  auto& params = const_cast<model::TigerModel<T>&>(model).parameters();
  auto once = [&] {
    if (mode == BenchMode::Forward) {
      model.separate(input);
      return;
    }
    nn::GradientTape<T> tape;
    const auto out = model.separate(input);
    tape.backward(surrogate_loss(out, input));
  };
  for (std::size_t i = 0; i < warmup; ++i) once();
  std::vector<double> ms;
  ms.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    once();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  if (mode == BenchMode::ForwardBackward) params.zero_grad();
  Timing t;
  t.runs = runs;
  t.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(runs);
  double var = 0.0;
  for (double v : ms) var += (v - t.mean_ms) * (v - t.mean_ms);
  t.stddev_ms = runs > 1 ? std::sqrt(var / static_cast<double>(runs - 1)) : 0.0;
  return t;
}

template <typename T>
std::size_t working_set_bytes(const model::TigerModel<T>& model, double seconds) {
  const auto length =
      static_cast<std::size_t>(std::llround(seconds * model.config().sample_rate));
  const auto input = noise_input(length);
  auto& params = const_cast<model::TigerModel<T>&>(model).parameters();
  std::size_t taped = 0;
  {
    nn::GradientTape<T> tape;
    const auto out = model.separate(input);
    tape.backward(surrogate_loss(out, input));
    taped = tape.retained_bytes();
  }
  params.zero_grad();
  return taped + 2 * params.scalar_count() * sizeof(T);
}

template std::uint64_t count_params(const model::TigerModel<float>&);
template std::uint64_t count_params(const model::TigerModel<double>&);
template std::uint64_t measure_macs(const model::TigerModel<float>&, double);
template std::uint64_t measure_macs(const model::TigerModel<double>&, double);
template Timing benchmark(const model::TigerModel<float>&, std::size_t, BenchMode, std::size_t,
                          double);
template Timing benchmark(const model::TigerModel<double>&, std::size_t, BenchMode, std::size_t,
                          double);
template std::size_t working_set_bytes(const model::TigerModel<float>&, double);
template std::size_t working_set_bytes(const model::TigerModel<double>&, double);

}  // namespace tiger::profiler
