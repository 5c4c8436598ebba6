#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tiger/model/tiger_model.hpp"

namespace tiger::profiler {

/// One layer (or attention product) of the network. Shared separator
/// layers appear once, with MACs summed over all B executions.
struct CostRow {
  std::string name;    // e.g. "separator.path0.msa.in_proj"
  std::string module;  // band_split, separator or band_restore
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct Timing {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  std::size_t runs = 0;
};

struct CostReport {
  std::string preset;
  double seconds = 1.0;
  std::size_t frames = 0;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::vector<CostRow> rows;
  std::optional<Timing> forward;
  std::optional<Timing> forward_backward;
  std::optional<std::size_t> working_set_bytes;

  /// Rows aggregated per module, in pipeline order.
  std::vector<CostRow> modules() const;
  std::uint64_t module_macs(const std::string& module) const;

  std::string to_text(bool per_layer = false) const;
  /// name,module,params,macs (one row per layer, then a total row).
  std::string to_csv() const;
};

/// Distinct scalar parameters (shared blocks counted once).
template <typename T>
std::uint64_t count_params(const model::TigerModel<T>& model);

/// Analytic parameter and MAC accounting for `seconds` of audio at the
/// config's sample rate. MACs cover convolutions and the two attention
/// products; norms, activations and the STFT are excluded.
CostReport count_macs(const model::TigerConfig& config, double seconds = 1.0);

/// MACs actually executed by one forward pass on `seconds` of audio.
template <typename T>
std::uint64_t measure_macs(const model::TigerModel<T>& model, double seconds = 1.0);

enum class BenchMode { Forward, ForwardBackward };

/// Wall-clock time per run on `seconds` of noise input, after `warmup`
/// untimed runs. Backward mode includes a loss and the full reverse pass.
template <typename T>
Timing benchmark(const model::TigerModel<T>& model, std::size_t runs, BenchMode mode,
                 std::size_t warmup = 10, double seconds = 1.0);

/// Parameters, gradients and intermediate values held during one training
/// step on `seconds` of audio.
template <typename T>
std::size_t working_set_bytes(const model::TigerModel<T>& model, double seconds = 1.0);

}  // namespace tiger::profiler
