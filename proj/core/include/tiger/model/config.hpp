#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tiger/bands/band_scheme.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/separator/separator.hpp"

namespace tiger::model {

/// Architecture and front-end settings. Serialised as YAML:
///
///   preset: small
///   sample_rate: 16000
///   sources: 2
///   stft: {window_size: 640, hop: 160}
///   scheme: {name: LowFreqNarrowSplit, widths: [1, 1, ...]}
///   separator: {N: 128, H: 256, D: 4, B: 4, A: 4, E: 4, path_order: F-T}
struct TigerConfig {
  std::string preset = "small";
  double sample_rate = 16000.0;
  std::size_t sources = 2;
  dsp::StftConfig stft;
  bands::BandScheme scheme;
  separator::SeparatorConfig separator;

  /// small, large, tiny or dnr.
  static TigerConfig from_preset(std::string_view name);

  double bin_hz() const { return sample_rate / static_cast<double>(stft.window_size); }
  void validate() const;

  std::string to_yaml() const;
  /// Missing fields fall back to the named preset (default small). A scheme
  /// given by name only is expanded with make_scheme.
  static TigerConfig from_yaml(const std::string& text);
  static TigerConfig load(const std::filesystem::path& path);

  /// Applies a dotted override such as "separator.B=8". The key must name an
  /// existing field; changing the STFT or scheme name regenerates the band
  /// widths of a tabulated scheme.
  void set(const std::string& key, const std::string& value);

  friend bool operator==(const TigerConfig&, const TigerConfig&) = default;
};

std::vector<std::string> preset_names();

}  // namespace tiger::model
