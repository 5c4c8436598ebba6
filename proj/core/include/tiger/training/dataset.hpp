#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tiger/dsp/waveform.hpp"

namespace tiger::training {

/// One mixture with its labelled sources. References share the mixture's
/// length and sample rate.
struct Example {
  std::string id;
  dsp::Waveform mixture;
  std::vector<dsp::Waveform> references;
  std::optional<dsp::Waveform> noise;

  void validate() const;
};

/// A manifest is a YAML sequence with one flow mapping per example:
///
///   - {id: ex0000, mix: ex0000/mix.wav, refs: [ex0000/s1.wav, ex0000/s2.wav], noise: ex0000/noise.wav}
///
/// Relative paths are resolved against the manifest's directory; `noise`
/// is optional.
struct ManifestEntry {
  std::string id;
  std::filesystem::path mix;
  std::vector<std::filesystem::path> refs;
  std::optional<std::filesystem::path> noise;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
/// Paths are written as given (normally relative to the manifest).
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Reads every WAV listed in the manifest.
std::vector<Example> load_dataset(const std::filesystem::path& manifest);

}  // namespace tiger::training
