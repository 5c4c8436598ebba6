#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tiger/common/random.hpp"
#include "tiger/dsp/waveform.hpp"
#include "tiger/training/dataset.hpp"

namespace tiger::mixgen {

struct MixSpec {
  double speaker_sdr_min = -5.0;  // dB, source 0 relative to each other source
  double speaker_sdr_max = 5.0;
  double noise_sdr_min = -10.0;  // dB, sum of sources relative to noise
  double noise_sdr_max = 10.0;
  std::optional<double> overlap_ratio;  // drawn uniformly on [0, 1] when unset
  double duration = 3.0;                // seconds

  void validate() const;
};

struct MixMetadata {
  std::vector<double> gains;           // per source, before any joint rescale
  double noise_gain = 0.0;
  std::vector<std::size_t> offsets;    // start sample of each source
  double overlap_ratio = 0.0;
  std::vector<double> speaker_sdr_target;    // per source i >= 1
  std::vector<double> speaker_sdr_realized;
  double noise_sdr_target = 0.0;
  double noise_sdr_realized = 0.0;
  double rescale = 1.0;                // joint factor applied to avoid clipping
};

/// mixture[n] = (sum_i references[i][n]) + noise[n], summed in source order.
struct MixtureExample {
  dsp::Waveform mixture;
  std::vector<dsp::Waveform> references;
  dsp::Waveform noise;
  MixMetadata meta;
};

/// Gain g with 10 log10(|signal|^2 / |g interferer|^2) = target_db.
double gain_for_sdr(std::span<const double> signal, std::span<const double> interferer,
                    double target_db);

/// Energy ratio 10 log10(|a|^2 / |b|^2).
double energy_ratio_db(std::span<const double> a, std::span<const double> b);

/// Places source 0 at a random offset and every other source so that a
/// fraction `overlap_ratio` of the shorter of the pair overlaps source 0.
/// Each source i >= 1 is scaled to a drawn SDR against source 0, the noise
/// (cropped to the mixture length at a random start) to a drawn SDR against
/// the sum of sources. If the mixture peak exceeds 1, all signals are scaled
/// jointly to a peak of 0.9.
MixtureExample make_mixture(const std::vector<dsp::Waveform>& sources, const dsp::Waveform& noise,
                            const MixSpec& spec, Rng& rng);

/// Deterministic stand-ins for speech: each source is a sum of 3-8
/// amplitude-modulated tone bursts whose frequencies lie in a band disjoint
/// from every other source's. Peaks are at most 0.9.
std::vector<dsp::Waveform> synth_sources(Rng& rng, std::size_t count, double duration,
                                         double sample_rate);

/// White Gaussian noise with standard deviation 0.1.
dsp::Waveform synth_noise(Rng& rng, double duration, double sample_rate);

struct DatasetSpec {
  std::size_t count = 10;
  std::size_t speakers = 2;
  double sample_rate = 16000.0;
  MixSpec mix;
  std::uint64_t seed = 0;
};

/// Builds examples from synthetic sources. Example i uses the stream
/// mix_seed(seed, i), so results do not depend on generation order. Source
/// lengths are chosen so the requested overlap fills the mixture.
MixtureExample synth_example(const DatasetSpec& spec, std::size_t index);

/// Converts a mixture example into a training example.
training::Example to_example(const MixtureExample& m, const std::string& id);

/// Writes <dir>/exNNNN/{mix,s1,s2[,s3...],noise}.wav (float32) and
/// <dir>/manifest.yaml. Returns the manifest entries.
std::vector<training::ManifestEntry> write_dataset(const std::filesystem::path& dir,
                                                   const DatasetSpec& spec);

}  // namespace tiger::mixgen
