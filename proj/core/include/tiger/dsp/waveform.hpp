#pragma once

#include <cstddef>
#include <vector>

namespace tiger::dsp {

/// Mono sampled audio. Samples are dimensionless amplitudes.
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  std::size_t size() const { return samples.size(); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Throws InvalidInput if any sample is NaN/Inf or the rate is not positive.
void validate(const Waveform& wave);

}  // namespace tiger::dsp
