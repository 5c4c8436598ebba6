#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tiger::bands {

/// Partition of the F one-sided STFT bins into K contiguous sub-bands.
struct BandScheme {
  std::string name;
  std::vector<std::size_t> widths;

  std::size_t bands() const { return widths.size(); }
  std::size_t bins() const;
  /// First bin of each band, plus a final entry equal to bins().
  std::vector<std::size_t> offsets() const;
  /// Band index that contains `bin`.
  std::size_t band_of(std::size_t bin) const;

  /// Throws InvalidArgument unless every width is positive and they sum to F.
  void validate(std::size_t expected_bins) const;

  friend bool operator==(const BandScheme&, const BandScheme&) = default;
};

/// Names accepted by make_scheme.
std::vector<std::string> scheme_names();

/// Builds one of the tabulated schemes: NonSplit, NormalSplit,
/// LowFreqNarrowSplit and EvenSplit need F = 321 (640-sample window at
/// 16 kHz); DnR44k needs F = 1025 (2048-sample window at 44.1 kHz). DnR44k
/// maps its Hz boundaries to the nearest bin boundary and lets the last band
/// absorb the remainder.
BandScheme make_scheme(std::string_view name, std::size_t bins, double bin_hz);

}  // namespace tiger::bands
