#include "tiger/bands/band_scheme.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tiger/common/error.hpp"

namespace tiger::bands {

std::size_t BandScheme::bins() const {
  return std::accumulate(widths.begin(), widths.end(), std::size_t{0});
}

std::vector<std::size_t> BandScheme::offsets() const {
  std::vector<std::size_t> out(widths.size() + 1, 0);
  for (std::size_t k = 0; k < widths.size(); ++k) out[k + 1] = out[k] + widths[k];
  return out;
}

std::size_t BandScheme::band_of(std::size_t bin) const {
  const auto off = offsets();
  if (bin >= off.back()) throw InvalidArgument("band scheme: bin out of range");
  return static_cast<std::size_t>(std::upper_bound(off.begin(), off.end(), bin) - off.begin()) - 1;
}

void BandScheme::validate(std::size_t expected_bins) const {
  if (widths.empty()) throw InvalidArgument("band scheme '" + name + "': no bands");
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidArgument("band scheme '" + name + "': zero-width band");
  }
  if (bins() != expected_bins) {
    throw InvalidArgument("band scheme '" + name + "': widths sum to " + std::to_string(bins()) +
                          " bins, spectrogram has " + std::to_string(expected_bins));
  }
}

std::vector<std::string> scheme_names() {
  return {"NonSplit", "NormalSplit", "LowFreqNarrowSplit", "EvenSplit", "DnR44k"};
}

namespace {

void repeat(std::vector<std::size_t>& w, std::size_t count, std::size_t width) {
  w.insert(w.end(), count, width);
}

void require_bins(std::string_view name, std::size_t bins, std::size_t expected) {
  if (bins != expected) {
    throw InvalidArgument("band scheme '" + std::string(name) + "' is defined for " +
                          std::to_string(expected) + " bins, got " + std::to_string(bins));
  }
}

// (range end in Hz, band width in Hz) segments of the cinematic scheme.
struct HzSegment {
  double end_hz;
  double width_hz;
};
constexpr HzSegment kDnrSegments[] = {
    {1000, 50}, {2000, 100}, {4000, 250}, {8000, 500}, {16000, 1000}, {20000, 2000},
};

}  // namespace

BandScheme make_scheme(std::string_view name, std::size_t bins, double bin_hz) {
  BandScheme s{std::string(name), {}};
  if (name == "NonSplit") {
    require_bins(name, bins, 321);
    repeat(s.widths, 321, 1);
  } else if (name == "NormalSplit") {
    require_bins(name, bins, 321);
    repeat(s.widths, 20, 2);
    repeat(s.widths, 10, 4);
    repeat(s.widths, 8, 10);
    repeat(s.widths, 8, 20);
    repeat(s.widths, 1, 1);
  } else if (name == "LowFreqNarrowSplit") {
    require_bins(name, bins, 321);
    repeat(s.widths, 40, 1);
    repeat(s.widths, 10, 4);
    repeat(s.widths, 8, 10);
    repeat(s.widths, 8, 20);
    repeat(s.widths, 1, 1);
  } else if (name == "EvenSplit") {
    require_bins(name, bins, 321);
    repeat(s.widths, 66, 4);
    repeat(s.widths, 1, 57);
  } else if (name == "DnR44k") {
    require_bins(name, bins, 1025);
    if (!(bin_hz > 0)) throw InvalidArgument("band scheme 'DnR44k': bin_hz must be positive");
    std::vector<std::size_t> edges{0};
    double start = 0;
    for (const auto& seg : kDnrSegments) {
      for (double hz = start + seg.width_hz; hz <= seg.end_hz + 1e-9; hz += seg.width_hz) {
        edges.push_back(static_cast<std::size_t>(std::lround(hz / bin_hz)));
      }
      start = seg.end_hz;
    }
    edges.push_back(bins);
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (edges[i] <= edges[i - 1]) {
        throw InvalidArgument("band scheme 'DnR44k': bin resolution too coarse for the bands");
      }
      s.widths.push_back(edges[i] - edges[i - 1]);
    }
  } else {
    throw InvalidArgument("unknown band scheme '" + std::string(name) + "'");
  }
  s.validate(bins);
  return s;
}

}  // namespace tiger::bands
