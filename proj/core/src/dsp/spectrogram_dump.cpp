#include "tiger/dsp/spectrogram_dump.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "tiger/common/error.hpp"

namespace tiger::dsp {

void write_magnitude_csv(const std::filesystem::path& path, const ComplexSpectrogram& spec) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[32];
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t f = 0; f < spec.bins; ++f) {
      // %.9g is locale-independent for the "C" locale the tool runs under.
      std::snprintf(buf, sizeof buf, "%.9g", std::abs(spec.at(f, t)));
      if (f) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_log_magnitude_pgm(const std::filesystem::path& path, const ComplexSpectrogram& spec,
                             double dynamic_range_db) {
  if (!(dynamic_range_db > 0.0)) throw InvalidArgument("pgm: dynamic range must be positive");
  std::vector<double> db(spec.data.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < db.size(); ++i) {
    db[i] = 20.0 * std::log10(std::abs(spec.data[i]) + 1e-10);
    peak = std::max(peak, db[i]);
  }
  const double floor_db = peak - dynamic_range_db;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << spec.frames << ' ' << spec.bins << "\n255\n";
  std::vector<unsigned char> row(spec.frames);
  for (std::size_t r = 0; r < spec.bins; ++r) {
    const std::size_t f = spec.bins - 1 - r;
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const double level = (db[f * spec.frames + t] - floor_db) / dynamic_range_db;
      row[t] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(level, 0.0, 1.0)));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace tiger::dsp
