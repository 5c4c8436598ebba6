#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "tiger/common/random.hpp"

namespace tiger::test {

inline std::vector<double> random_signal(std::uint64_t seed, std::size_t n, double stddev = 1.0) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = stddev * rng.normal();
  return x;
}

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

/// Fresh per-test scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tiger_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tiger::test
