#include "dsp/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace tiger::dsp::detail {
namespace {

struct Plans {
  fftw_plan forward;
  fftw_plan inverse;
};

// FFTW's planner is not thread safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

Plans plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  const int size = static_cast<int>(n);
  std::vector<double> real(n);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  auto* spec_ptr = reinterpret_cast<fftw_complex*>(spec.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  Plans plans{fftw_plan_dft_r2c_1d(size, real.data(), spec_ptr, flags),
              fftw_plan_dft_c2r_1d(size, spec_ptr, real.data(), flags)};
  cache.emplace(n, plans);
  return plans;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  const Plans plans = plans_for(n);
  forward_plan_ = plans.forward;
  inverse_plan_ = plans.inverse;
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const std::complex<double>* in, double* out) const {
  // c2r overwrites its input.
  thread_local std::vector<std::complex<double>> scratch;
  scratch.assign(in, in + n_ / 2 + 1);
  scratch.front().imag(0.0);
  if (n_ % 2 == 0) scratch.back().imag(0.0);
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

}  // namespace tiger::dsp::detail
