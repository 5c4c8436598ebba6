#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace tiger::dsp::detail {

/// Real-to-complex FFT of a fixed size backed by a cached FFTW plan.
/// Transforms are unnormalised in both directions.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }

  /// `in` has n samples, `out` receives n/2 + 1 bins.
  void forward(const double* in, std::complex<double>* out) const;
  /// `in` has n/2 + 1 bins (imaginary parts of DC/Nyquist ignored),
  /// `out` receives n samples scaled by n.
  void inverse(const std::complex<double>* in, double* out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace tiger::dsp::detail
