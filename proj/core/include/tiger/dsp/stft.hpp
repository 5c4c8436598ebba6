#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "tiger/dsp/waveform.hpp"

namespace tiger::dsp {

/// Periodic Hann window: w[i] = 0.5 (1 - cos(2 pi i / n)).
std::vector<double> hann_window(std::size_t n);

struct StftConfig {
  std::size_t window_size = 640;
  std::size_t hop = 160;

  /// Number of one-sided bins, floor(window/2) + 1.
  std::size_t bins() const { return window_size / 2 + 1; }
  /// Frames produced for a signal of `length` samples under centred framing.
  std::size_t frames(std::size_t length) const { return length / hop + 1; }
  /// Longest signal that `frames` frames can resynthesize.
  std::size_t max_length(std::size_t frames) const;

  /// Periodic Hann needs window_size to be a multiple of 4 * hop.
  void validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// One-sided complex spectrogram, row-major F x T (bin-major).
struct ComplexSpectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  double bin_hz = 0.0;
  std::vector<std::complex<double>> data;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t f, std::size_t t, double hz)
      : bins(f), frames(t), bin_hz(hz), data(f * t) {}

  std::complex<double>& at(std::size_t f, std::size_t t) { return data[f * frames + t]; }
  const std::complex<double>& at(std::size_t f, std::size_t t) const {
    return data[f * frames + t];
  }
};

/// Centred STFT: the signal is reflect-padded by window/2 on both sides,
/// giving T = floor(L / hop) + 1 frames.
ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg);
ComplexSpectrogram stft(std::span<const double> samples, double sample_rate,
                        const StftConfig& cfg);

/// Weighted overlap-add resynthesis normalised by the per-sample sum of
/// squared windows. The output is trimmed to `out_length` samples.
std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg,
                          std::size_t out_length);
Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg,
               std::size_t out_length, double sample_rate);

// Adjoint operators, used by differentiable losses and decoders. Spectral
// quantities are split into real and imaginary planes, each F x T row-major.

/// Adjoint of istft: maps a gradient on the output samples to gradients on
/// the real and imaginary planes of the input spectrogram.
void istft_adjoint(std::span<const double> grad_wave, const StftConfig& cfg,
                   std::size_t frames, std::span<double> grad_re,
                   std::span<double> grad_im);

/// Adjoint of stft: maps gradients on the spectrogram planes back to the
/// time-domain samples of a signal of `length` samples.
std::vector<double> stft_adjoint(std::span<const double> grad_re,
                                 std::span<const double> grad_im,
                                 const StftConfig& cfg, std::size_t length);

}  // namespace tiger::dsp
