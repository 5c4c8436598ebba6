#include "tiger/dsp/stft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dsp/fft.hpp"
#include "tiger/common/error.hpp"

namespace tiger::dsp {
namespace {

constexpr double kWindowSumFloor = 1e-12;

// Maps a position of the padded signal onto the original signal with
// reflection (no edge repeat), folding as many times as needed.
std::size_t reflect_index(std::ptrdiff_t q, std::size_t length) {
  if (length == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (length - 1));
  q %= period;
  if (q < 0) q += period;
  if (q >= static_cast<std::ptrdiff_t>(length)) q = period - q;
  return static_cast<std::size_t>(q);
}

std::vector<double> window_square_sum(const std::vector<double>& window,
                                      std::size_t hop, std::size_t frames) {
  std::vector<double> sum(window.size() + hop * (frames - 1), 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < window.size(); ++n) {
      sum[t * hop + n] += window[n] * window[n];
    }
  }
  return sum;
}

}  // namespace

void validate(const Waveform& wave) {
  if (!(wave.sample_rate > 0.0) || !std::isfinite(wave.sample_rate)) {
    throw InvalidInput("waveform sample rate must be positive");
  }
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    if (!std::isfinite(wave.samples[i])) {
      throw InvalidInput("waveform sample " + std::to_string(i) + " is not finite");
    }
  }
}

std::vector<double> hann_window(std::size_t n) {
  if (n == 0) throw InvalidArgument("hann_window: length must be at least 1");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                 static_cast<double>(n)));
  }
  return w;
}

std::size_t StftConfig::max_length(std::size_t frames) const {
  if (frames == 0) return 0;
  return hop * (frames - 1) + window_size / 2;
}

void StftConfig::validate() const {
  if (hop == 0 || window_size == 0 || hop > window_size) {
    throw InvalidArgument("stft: require 1 <= hop <= window_size");
  }
  if (window_size % (4 * hop) != 0) {
    throw InvalidArgument("stft: window_size " + std::to_string(window_size) +
                          " must be a multiple of 4*hop (" + std::to_string(4 * hop) +
                          ") for the periodic Hann overlap-add condition");
  }
}

ComplexSpectrogram stft(std::span<const double> samples, double sample_rate,
                        const StftConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw InvalidArgument("stft: empty waveform");
  for (double s : samples) {
    if (!std::isfinite(s)) throw InvalidInput("stft: non-finite sample");
  }
  const std::size_t win = cfg.window_size;
  const std::size_t pad = win / 2;
  const std::size_t length = samples.size();
  const std::size_t frames = cfg.frames(length);
  const std::size_t bins = cfg.bins();

  ComplexSpectrogram spec(bins, frames, sample_rate / static_cast<double>(win));
  const auto window = hann_window(win);
  const detail::RealFft fft(win);
  std::vector<double> frame(win);
  std::vector<std::complex<double>> column(bins);

  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t n = 0; n < win; ++n) {
      frame[n] = window[n] * samples[reflect_index(start + static_cast<std::ptrdiff_t>(n), length)];
    }
    fft.forward(frame.data(), column.data());
    for (std::size_t f = 0; f < bins; ++f) spec.at(f, t) = column[f];
  }
  return spec;
}

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  return stft(wave.samples, wave.sample_rate, cfg);
}

std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg,
                          std::size_t out_length) {
  cfg.validate();
  if (spec.bins != cfg.bins() || spec.frames == 0 ||
      spec.data.size() != spec.bins * spec.frames) {
    throw InvalidArgument("istft: spectrogram shape " + std::to_string(spec.bins) + "x" +
                          std::to_string(spec.frames) + " inconsistent with window " +
                          std::to_string(cfg.window_size));
  }
  if (out_length > cfg.max_length(spec.frames)) {
    throw InvalidArgument("istft: out_length " + std::to_string(out_length) +
                          " exceeds what " + std::to_string(spec.frames) +
                          " frames can synthesize");
  }
  const std::size_t win = cfg.window_size;
  const std::size_t pad = win / 2;
  const auto window = hann_window(win);
  const auto norm = window_square_sum(window, cfg.hop, spec.frames);
  const detail::RealFft fft(win);

  std::vector<double> buffer(norm.size(), 0.0);
  std::vector<std::complex<double>> column(spec.bins);
  std::vector<double> frame(win);
  const double scale = 1.0 / static_cast<double>(win);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t f = 0; f < spec.bins; ++f) column[f] = spec.at(f, t);
    fft.inverse(column.data(), frame.data());
    for (std::size_t n = 0; n < win; ++n) {
      buffer[t * cfg.hop + n] += window[n] * frame[n] * scale;
    }
  }

  std::vector<double> out(out_length);
  for (std::size_t i = 0; i < out_length; ++i) {
    const double w = norm[pad + i];
    if (w < kWindowSumFloor) {
      throw NumericalError("istft: window sum vanishes at output sample " + std::to_string(i));
    }
    out[i] = buffer[pad + i] / w;
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& spec, const StftConfig& cfg, std::size_t out_length,
               double sample_rate) {
  return Waveform{istft(spec, cfg, out_length), sample_rate};
}

void istft_adjoint(std::span<const double> grad_wave, const StftConfig& cfg,
                   std::size_t frames, std::span<double> grad_re, std::span<double> grad_im) {
  const std::size_t win = cfg.window_size;
  const std::size_t bins = cfg.bins();
  const std::size_t pad = win / 2;
  if (grad_re.size() != bins * frames || grad_im.size() != bins * frames) {
    throw InvalidArgument("istft_adjoint: gradient planes have the wrong size");
  }
  if (grad_wave.size() > cfg.max_length(frames)) {
    throw InvalidArgument("istft_adjoint: gradient longer than synthesizable length");
  }
  const auto window = hann_window(win);
  const auto norm = window_square_sum(window, cfg.hop, frames);
  const detail::RealFft fft(win);

  std::vector<double> padded(norm.size(), 0.0);
  for (std::size_t i = 0; i < grad_wave.size(); ++i) {
    const double w = norm[pad + i];
    if (w < kWindowSumFloor) throw NumericalError("istft_adjoint: window sum vanishes");
    padded[pad + i] = grad_wave[i] / w;
  }

  std::vector<double> frame(win);
  std::vector<std::complex<double>> column(bins);
  const double scale = 1.0 / static_cast<double>(win);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < win; ++n) frame[n] = window[n] * padded[t * cfg.hop + n] * scale;
    fft.forward(frame.data(), column.data());
    for (std::size_t f = 0; f < bins; ++f) {
      // Interior bins appear twice in the Hermitian inverse.
      const bool edge = (f == 0) || (win % 2 == 0 && f == bins - 1);
      const double c = edge ? 1.0 : 2.0;
      grad_re[f * frames + t] = c * column[f].real();
      grad_im[f * frames + t] = c * column[f].imag();
    }
  }
}

std::vector<double> stft_adjoint(std::span<const double> grad_re, std::span<const double> grad_im,
                                 const StftConfig& cfg, std::size_t length) {
  const std::size_t win = cfg.window_size;
  const std::size_t bins = cfg.bins();
  const std::size_t pad = win / 2;
  const std::size_t frames = cfg.frames(length);
  if (grad_re.size() != bins * frames || grad_im.size() != bins * frames) {
    throw InvalidArgument("stft_adjoint: gradient planes have the wrong size");
  }
  const auto window = hann_window(win);
  const detail::RealFft fft(win);

  std::vector<double> grad(length, 0.0);
  std::vector<std::complex<double>> column(bins);
  std::vector<double> frame(win);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f) {
      const bool edge = (f == 0) || (win % 2 == 0 && f == bins - 1);
      const double c = edge ? 1.0 : 0.5;
      column[f] = {c * grad_re[f * frames + t], c * grad_im[f * frames + t]};
    }
    // Real part of sum_k G_k e^{+i theta} over the one-sided bins.
    fft.inverse(column.data(), frame.data());
    const auto start = static_cast<std::ptrdiff_t>(t * cfg.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t n = 0; n < win; ++n) {
      grad[reflect_index(start + static_cast<std::ptrdiff_t>(n), length)] += window[n] * frame[n];
    }
  }
  return grad;
}

}  // namespace tiger::dsp
