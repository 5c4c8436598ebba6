#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <fstream>
#include <numbers>

#include "helpers.hpp"
#include "tiger/common/error.hpp"
#include "tiger/dsp/spectrogram_dump.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/dsp/wav.hpp"

using namespace tiger;
using namespace tiger::dsp;

namespace {

// Brute-force framer and DFT: reflect-pad by window/2, window each frame
// and evaluate the one-sided DFT directly.
std::vector<std::complex<double>> dft_frame(const std::vector<double>& x, std::size_t window,
                                            std::size_t hop, std::size_t frame) {
  const auto w = hann_window(window);
  const long half = static_cast<long>(window / 2);
  const long n = static_cast<long>(x.size());
  std::vector<std::complex<double>> out(window / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      long idx = static_cast<long>(frame * hop + i) - half;
      if (idx < 0) idx = -idx;
      if (idx >= n) idx = 2 * (n - 1) - idx;
      const double ang = -2.0 * std::numbers::pi * double(k * i) / double(window);
      acc += x[static_cast<std::size_t>(idx)] * w[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Frames are centred on 0, hop, 2 hop, ... up to and including L.
std::size_t brute_force_frame_count(std::size_t length, std::size_t hop) {
  std::size_t count = 0;
  for (std::size_t c = 0; c <= length; c += hop) ++count;
  return count;
}

}  // namespace

TEST(HannWindow, ClosedForm) {
  const auto w4 = hann_window(4);
  ASSERT_EQ(w4.size(), 4u);
  EXPECT_NEAR(w4[0], 0.0, 1e-15);
  EXPECT_NEAR(w4[1], 0.5, 1e-15);
  EXPECT_NEAR(w4[2], 1.0, 1e-15);
  EXPECT_NEAR(w4[3], 0.5, 1e-15);
  const auto w1 = hann_window(1);
  ASSERT_EQ(w1.size(), 1u);
  EXPECT_EQ(w1[0], 0.0);
}

TEST(HannWindow, SquaredOverlapIsConstantInInterior) {
  const auto w = hann_window(640);
  std::vector<double> acc(640 * 8, 0.0);
  for (std::size_t start = 0; start + 640 <= acc.size(); start += 160) {
    for (std::size_t i = 0; i < 640; ++i) acc[start + i] += w[i] * w[i];
  }
  for (std::size_t n = 640; n < acc.size() - 640; ++n) EXPECT_NEAR(acc[n], 1.5, 1e-12);
}

TEST(Stft, ShapeForOneSecond) {
  const auto x = test::random_signal(1, 16000);
  const auto spec = stft(x, 16000.0, {});
  EXPECT_EQ(spec.bins, 321u);
  EXPECT_EQ(spec.frames, 101u);
  EXPECT_EQ(spec.frames, brute_force_frame_count(16000, 160));
  EXPECT_DOUBLE_EQ(spec.bin_hz, 25.0);
}

TEST(Stft, MatchesBruteForceDft) {
  const auto x = test::random_signal(2, 1000);
  const StftConfig cfg{64, 16};
  const auto spec = stft(x, 8000.0, cfg);
  ASSERT_EQ(spec.frames, brute_force_frame_count(1000, 16));
  for (std::size_t t : {0u, 1u, 7u, 30u, static_cast<unsigned>(spec.frames - 1)}) {
    const auto ref = dft_frame(x, 64, 16, t);
    for (std::size_t k = 0; k < spec.bins; ++k) {
      EXPECT_NEAR(spec.at(k, t).real(), ref[k].real(), 1e-10) << "bin " << k << " frame " << t;
      EXPECT_NEAR(spec.at(k, t).imag(), ref[k].imag(), 1e-10) << "bin " << k << " frame " << t;
    }
  }
}

TEST(Stft, SinusoidPeaksAtExpectedBin) {
  std::vector<double> x(16000);
  for (std::size_t n = 0; n < x.size(); ++n) {
    x[n] = std::sin(2.0 * std::numbers::pi * 400.0 * double(n) / 16000.0);
  }
  const auto spec = stft(x, 16000.0, {});
  for (std::size_t t = 2; t + 2 < spec.frames; ++t) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < spec.bins; ++k) {
      if (std::abs(spec.at(k, t)) > std::abs(spec.at(arg, t))) arg = k;
    }
    EXPECT_EQ(arg, 16u) << "frame " << t;
  }
}

TEST(Stft, ZeroInZeroOut) {
  const std::vector<double> x(4000, 0.0);
  const auto spec = stft(x, 16000.0, {});
  for (const auto& c : spec.data) EXPECT_EQ(c, std::complex<double>(0.0));
  const auto y = istft(spec, {}, 4000);
  ASSERT_EQ(y.size(), 4000u);
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Stft, RoundTripAndLengthContract) {
  const auto x = test::random_signal(3, 48000);
  const auto y = istft(stft(x, 16000.0, {}), {}, x.size());
  ASSERT_EQ(y.size(), x.size());
  double num = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) num += (y[n] - x[n]) * (y[n] - x[n]);
  EXPECT_LT(std::sqrt(num / test::energy(x)), 1e-6);
}

TEST(Stft, RejectsBadConfig) {
  EXPECT_THROW((StftConfig{640, 200}.validate()), InvalidArgument);
  EXPECT_THROW((StftConfig{0, 0}.validate()), InvalidArgument);
}

// <istft(S), g> == <S, istft_adjoint(g)> and likewise for stft.
TEST(StftAdjoint, DotProductIdentities) {
  const StftConfig cfg{64, 16};
  const std::size_t length = 500;
  const std::size_t frames = cfg.frames(length);
  const std::size_t bins = cfg.bins();
  const auto re = test::random_signal(4, bins * frames);
  const auto im = test::random_signal(5, bins * frames);
  ComplexSpectrogram spec(bins, frames, 125.0);
  for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] = {re[i], im[i]};
  const auto g = test::random_signal(6, length);

  const auto y = istft(spec, cfg, length);
  std::vector<double> gre(bins * frames), gim(bins * frames);
  istft_adjoint(g, cfg, frames, gre, gim);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t n = 0; n < length; ++n) lhs += y[n] * g[n];
  for (std::size_t i = 0; i < re.size(); ++i) rhs += re[i] * gre[i] + im[i] * gim[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs) + 1e-9);

  const auto x = test::random_signal(7, length);
  const auto sx = stft(x, 8000.0, cfg);
  const auto back = stft_adjoint(re, im, cfg, length);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) a += sx.data[i].real() * re[i] + sx.data[i].imag() * im[i];
  for (std::size_t n = 0; n < length; ++n) b += x[n] * back[n];
  EXPECT_NEAR(a, b, 1e-9 * std::abs(a) + 1e-9);
}

TEST(Wav, RoundTripFloatAndPcm) {
  const auto dir = test::scratch_dir("wav");
  Waveform w{test::random_signal(8, 1234, 0.2), 22050.0};
  write_wav(dir / "f.wav", w, WavEncoding::Float32);
  const auto f = read_wav(dir / "f.wav");
  EXPECT_EQ(f.sample_rate, 22050.0);
  ASSERT_EQ(f.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(f.samples[i], static_cast<double>(static_cast<float>(w.samples[i])));
  }
  write_wav(dir / "p.wav", w, WavEncoding::Pcm16);
  const auto p = read_wav(dir / "p.wav");
  ASSERT_EQ(p.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(p.samples[i], w.samples[i], 1.0 / 32768);
}

TEST(Wav, RejectsMissingAndMalformed) {
  const auto dir = test::scratch_dir("wav_bad");
  EXPECT_THROW(read_wav(dir / "absent.wav"), IoError);
  {
    std::ofstream f(dir / "junk.wav", std::ios::binary);
    f << "not a riff file at all";
  }
  EXPECT_THROW(read_wav(dir / "junk.wav"), InvalidInput);
}

TEST(SpectrogramDump, WritesCsvAndPgm) {
  const auto dir = test::scratch_dir("dump");
  const auto spec = stft(test::random_signal(9, 1600), 16000.0, {});
  write_magnitude_csv(dir / "m.csv", spec);
  write_log_magnitude_pgm(dir / "m.pgm", spec);
  std::ifstream csv(dir / "m.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::ptrdiff_t(spec.bins - 1));
  }
  EXPECT_EQ(rows, spec.frames);
  std::ifstream pgm(dir / "m.pgm", std::ios::binary);
  std::string magic;
  pgm >> magic;
  EXPECT_EQ(magic, "P5");
}
