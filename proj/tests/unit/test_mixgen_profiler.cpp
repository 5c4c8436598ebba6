#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "helpers.hpp"
#include "tiger/common/error.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/mixgen/mixgen.hpp"
#include "tiger/model/tiger_model.hpp"
#include "tiger/nn/layer.hpp"
#include "tiger/profiler/profiler.hpp"

using namespace tiger;

namespace {

double ratio_db(const std::vector<double>& a, const std::vector<double>& b) {
  return 10.0 * std::log10(test::energy(a) / test::energy(b));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

// ---- mixgen -----------------------------------------------------------------

TEST(Mixgen, GainForSdr) {
  const std::vector<double> a{1, -1, 1, -1};
  const std::vector<double> b{-1, 1, 1, -1};
  EXPECT_DOUBLE_EQ(mixgen::gain_for_sdr(a, b, 0.0), 1.0);
  EXPECT_NEAR(mixgen::gain_for_sdr(a, b, 5.0), std::pow(10.0, -5.0 / 20.0), 1e-12);
  EXPECT_NEAR(mixgen::gain_for_sdr(a, b, 5.0), 0.56234, 1e-5);
  for (int i = 0; i < 20; ++i) {
    const auto s = test::random_signal(100 + i, 800);
    auto n = test::random_signal(200 + i, 800, 3.0);
    const double target = -10.0 + i;
    const double g = mixgen::gain_for_sdr(s, n, target);
    for (auto& v : n) v *= g;
    EXPECT_NEAR(ratio_db(s, n), target, 0.01);
    EXPECT_NEAR(mixgen::energy_ratio_db(s, n), target, 0.01);
  }
  EXPECT_THROW(mixgen::gain_for_sdr(a, std::vector<double>(4, 0.0), 0.0), InvalidArgument);
}

TEST(Mixgen, FullAndZeroOverlapPlacement) {
  Rng rng(1);
  const dsp::Waveform s0{test::random_signal(2, 8000, 0.1), 16000.0};
  const dsp::Waveform s1{test::random_signal(3, 8000, 0.1), 16000.0};
  const dsp::Waveform noise{test::random_signal(4, 16000, 0.1), 16000.0};
  mixgen::MixSpec spec;
  spec.duration = 1.0;
  spec.noise_sdr_min = spec.noise_sdr_max = 30.0;
  spec.overlap_ratio = 1.0;
  const auto full = mixgen::make_mixture({s0, s1}, noise, spec, rng);
  EXPECT_EQ(full.meta.offsets[0], full.meta.offsets[1]);
  EXPECT_EQ(full.mixture.size(), 16000u);

  spec.overlap_ratio = 0.0;
  const auto apart = mixgen::make_mixture({s0, s1}, noise, spec, rng);
  EXPECT_EQ(apart.meta.offsets[1], apart.meta.offsets[0] + 8000);
  const auto& r0 = apart.references[0].samples;
  const auto& r1 = apart.references[1].samples;
  for (std::size_t n = 0; n < r0.size(); ++n) EXPECT_TRUE(r0[n] == 0.0 || r1[n] == 0.0);
  const std::size_t mid = apart.meta.offsets[1];
  double first = 0.0, second = 0.0;
  for (std::size_t n = 0; n < mid; ++n) first += r1[n] * r1[n];
  for (std::size_t n = mid; n < r1.size(); ++n) second += r1[n] * r1[n];
  EXPECT_EQ(first, 0.0);
  EXPECT_GT(second, 0.0);

  spec.overlap_ratio = 0.0;
  spec.duration = 0.75;
  EXPECT_THROW(mixgen::make_mixture({s0, s1}, noise, spec, rng), InvalidArgument);
}

TEST(Mixgen, RealizedSdrsAndExactSum) {
  mixgen::DatasetSpec spec;
  spec.count = 30;
  spec.speakers = 3;
  spec.mix.duration = 0.5;
  spec.seed = 11;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto ex = mixgen::synth_example(spec, i);
    ASSERT_EQ(ex.references.size(), 3u);
    for (std::size_t s = 1; s < 3; ++s) {
      EXPECT_NEAR(ratio_db(ex.references[0].samples, ex.references[s].samples),
                  ex.meta.speaker_sdr_target[s - 1], 0.01);
    }
    std::vector<double> speech(ex.mixture.size(), 0.0);
    for (const auto& r : ex.references) {
      for (std::size_t n = 0; n < speech.size(); ++n) speech[n] += r.samples[n];
    }
    EXPECT_NEAR(ratio_db(speech, ex.noise.samples), ex.meta.noise_sdr_target, 0.01);
    for (std::size_t n = 0; n < speech.size(); ++n) {
      ASSERT_EQ(ex.mixture.samples[n], speech[n] + ex.noise.samples[n]);
    }
    double peak = 0.0;
    for (double v : ex.mixture.samples) peak = std::max(peak, std::abs(v));
    EXPECT_LE(peak, 1.0);
  }
}

TEST(Mixgen, SynthSourcesAreBandSeparatedAndBounded) {
  Rng a(5), b(5);
  const auto s = mixgen::synth_sources(a, 2, 1.0, 16000.0);
  const auto t = mixgen::synth_sources(b, 2, 1.0, 16000.0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].samples, t[0].samples);
  EXPECT_EQ(s[1].samples, t[1].samples);
  for (const auto& w : s) {
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    EXPECT_LE(peak, 0.9 + 1e-12);
    EXPECT_GE(peak, 0.5 - 1e-12);
  }
  // Shared spectral energy: overlap of the two normalised bin distributions.
  const auto x = dsp::stft(s[0], {});
  const auto y = dsp::stft(s[1], {});
  std::vector<double> ex(x.bins, 0.0), ey(y.bins, 0.0);
  for (std::size_t f = 0; f < x.bins; ++f) {
    for (std::size_t t2 = 0; t2 < x.frames; ++t2) {
      ex[f] += std::norm(x.at(f, t2));
      ey[f] += std::norm(y.at(f, t2));
    }
  }
  double sx = 0.0, sy = 0.0;
  for (std::size_t f = 0; f < x.bins; ++f) {
    sx += ex[f];
    sy += ey[f];
  }
  double shared = 0.0;
  for (std::size_t f = 0; f < x.bins; ++f) shared += std::min(ex[f] / sx, ey[f] / sy);
  EXPECT_LT(shared, 0.10);
}

TEST(Mixgen, DatasetDirectoriesAreByteIdentical) {
  const auto d1 = test::scratch_dir("mix_a");
  const auto d2 = test::scratch_dir("mix_b");
  mixgen::DatasetSpec spec;
  spec.count = 3;
  spec.mix.duration = 0.25;
  spec.seed = 7;
  mixgen::write_dataset(d1, spec);
  mixgen::write_dataset(d2, spec);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = std::filesystem::relative(e.path(), d1);
    EXPECT_EQ(slurp(e.path()), slurp(d2 / rel)) << rel;
  }
  EXPECT_EQ(files, 3u * 4 + 1);
}

// ---- profiler ---------------------------------------------------------------

TEST(Profiler, RowsSumAndModuleBreakdown) {
  const auto cfg = model::TigerConfig::from_preset("small");
  const auto r = profiler::count_macs(cfg, 1.0);
  EXPECT_EQ(r.frames, 101u);
  std::uint64_t p = 0, m = 0;
  for (const auto& row : r.rows) {
    p += row.params;
    m += row.macs;
  }
  EXPECT_EQ(p, r.params);
  EXPECT_EQ(m, r.macs);
  std::uint64_t mp = 0;
  for (const auto& mod : r.modules()) mp += mod.params;
  EXPECT_EQ(mp, r.params);
  const auto model = model::TigerModel<float>::build(cfg, 1);
  EXPECT_EQ(r.params, profiler::count_params(model));
  EXPECT_EQ(r.modules()[0].params, model.parameters().scalar_count("band_split."));
  EXPECT_EQ(r.modules()[1].params, model.parameters().scalar_count("separator."));
  EXPECT_EQ(r.modules()[2].params, model.parameters().scalar_count("band_restore."));
}

TEST(Profiler, LayerFormulasAndLinearity) {
  EXPECT_EQ(nn::LayerSpec::pointwise(128, 128).macs(67ull * 101), 128ull * 128 * 67 * 101);
  const auto cfg = model::TigerConfig::from_preset("small");
  auto b8 = cfg;
  b8.set("separator.B", "8");
  EXPECT_EQ(profiler::count_macs(b8).module_macs("separator"),
            2 * profiler::count_macs(cfg).module_macs("separator"));
  // Everything except attention across frames is linear in the frame
  // count, so doubling the duration doubles it up to one multi-scale padding
  // block of 2^D frames; the time-axis attention product grows with the
  // square of the frame count.
  const auto one = profiler::count_macs(cfg, 1.0);
  const auto two = profiler::count_macs(cfg, 2.0);
  auto split = [](const profiler::CostReport& r) {
    std::pair<double, double> linear_quadratic{0.0, 0.0};
    for (const auto& row : r.rows) {
      const bool quadratic = row.name == "separator.path1.f3a.attention";
      (quadratic ? linear_quadratic.second : linear_quadratic.first) += double(row.macs);
    }
    return linear_quadratic;
  };
  const auto [lin1, quad1] = split(one);
  const auto [lin2, quad2] = split(two);
  const double per_frame = lin1 / double(one.frames);
  const double block = double(std::size_t{1} << cfg.separator.D);
  EXPECT_LE(std::abs(lin2 - 2.0 * lin1), block * per_frame);
  const double ratio = double(two.frames) / double(one.frames);
  EXPECT_NEAR(quad2 / quad1, ratio * ratio, 1e-12);
}

TEST(Profiler, AnalyticMatchesExecutedCount) {
  for (const char* preset : {"tiny", "dnr"}) {
    const auto cfg = model::TigerConfig::from_preset(preset);
    const double seconds = std::string(preset) == "dnr" ? 0.1 : 0.5;
    const auto m = model::TigerModel<float>::build(cfg, 3);
    EXPECT_EQ(profiler::measure_macs(m, seconds), profiler::count_macs(cfg, seconds).macs)
        << preset;
  }
}

TEST(Profiler, ReportFormats) {
  const auto r = profiler::count_macs(model::TigerConfig::from_preset("tiny"), 1.0);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,module,params,macs");
  EXPECT_NE(csv.find("total,all," + std::to_string(r.params)), std::string::npos);
  const std::string text = r.to_text(true);
  EXPECT_NE(text.find("parameters: " + std::to_string(r.params)), std::string::npos);
  EXPECT_NE(text.find("separator.path0.f3a.attention"), std::string::npos);
  EXPECT_EQ(r.to_text(false).find("layers:"), std::string::npos);
}

TEST(Profiler, TimingRelations) {
  const auto tiny = model::TigerModel<float>::build(model::TigerConfig::from_preset("tiny"), 1);
  const auto small = model::TigerModel<float>::build(model::TigerConfig::from_preset("small"), 1);
  const auto fwd = profiler::benchmark(tiny, 5, profiler::BenchMode::Forward, 1, 0.5);
  const auto both = profiler::benchmark(tiny, 5, profiler::BenchMode::ForwardBackward, 1, 0.5);
  const auto big = profiler::benchmark(small, 3, profiler::BenchMode::Forward, 1, 0.5);
  EXPECT_EQ(fwd.runs, 5u);
  EXPECT_GT(fwd.mean_ms, 0.0);
  EXPECT_GT(both.mean_ms, fwd.mean_ms);
  EXPECT_LT(fwd.mean_ms, big.mean_ms);
  EXPECT_GT(profiler::working_set_bytes(tiny, 0.5),
            profiler::count_params(tiny) * sizeof(float));
  EXPECT_THROW(profiler::benchmark(tiny, 0, profiler::BenchMode::Forward), InvalidArgument);
}
