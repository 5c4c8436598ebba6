#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "tiger/common/error.hpp"
#include "tiger/model/config.hpp"
#include "tiger/model/infer_long.hpp"
#include "tiger/model/tiger_model.hpp"
#include "tiger/profiler/profiler.hpp"

using namespace tiger;
using namespace tiger::model;

// ---- config -----------------------------------------------------------------

TEST(Config, PresetsValidateAndRoundTripThroughYaml) {
  for (const auto& name : preset_names()) {
    const auto c = TigerConfig::from_preset(name);
    EXPECT_NO_THROW(c.validate()) << name;
    EXPECT_EQ(TigerConfig::from_yaml(c.to_yaml()), c) << name;
  }
  const auto dnr = TigerConfig::from_preset("dnr");
  EXPECT_EQ(dnr.sources, 3u);
  EXPECT_EQ(dnr.scheme.bins(), 1025u);
  EXPECT_EQ(TigerConfig::from_preset("large").separator.B, 8u);
  EXPECT_THROW(TigerConfig::from_preset("huge"), InvalidArgument);
}

TEST(Config, YamlStartsFromPresetAndRejectsUnknownKeys) {
  const auto c = TigerConfig::from_yaml("preset: tiny\nseparator:\n  B: 2\n");
  EXPECT_EQ(c.separator.N, 24u);
  EXPECT_EQ(c.separator.B, 2u);
  EXPECT_EQ(c.scheme.bands(), 67u);
  EXPECT_THROW(TigerConfig::from_yaml("colour: blue\n"), InvalidArgument);
  EXPECT_THROW(TigerConfig::from_yaml("scheme:\n  name: custom\n"), InvalidArgument);
  const auto custom = TigerConfig::from_yaml(
      "stft: {window_size: 32, hop: 8}\nscheme: {name: custom, widths: [8, 9]}\n");
  EXPECT_EQ(custom.scheme.widths, (std::vector<std::size_t>{8, 9}));
}

TEST(Config, DottedOverrides) {
  auto c = TigerConfig::from_preset("small");
  c.set("separator.B", "8");
  EXPECT_EQ(c.separator.B, 8u);
  c.set("separator.path_order", "F-F");
  EXPECT_EQ(c.separator.order, separator::PathOrder::FrequencyFrequency);
  c.set("scheme.name", "EvenSplit");
  EXPECT_EQ(c.scheme.bands(), 67u);
  EXPECT_EQ(c.scheme.widths.back(), 57u);
  c.set("preset", "tiny");
  EXPECT_EQ(c, TigerConfig::from_preset("tiny"));
  EXPECT_THROW(c.set("separator.bogus", "1"), InvalidArgument);
  EXPECT_THROW(c.set("nothing", "1"), InvalidArgument);
  EXPECT_THROW(c.set("separator.B", "0"), InvalidArgument);
}

// ---- mask application -------------------------------------------------------

TEST(ApplyMasks, ComplexProduct) {
  dsp::ComplexSpectrogram x(3, 2, 25.0);
  for (auto& v : x.data) v = {1.0, 1.0};
  dsp::ComplexSpectrogram ones(3, 2, 25.0), zeros(3, 2, 25.0), twos(3, 2, 25.0);
  for (auto& v : ones.data) v = 1.0;
  for (auto& v : twos.data) v = 2.0;
  const auto out = apply_masks(x, {ones, zeros, twos});
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    EXPECT_EQ(out[0].data[i], x.data[i]);
    EXPECT_EQ(out[1].data[i], std::complex<double>(0.0));
    EXPECT_EQ(out[2].data[i], std::complex<double>(2.0, 2.0));
  }
}

// ---- model ------------------------------------------------------------------

TEST(TigerModel, PresetParameterOrdering) {
  const auto small = profiler::count_params(TigerModel<float>::build(TigerConfig::from_preset("small"), 1));
  const auto large = profiler::count_params(TigerModel<float>::build(TigerConfig::from_preset("large"), 1));
  const auto tiny = profiler::count_params(TigerModel<float>::build(TigerConfig::from_preset("tiny"), 1));
  EXPECT_EQ(small, large);
  EXPECT_LT(tiny, small);
}

TEST(TigerModel, SmallPresetLengthContract) {
  const auto m = TigerModel<float>::build(TigerConfig::from_preset("small"), 2);
  const dsp::Waveform wave{test::random_signal(3, 48000, 0.1), 16000.0};
  const auto out = m.forward(wave);
  ASSERT_EQ(out.size(), 2u);
  for (const auto& o : out) {
    EXPECT_EQ(o.size(), 48000u);
    EXPECT_EQ(o.sample_rate, 16000.0);
  }
}

TEST(TigerModel, SilentInputGivesSilentOutput) {
  const auto m = TigerModel<float>::build(TigerConfig::from_preset("tiny"), 4);
  const dsp::Waveform silent{std::vector<double>(8000, 0.0), 16000.0};
  for (const auto& o : m.forward(silent)) {
    double peak = 0.0;
    for (double v : o.samples) peak = std::max(peak, std::abs(v));
    EXPECT_LT(peak, 1e-6);
  }
}

TEST(TigerModel, ShortInputIsPaddedAndTrimmed) {
  const auto m = TigerModel<float>::build(TigerConfig::from_preset("tiny"), 5);
  const dsp::Waveform tiny{test::random_signal(6, 100, 0.1), 16000.0};
  for (const auto& o : m.forward(tiny)) EXPECT_EQ(o.size(), 100u);
}

TEST(TigerModel, DnrPresetGivesThreeStems) {
  const auto m = TigerModel<float>::build(TigerConfig::from_preset("dnr"), 7);
  const dsp::Waveform wave{test::random_signal(8, 11025, 0.1), 44100.0};
  const auto out = m.forward(wave);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& o : out) EXPECT_EQ(o.size(), 11025u);
}

TEST(TigerModel, RejectsWrongRateAndBadSamples) {
  const auto m = TigerModel<float>::build(TigerConfig::from_preset("tiny"), 9);
  EXPECT_THROW(m.forward({std::vector<double>(1000, 0.0), 8000.0}), InvalidArgument);
  std::vector<double> bad(1000, 0.0);
  bad[10] = std::nan("");
  EXPECT_THROW(m.forward({bad, 16000.0}), InvalidInput);
}

TEST(TigerModel, SameSeedSameParametersFloatAndDouble) {
  const auto cfg = TigerConfig::from_preset("tiny");
  const auto f = TigerModel<float>::build(cfg, 10);
  const auto d = TigerModel<double>::build(cfg, 10);
  ASSERT_EQ(f.parameters().size(), d.parameters().size());
  for (std::size_t i = 0; i < f.parameters().size(); ++i) {
    const auto& a = f.parameters().entries()[i];
    const auto& b = d.parameters().entries()[i];
    ASSERT_EQ(a.name, b.name);
    for (std::size_t j = 0; j < a.tensor.numel(); ++j) {
      ASSERT_EQ(static_cast<double>(a.tensor.data()[j]), b.tensor.data()[j]);
    }
  }
}

TEST(TigerModel, SaveLoadKeepsConfigAndOutputs) {
  const auto dir = test::scratch_dir("model_ckpt");
  auto cfg = TigerConfig::from_preset("tiny");
  cfg.set("separator.B", "2");
  const auto m = TigerModel<float>::build(cfg, 11);
  m.save(dir / "m.ckpt");
  const auto back = TigerModel<float>::load(dir / "m.ckpt");
  EXPECT_EQ(back.config(), cfg);
  const dsp::Waveform wave{test::random_signal(12, 4000, 0.1), 16000.0};
  EXPECT_EQ(m.forward(wave)[0].samples, back.forward(wave)[0].samples);
}

// ---- long-form inference ----------------------------------------------------

TEST(InferLong, SegmentPlan) {
  const auto p = plan_segments(960000, 48000, 0.5);
  EXPECT_EQ(p.stride, 24000u);
  EXPECT_EQ(p.starts.size(), 39u);
  EXPECT_EQ(p.starts.back(), 960000u - 48000u);
  const auto odd = plan_segments(50000, 48000, 0.5);
  EXPECT_EQ(odd.starts, (std::vector<std::size_t>{0, 2000}));
  const auto short_input = plan_segments(1000, 48000, 0.5);
  EXPECT_EQ(short_input.starts, (std::vector<std::size_t>{0}));
  EXPECT_THROW(plan_segments(1000, 48000, 1.0), InvalidArgument);
}

TEST(InferLong, IdentityStubReconstructsInput) {
  const auto wave = test::random_signal(13, 100000);
  auto identity = [](std::span<const double> seg) {
    return std::vector<std::vector<double>>{{seg.begin(), seg.end()}};
  };
  const auto out = infer_long(identity, wave, 16000, 0.5);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_EQ(out[0].size(), wave.size());
  for (std::size_t n = 0; n < wave.size(); ++n) EXPECT_NEAR(out[0][n], wave[n], 1e-12);
}

// A stub that swaps its two outputs on every other segment must still be
// stitched into continuous tracks.
TEST(InferLong, AlignsPermutationsAcrossSegments) {
  const auto a = test::random_signal(14, 64000);
  const auto b = test::random_signal(15, 64000);
  std::vector<double> mix(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) mix[n] = a[n] + 10.0 * b[n];
  std::size_t call = 0;
  std::size_t offset = 0;
  const auto plan = plan_segments(mix.size(), 16000, 0.5);
  auto swapping = [&](std::span<const double> seg) {
    offset = plan.starts[call];
    std::vector<double> sa(a.begin() + offset, a.begin() + offset + seg.size());
    std::vector<double> sb(b.begin() + offset, b.begin() + offset + seg.size());
    const bool swap = (call++ % 2) == 1;
    return swap ? std::vector<std::vector<double>>{sb, sa} : std::vector<std::vector<double>>{sa, sb};
  };
  const auto out = infer_long(swapping, mix, 16000, 0.5);
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t n = 0; n < a.size(); ++n) {
    ASSERT_NEAR(out[0][n], a[n], 1e-9);
    ASSERT_NEAR(out[1][n], b[n], 1e-9);
  }
}
