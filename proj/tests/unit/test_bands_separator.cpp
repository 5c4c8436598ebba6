#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "helpers.hpp"
#include "tiger/bands/band_scheme.hpp"
#include "tiger/bands/band_split.hpp"
#include "tiger/common/error.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/nn/ops.hpp"
#include "tiger/separator/separator.hpp"

using namespace tiger;
using namespace tiger::bands;
using namespace tiger::separator;
using TD = nn::Tensor<double>;

namespace {

std::vector<std::size_t> repeat(std::initializer_list<std::pair<std::size_t, std::size_t>> runs) {
  std::vector<std::size_t> out;
  for (auto [width, count] : runs) out.insert(out.end(), count, width);
  return out;
}

TD random_tensor(nn::Shape shape, std::uint64_t seed) {
  const auto n = nn::element_count(shape);
  return TD(std::move(shape), test::random_signal(seed, n));
}

template <typename T>
void zero_matching(nn::ParameterStore<T>& store, const std::string& needle) {
  for (const auto& e : store.entries()) {
    if (e.name.find(needle) != std::string::npos) {
      auto t = e.tensor;
      for (auto& v : t.mutable_data()) v = T(0);
    }
  }
}

dsp::ComplexSpectrogram random_spec(std::size_t f, std::size_t t, std::uint64_t seed) {
  dsp::ComplexSpectrogram s(f, t, 25.0);
  const auto re = test::random_signal(seed, f * t);
  const auto im = test::random_signal(seed + 1, f * t);
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = {re[i], im[i]};
  return s;
}

}  // namespace

// ---- schemes ----------------------------------------------------------------

TEST(BandScheme, TabulatedSpeechSchemes) {
  EXPECT_EQ(make_scheme("LowFreqNarrowSplit", 321, 25.0).widths,
            repeat({{1, 40}, {4, 10}, {10, 8}, {20, 8}, {1, 1}}));
  EXPECT_EQ(make_scheme("NormalSplit", 321, 25.0).widths,
            repeat({{2, 20}, {4, 10}, {10, 8}, {20, 8}, {1, 1}}));
  EXPECT_EQ(make_scheme("NonSplit", 321, 25.0).widths, repeat({{1, 321}}));
  EXPECT_EQ(make_scheme("EvenSplit", 321, 25.0).widths, repeat({{4, 66}, {57, 1}}));
}

TEST(BandScheme, DnrSchemeCoversAllBins) {
  const auto s = make_scheme("DnR44k", 1025, 44100.0 / 2048);
  EXPECT_EQ(s.bins(), 1025u);
  EXPECT_EQ(s.bands(), 57u);
  for (auto w : s.widths) EXPECT_GT(w, 0u);
}

TEST(BandScheme, OffsetsAndLookup) {
  const auto s = make_scheme("LowFreqNarrowSplit", 321, 25.0);
  const auto off = s.offsets();
  ASSERT_EQ(off.size(), 68u);
  EXPECT_EQ(off.front(), 0u);
  EXPECT_EQ(off.back(), 321u);
  // Every bin belongs to exactly one band.
  std::vector<int> hits(321, 0);
  for (std::size_t k = 0; k < s.bands(); ++k) {
    for (std::size_t b = off[k]; b < off[k + 1]; ++b) {
      ++hits[b];
      EXPECT_EQ(s.band_of(b), k);
    }
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(BandScheme, Rejections) {
  EXPECT_THROW(make_scheme("LowFreqNarrowSplit", 513, 25.0), InvalidArgument);
  EXPECT_THROW(make_scheme("Bogus", 321, 25.0), InvalidArgument);
  EXPECT_THROW((BandScheme{"x", {1, 0, 2}}.validate(3)), InvalidArgument);
  EXPECT_THROW((BandScheme{"x", {1, 2}}.validate(4)), InvalidArgument);
}

// ---- split / restore --------------------------------------------------------

TEST(BandSplit, Shapes) {
  nn::ParameterStore<double> store;
  BandSplit<double> split(store, "band_split", make_scheme("LowFreqNarrowSplit", 321, 25.0), 16);
  BandSplit<double> flat(store, "flat", make_scheme("NonSplit", 321, 25.0), 16);
  Rng rng(1);
  store.initialize(rng);
  const auto spec = random_spec(321, 7, 2);
  EXPECT_EQ(split(spec).shape(), (nn::Shape{16, 67, 7}));
  EXPECT_EQ(flat(spec).shape(), (nn::Shape{16, 321, 7}));
  EXPECT_EQ(store.scalar_count("band_split.0."), 2u * 2 + 16 * 2 + 16);
}

TEST(BandSplit, ZeroSpectrogramZeroBiasGivesZeroFeatures) {
  nn::ParameterStore<double> store;
  BandSplit<double> split(store, "band_split", make_scheme("NormalSplit", 321, 25.0), 8);
  Rng rng(3);
  store.initialize(rng);
  zero_matching(store, "conv.bias");
  const dsp::ComplexSpectrogram zero(321, 5, 25.0);
  const auto features = split(zero);
  for (double v : features.data()) EXPECT_EQ(v, 0.0);
}

TEST(BandRestore, ShapesSignsAndZeroInput) {
  nn::ParameterStore<double> store;
  const auto scheme = make_scheme("LowFreqNarrowSplit", 321, 25.0);
  BandRestore<double> restore(store, "band_restore", scheme, 8, 2);
  Rng rng(4);
  store.initialize(rng);
  const auto masks = restore(random_tensor({8, 67, 6}, 5));
  ASSERT_EQ(masks.speakers.size(), 2u);
  for (const auto& m : masks.speakers) {
    EXPECT_EQ(m.re.shape(), (nn::Shape{321, 6}));
    EXPECT_EQ(m.im.shape(), (nn::Shape{321, 6}));
    for (double v : m.re.data()) EXPECT_GE(v, 0.0);
    for (double v : m.im.data()) EXPECT_GE(v, 0.0);
  }
  zero_matching(store, "conv.bias");
  const auto zero = restore(TD({8, 67, 6}, 0.0));
  for (const auto& m : zero.speakers) {
    for (double v : m.re.data()) EXPECT_EQ(v, 0.0);
    for (double v : m.im.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(BandRestore, ChannelLayoutPerBand) {
  // One band of width 2, one speaker pair, N = 1, unit PReLU input: the
  // conv output row r lands at speaker r / 4, plane (r / 2) % 2, bin r % 2.
  nn::ParameterStore<double> store;
  BandRestore<double> restore(store, "r", BandScheme{"one", {2}}, 1, 2);
  Rng rng(5);
  store.initialize(rng);
  auto w = store.get("r.0.conv.weight");
  auto b = store.get("r.0.conv.bias");
  for (std::size_t r = 0; r < 8; ++r) {
    w.mutable_data()[r] = 0.0;
    b.mutable_data()[r] = double(r + 1);
  }
  const auto masks = restore(TD({1, 1, 1}, 1.0));
  for (std::size_t r = 0; r < 8; ++r) {
    const auto& sp = masks.speakers[r / 4];
    const auto& plane = ((r / 2) % 2 == 0) ? sp.re : sp.im;
    EXPECT_EQ(plane.data()[r % 2], double(r + 1)) << "row " << r;
  }
}

// ---- separator --------------------------------------------------------------

TEST(Separator, PathOrderParsing) {
  EXPECT_EQ(parse_path_order("F-T"), PathOrder::FrequencyTime);
  EXPECT_EQ(parse_path_order("T-T"), PathOrder::TimeTime);
  EXPECT_EQ(parse_path_order("F-F"), PathOrder::FrequencyFrequency);
  EXPECT_EQ(to_string(PathOrder::TimeTime), "T-T");
  EXPECT_THROW(parse_path_order("T-F"), InvalidArgument);
  SeparatorConfig cfg;
  cfg.order = PathOrder::FrequencyFrequency;
  EXPECT_EQ(cfg.path_axes(), (std::vector<Axis>{Axis::Frequency, Axis::Frequency}));
}

TEST(Msa, ResolutionTraceSmall) {
  nn::ParameterStore<double> store;
  Msa<double> msa(store, "msa", 8, 16, 2);
  Rng rng(6);
  store.initialize(rng);
  std::vector<nn::Shape> trace;
  const TD y = msa(random_tensor({8, 16, 10}, 7), &trace);
  EXPECT_EQ(y.shape(), (nn::Shape{8, 16, 10}));
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(trace[0], (nn::Shape{16, 16, 10}));
  EXPECT_EQ(trace[1], (nn::Shape{16, 8, 10}));
  EXPECT_EQ(trace[2], (nn::Shape{16, 4, 10}));
}

TEST(Msa, PadsSixtySevenBandsToEighty) {
  nn::ParameterStore<double> store;
  Msa<double> msa(store, "msa", 4, 8, 4);
  Rng rng(8);
  store.initialize(rng);
  std::vector<nn::Shape> trace;
  const TD y = msa(random_tensor({4, 67, 2}, 9), &trace);
  EXPECT_EQ(y.shape(), (nn::Shape{4, 67, 2}));
  EXPECT_EQ(trace.front()[1], 80u);
  EXPECT_EQ(trace.back()[1], 5u);
}

TEST(Msa, ZeroInputZeroBiasGivesZero) {
  nn::ParameterStore<double> store;
  Msa<double> msa(store, "msa", 8, 16, 2);
  Rng rng(10);
  store.initialize(rng);
  zero_matching(store, ".bias");
  const TD y = msa(TD({8, 12, 3}, 0.0));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(F3a, ShapesAndSingleBand) {
  nn::ParameterStore<double> store;
  F3a<double> f3a(store, "f3a", 16, 4, 4);
  Rng rng(11);
  store.initialize(rng);
  EXPECT_EQ(store.get("f3a.query.weight").dim(0), 16u);
  EXPECT_EQ(f3a(random_tensor({16, 8, 10}, 12)).shape(), (nn::Shape{16, 8, 10}));

  // With one element on the attended axis the map is [[1]], so the output
  // is the output projection of the value projection.
  const TD x = random_tensor({16, 1, 5}, 13);
  const TD y = f3a(x);
  auto proj = [&](const TD& in, const std::string& name) {
    const TD flat = nn::reshape(in, {16, 5});
    return nn::conv1d(flat, store.get(name + ".weight"), store.get(name + ".bias"), {});
  };
  const TD expect = proj(proj(x, "f3a.value"), "f3a.out");
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.data()[i], expect.data()[i], 1e-12);
}

TEST(FfiPath, ZeroOutputProjectionsGiveResidualIdentity) {
  nn::ParameterStore<double> store;
  SeparatorConfig cfg{.N = 8, .H = 16, .D = 2, .B = 1, .A = 2, .E = 2};
  FfiPath<double> path(store, "p", cfg, Axis::Time);
  Rng rng(14);
  store.initialize(rng);
  zero_matching(store, "msa.out_proj");
  zero_matching(store, "f3a.out");
  const TD x = random_tensor({8, 5, 9}, 15);
  const TD y = path(x);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-12);
}

TEST(Separator, SharedParametersAcrossDepthAndOrder) {
  auto names = [](SeparatorConfig cfg) {
    nn::ParameterStore<float> store;
    Separator<float> sep(store, "separator", cfg);
    std::vector<std::string> out;
    for (const auto& e : store.entries()) out.push_back(e.name);
    return std::make_pair(out, store.scalar_count());
  };
  SeparatorConfig b4{.N = 16, .H = 32, .D = 2, .B = 4, .A = 2, .E = 2};
  SeparatorConfig b8 = b4;
  b8.B = 8;
  SeparatorConfig ff = b4;
  ff.order = PathOrder::FrequencyFrequency;
  EXPECT_EQ(names(b4), names(b8));
  EXPECT_EQ(names(b4).second, names(ff).second);
  const auto n = names(b4).first;
  EXPECT_EQ(std::set<std::string>(n.begin(), n.end()).size(), n.size());
  EXPECT_NE(std::find(n.begin(), n.end(), "separator.path1.msa.in_proj.weight"), n.end());
}

TEST(Separator, SingleRepetitionEqualsOneBlock) {
  nn::ParameterStore<double> store;
  SeparatorConfig cfg{.N = 8, .H = 16, .D = 2, .B = 1, .A = 2, .E = 2};
  Separator<double> sep(store, "separator", cfg);
  Rng rng(16);
  store.initialize(rng);
  const TD x = random_tensor({8, 6, 7}, 17);
  const TD a = sep(x);
  const TD b = sep.block(x);
  EXPECT_EQ(a.shape(), x.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
  EXPECT_EQ(sep.paths().size(), 2u);
  EXPECT_EQ(sep.paths()[0].axis(), Axis::Frequency);
  EXPECT_EQ(sep.paths()[1].axis(), Axis::Time);
}
