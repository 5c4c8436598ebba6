#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "tiger/common/error.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/metrics/metrics.hpp"
#include "tiger/mixgen/mixgen.hpp"
#include "tiger/model/tiger_model.hpp"
#include "tiger/nn/grad_check.hpp"
#include "tiger/nn/ops.hpp"
#include "tiger/training/dataset.hpp"
#include "tiger/training/losses.hpp"
#include "tiger/training/optimizer.hpp"
#include "tiger/training/trainer.hpp"

using namespace tiger;
using TD = nn::Tensor<double>;

namespace {

std::vector<double> scaled(std::vector<double> x, double a) {
  for (auto& v : x) v *= a;
  return x;
}

std::vector<double> plus(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

TD tensor(const std::vector<double>& v) { return TD({v.size()}, v); }

}  // namespace

// ---- metrics ----------------------------------------------------------------

TEST(Metrics, SiSdrCases) {
  const auto ref = test::random_signal(1, 2000);
  const auto est = plus(ref, test::random_signal(2, 2000, 0.3));
  EXPECT_GT(metrics::si_sdr(ref, ref), 100.0);
  EXPECT_NEAR(metrics::si_sdr(scaled(est, 2.0), ref), metrics::si_sdr(est, ref), 1e-9);
  EXPECT_NEAR(metrics::si_sdr(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 0.0, 1e-6);
  EXPECT_THROW(metrics::si_sdr(ref, std::vector<double>(2000, 0.0)), InvalidArgument);
  EXPECT_THROW(metrics::si_sdr(ref, std::vector<double>(10, 1.0)), InvalidArgument);
}

TEST(Metrics, SdrCases) {
  const auto ref = test::random_signal(3, 1000);
  EXPECT_GT(metrics::sdr(ref, ref), 100.0);
  EXPECT_EQ(metrics::sdr(scaled(ref, 2.0), ref), 0.0);
  EXPECT_EQ(metrics::sdr(std::vector<double>(1000, 0.0), ref), 0.0);
}

TEST(Metrics, Improvement) {
  const auto s1 = test::random_signal(4, 3000);
  const auto s2 = test::random_signal(5, 3000);
  const auto mix = plus(s1, s2);
  EXPECT_EQ(metrics::improvement(metrics::Metric::SiSdr, mix, mix, s1), 0.0);
  EXPECT_EQ(metrics::improvement(metrics::Metric::Sdr, mix, mix, s1), 0.0);
  const double base = metrics::si_sdr(mix, s1);
  const double cap = metrics::si_sdr(s1, s1);
  EXPECT_GT(metrics::improvement(metrics::Metric::SiSdr, s1, mix, s1), 100.0 - base);
  EXPECT_NEAR(metrics::improvement(metrics::Metric::SiSdr, s1, mix, s1), cap - base, 0.01);
  // Equal-energy independent sources put the mixture near 0 dB.
  EXPECT_NEAR(base, 0.0, 0.5);
}

TEST(Metrics, ReportMeansCsvAndJson) {
  metrics::MetricReport r;
  const auto a = test::random_signal(6, 500);
  const auto b = test::random_signal(7, 500);
  const auto mix = plus(a, b);
  r.add_utterance("u1", {a, b}, mix, {a, b});
  r.add_utterance("u2", {mix}, mix, {a});
  EXPECT_EQ(r.utterances(), 2u);
  const double u1 = (metrics::si_sdr(a, a) + metrics::si_sdr(b, b)) / 2.0;
  const double u2 = metrics::si_sdr(mix, a);
  EXPECT_NEAR(r.mean_si_sdr(), (u1 + u2) / 2.0, 1e-12);
  EXPECT_NEAR(r.mean_si_sdri(),
              ((u1 - (metrics::si_sdr(mix, a) + metrics::si_sdr(mix, b)) / 2.0) + 0.0) / 2.0,
              1e-9);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "utterance_id,speaker,sdr,si_sdr,sdri,si_sdri");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const auto j = nlohmann::json::parse(r.summary_json());
  EXPECT_EQ(j["utterances"], 2);
  EXPECT_NEAR(j["si_sdr"].get<double>(), r.mean_si_sdr(), 1e-9);
  EXPECT_THROW(r.add_utterance("u3", {a}, mix, {a, b}), InvalidArgument);
}

TEST(Metrics, BestPermutation) {
  const auto a = test::random_signal(8, 400);
  const auto b = test::random_signal(9, 400);
  const auto c = test::random_signal(10, 400);
  EXPECT_EQ(metrics::best_permutation({b, a}, {a, b}), (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(metrics::best_permutation({c, a, b}, {a, b, c}), (std::vector<std::size_t>{1, 2, 0}));
}

// ---- losses -----------------------------------------------------------------

TEST(Losses, DifferentiableSiSdrMatchesMetricAndGradient) {
  const auto ref = test::random_signal(11, 300);
  const auto est = plus(ref, test::random_signal(12, 300, 0.5));
  EXPECT_EQ(training::si_sdr(tensor(est), ref).item(), metrics::si_sdr(est, ref));

  nn::ParameterStore<double> store;
  TD e = store.add("est", {300}, nn::InitRule::constant(0.0));
  std::copy(est.begin(), est.end(), e.mutable_data().begin());
  auto loss = [&] { return training::si_sdr(e, ref); };
  EXPECT_LT(nn::grad_check(loss, store, {.eps = 1e-6, .coordinates = 50}).max_rel_error, 1e-6);
}

TEST(Losses, PitIdentitySwapAndBruteForce) {
  const auto a = test::random_signal(13, 200);
  const auto b = test::random_signal(14, 200);
  const auto same = training::pit_loss<double>({tensor(a), tensor(b)}, {a, b});
  EXPECT_EQ(same.permutation, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(same.value, -(metrics::si_sdr(a, a) + metrics::si_sdr(b, b)) / 2.0);
  const auto swapped = training::pit_loss<double>({tensor(b), tensor(a)}, {a, b});
  EXPECT_EQ(swapped.permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(swapped.value, same.value);

  const auto x = test::random_signal(15, 200);
  const auto y = test::random_signal(16, 200);
  const auto p = training::pit_loss<double>({tensor(x), tensor(y)}, {a, b});
  const double keep = -(metrics::si_sdr(x, a) + metrics::si_sdr(y, b)) / 2.0;
  const double swap = -(metrics::si_sdr(y, a) + metrics::si_sdr(x, b)) / 2.0;
  EXPECT_EQ(p.value, std::min(keep, swap));
}

TEST(Losses, PitGradient) {
  const std::vector<std::vector<double>> refs = {test::random_signal(17, 80),
                                                 test::random_signal(18, 80)};
  nn::ParameterStore<double> store;
  TD e0 = store.add("e0", {80}, nn::InitRule::uniform(1.0));
  TD e1 = store.add("e1", {80}, nn::InitRule::uniform(1.0));
  Rng rng(19);
  store.initialize(rng);
  auto loss = [&] { return training::pit_loss<double>({e0, e1}, refs).loss; };
  EXPECT_LT(nn::grad_check(loss, store, {.coordinates = 60}).max_rel_error, 1e-6);
}

TEST(Losses, DnrCases) {
  const dsp::StftConfig stft{64, 16};
  const auto ref = test::random_signal(20, 400);
  EXPECT_EQ(training::dnr_loss<double>({tensor(ref)}, {ref}, stft).item(), 0.0);

  const double c = 0.3;
  auto shifted = ref;
  for (auto& v : shifted) v += c;
  const std::vector<double> constant(400, c);
  const auto spec = dsp::stft(constant, 1.0, stft);
  double modulus = 0.0;
  for (const auto& z : spec.data) modulus += std::abs(z);
  modulus /= double(spec.data.size());
  EXPECT_NEAR(training::dnr_loss<double>({tensor(shifted)}, {ref}, stft).item(), c + modulus,
              1e-12);

  const auto err = test::random_signal(21, 400, 0.1);
  const double one = training::dnr_loss<double>({tensor(plus(ref, err))}, {ref}, stft).item();
  const double two =
      training::dnr_loss<double>({tensor(plus(ref, scaled(err, 2.0)))}, {ref}, stft).item();
  EXPECT_NEAR(two, 2.0 * one, 1e-12 * one);
}

TEST(Losses, DnrGradient) {
  const dsp::StftConfig stft{32, 8};
  const std::vector<std::vector<double>> refs = {test::random_signal(22, 96),
                                                 test::random_signal(23, 96)};
  nn::ParameterStore<double> store;
  TD e0 = store.add("e0", {96}, nn::InitRule::uniform(1.0));
  TD e1 = store.add("e1", {96}, nn::InitRule::uniform(1.0));
  Rng rng(24);
  store.initialize(rng);
  auto loss = [&] { return training::dnr_loss<double>({e0, e1}, refs, stft); };
  EXPECT_LT(nn::grad_check(loss, store, {.coordinates = 60}).max_rel_error, 1e-5);
}

// ---- optimizer and schedule ---------------------------------------------------

TEST(Adam, FirstStepByHand) {
  nn::ParameterStore<double> store;
  TD w = store.add("w", {1}, nn::InitRule::constant(1.0));
  Rng rng(0);
  store.initialize(rng);
  training::Adam<double> adam(store, {.lr = 0.1});
  w.grad_buffer()[0] = 2.0;  // d(w^2)/dw at w = 1
  adam.step();
  EXPECT_NEAR(w.item(), 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w.item(), 0.9, 1e-8);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, ZeroGradientAndMirroring) {
  nn::ParameterStore<double> store;
  TD a = store.add("a", {1}, nn::InitRule::constant(0.7));
  TD b = store.add("b", {1}, nn::InitRule::constant(-0.7));
  TD z = store.add("z", {1}, nn::InitRule::constant(0.5));
  Rng rng(0);
  store.initialize(rng);
  training::Adam<double> adam(store, {.lr = 0.05});
  for (int i = 0; i < 25; ++i) {
    store.zero_grad();
    a.grad_buffer()[0] = 2.0 * a.item() + 0.1 * i;
    b.grad_buffer()[0] = -a.grad()[0];
    adam.step();
    EXPECT_EQ(a.item(), -b.item());
  }
  EXPECT_EQ(z.item(), 0.5);
  EXPECT_EQ(adam.steps(), 25u);
}

TEST(Adam, DecoupledWeightDecay) {
  nn::ParameterStore<double> store;
  TD w = store.add("w", {1}, nn::InitRule::constant(1.0));
  Rng rng(0);
  store.initialize(rng);
  training::Adam<double> adamw(
      store, {.lr = 0.1, .weight_decay = 0.01, .kind = training::OptimizerKind::AdamW});
  adamw.step();
  EXPECT_NEAR(w.item(), 1.0 - 0.1 * 0.01, 1e-15);
  training::Adam<double> adam(store, {.lr = 0.1, .weight_decay = 0.01});
  const double before = w.item();
  adam.step();
  EXPECT_EQ(w.item(), before);
}

TEST(Adam, NonFiniteGradientLeavesParametersUntouched) {
  nn::ParameterStore<double> store;
  TD a = store.add("first", {2}, nn::InitRule::constant(1.0));
  TD b = store.add("second", {2}, nn::InitRule::constant(1.0));
  Rng rng(0);
  store.initialize(rng);
  training::Adam<double> adam(store, {});
  a.grad_buffer()[0] = 1.0;
  b.grad_buffer()[1] = std::nan("");
  try {
    adam.step();
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos);
  }
  EXPECT_EQ(a.data()[0], 1.0);
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Plateau, FlatCurve) {
  training::PlateauSchedule s(1e-3, {});
  std::size_t first_halving = 0, stop = 0;
  for (std::size_t epoch = 1; epoch <= 100 && stop == 0; ++epoch) {
    const auto d = s.observe(5.0);
    if (d.reduced && first_halving == 0) first_halving = epoch;
    if (d.stop) stop = epoch;
  }
  EXPECT_EQ(first_halving, 11u);
  EXPECT_EQ(stop, 21u);
  EXPECT_DOUBLE_EQ(s.lr(), 2.5e-4);
}

TEST(Plateau, ImprovingCurveNeverReduces) {
  training::PlateauSchedule s(1e-3, {});
  for (int epoch = 0; epoch < 200; ++epoch) {
    const auto d = s.observe(100.0 - epoch);
    EXPECT_TRUE(d.improved);
    EXPECT_FALSE(d.reduced);
    EXPECT_FALSE(d.stop);
  }
  EXPECT_EQ(s.lr(), 1e-3);
}

TEST(Parsing, LossAndOptimizerNames) {
  EXPECT_EQ(training::parse_loss("neg_sisdr_pit"), training::LossKind::NegSiSdrPit);
  EXPECT_EQ(training::parse_loss("dnr_mae"), training::LossKind::DnrMae);
  EXPECT_EQ(training::parse_optimizer("adamw"), training::OptimizerKind::AdamW);
  EXPECT_THROW(training::parse_loss("l2"), InvalidArgument);
  EXPECT_THROW(training::parse_optimizer("sgd"), InvalidArgument);
}

// ---- dataset and trainer ----------------------------------------------------

TEST(Dataset, ManifestRoundTripAndLoading) {
  const auto dir = test::scratch_dir("manifest");
  mixgen::DatasetSpec spec;
  spec.count = 3;
  spec.mix.duration = 0.25;
  spec.seed = 5;
  const auto entries = mixgen::write_dataset(dir, spec);
  const auto back = training::read_manifest(dir / "manifest.yaml");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].id, entries[1].id);
  EXPECT_EQ(back[1].refs.size(), 2u);
  EXPECT_TRUE(back[1].noise.has_value());
  const auto data = training::load_dataset(dir / "manifest.yaml");
  ASSERT_EQ(data.size(), 3u);
  EXPECT_EQ(data[0].mixture.size(), 4000u);
  EXPECT_NO_THROW(data[0].validate());

  training::Example bad = data[0];
  bad.references[1].samples.pop_back();
  EXPECT_THROW(bad.validate(), InvalidInput);
  EXPECT_THROW(training::read_manifest(dir / "absent.yaml"), IoError);
}

TEST(Trainer, CropAndShortRun) {
  mixgen::DatasetSpec spec;
  spec.count = 2;
  spec.mix.duration = 0.25;
  spec.seed = 3;
  std::vector<training::Example> data;
  for (std::size_t i = 0; i < spec.count; ++i) {
    data.push_back(mixgen::to_example(mixgen::synth_example(spec, i), std::to_string(i)));
  }
  const auto c = training::crop(data[0], 100, 50);
  EXPECT_EQ(c.mixture.size(), 50u);
  EXPECT_EQ(c.references[1].samples[0], data[0].references[1].samples[100]);

  auto cfg = model::TigerConfig::from_preset("tiny");
  cfg.set("separator.N", "8");
  cfg.set("separator.H", "16");
  cfg.set("separator.D", "2");
  cfg.set("separator.B", "1");
  auto run = [&] {
    auto m = model::TigerModel<float>::build(cfg, 1);
    training::TrainConfig tc;
    tc.max_steps = 4;
    tc.segment_seconds = 0.1;
    tc.seed = 9;
    std::size_t epochs_seen = 0;
    const auto h = training::fit(m, data, data, tc, [&](const auto&) { ++epochs_seen; });
    EXPECT_EQ(h.steps, 4u);
    EXPECT_EQ(h.stop_reason, "max_steps");
    EXPECT_EQ(epochs_seen, h.epochs.size());
    EXPECT_EQ(h.to_csv().substr(0, 29), "epoch,train_loss,valid_loss,l");
    return m.parameters().snapshot();
  };
  EXPECT_EQ(run(), run());
}
