#include <benchmark/benchmark.h>

#include "tiger/common/random.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/model/tiger_model.hpp"
#include "tiger/nn/ops.hpp"

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  tiger::Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = 0.1 * rng.normal();
  return x;
}

template <typename T> tiger::nn::Tensor<T> random_tensor(tiger::nn::Shape shape, std::uint64_t seed) {
  tiger::Rng rng(seed);
  std::vector<T> values(tiger::nn::element_count(shape));
  for (auto& v : values) v = static_cast<T>(rng.normal());
  return tiger::nn::Tensor<T>(std::move(shape), std::move(values));
}

void BM_StftRoundTrip(benchmark::State& state) {
  const auto seconds = static_cast<std::size_t>(state.range(0));
  const auto x = noise(16000 * seconds, 1);
  const tiger::dsp::StftConfig cfg;
  for (auto _ : state) {
    const auto spec = tiger::dsp::stft(x, 16000.0, cfg);
    benchmark::DoNotOptimize(tiger::dsp::istft(spec, cfg, x.size()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_StftRoundTrip)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

// Pointwise conv over a [channels, bands, frames] feature map.
void BM_PointwiseConv(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor<float>({channels, 67, 101}, 2);
  const auto w = random_tensor<float>({channels, channels, 1}, 3);
  const auto b = random_tensor<float>({channels}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(tiger::nn::conv1d(x, w, b, {}));
}
BENCHMARK(BM_PointwiseConv)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_Attention(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto q = random_tensor<float>({16, frames, 67}, 5);
  const auto k = random_tensor<float>({16, frames, 67}, 6);
  const auto v = random_tensor<float>({128, frames, 67}, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tiger::nn::multihead_attention(q, k, v, 4, 0.1f));
  }
}
BENCHMARK(BM_Attention)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state, const char* preset) {
  const auto model =
      tiger::model::TigerModel<float>::build(tiger::model::TigerConfig::from_preset(preset), 1);
  const tiger::dsp::Waveform wave{noise(16000, 8), 16000.0};
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(wave));
}
BENCHMARK_CAPTURE(BM_ModelForward, tiny, "tiny")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ModelForward, small, "small")->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
