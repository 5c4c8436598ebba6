#include "tiger/model/tiger_model.hpp"

#include <algorithm>
#include <cmath>

#include "tiger/common/error.hpp"
#include "tiger/nn/checkpoint.hpp"

namespace tiger::model {

using nn::Shape;
using nn::Tensor;

std::vector<dsp::ComplexSpectrogram> apply_masks(const dsp::ComplexSpectrogram& mixture,
                                                 const std::vector<dsp::ComplexSpectrogram>& masks) {
  std::vector<dsp::ComplexSpectrogram> out;
  out.reserve(masks.size());
  for (const auto& m : masks) {
    if (m.bins != mixture.bins || m.frames != mixture.frames) {
      throw InvalidArgument("apply_masks: mask is " + std::to_string(m.bins) + "x" +
                            std::to_string(m.frames) + ", spectrogram is " +
                            std::to_string(mixture.bins) + "x" + std::to_string(mixture.frames));
    }
    dsp::ComplexSpectrogram h(mixture.bins, mixture.frames, mixture.bin_hz);
    for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] = m.data[i] * mixture.data[i];
    out.push_back(std::move(h));
  }
  return out;
}

template <typename T>
bands::SpectralPlanes<T> apply_mask(const bands::SpectralPlanes<T>& mask,
                                    const bands::SpectralPlanes<T>& mixture) {
  if (mask.re.shape() != mixture.re.shape()) {
    throw InvalidArgument("apply_mask: mask " + nn::to_string(mask.re.shape()) +
                          " does not match spectrogram " + nn::to_string(mixture.re.shape()));
  }
  return {nn::sub(nn::mul(mask.re, mixture.re), nn::mul(mask.im, mixture.im)),
          nn::add(nn::mul(mask.re, mixture.im), nn::mul(mask.im, mixture.re))};
}

template <typename T>
Tensor<T> istft(const bands::SpectralPlanes<T>& spec, const dsp::StftConfig& cfg,
                std::size_t length) {
  if (spec.re.rank() != 2 || spec.re.shape() != spec.im.shape() || spec.re.dim(0) != cfg.bins()) {
    throw InvalidArgument("istft: expected matching " + std::to_string(cfg.bins()) +
                          " x T planes, got " + nn::to_string(spec.re.shape()));
  }
  const std::size_t frames = spec.re.dim(1);
  dsp::ComplexSpectrogram s(cfg.bins(), frames, 0.0);
  const auto re = spec.re.data();
  const auto im = spec.im.data();
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = {double(re[i]), double(im[i])};
  const std::vector<double> wave = dsp::istft(s, cfg, length);
  Tensor<T> out(Shape{length}, std::vector<T>(wave.begin(), wave.end()));
  nn::attach_backward<T>(out, {&spec.re, &spec.im},
                         [spec, cfg, frames](std::span<const T> g) {
                           const std::vector<double> grad(g.begin(), g.end());
                           std::vector<double> gre(cfg.bins() * frames), gim(gre.size());
                           dsp::istft_adjoint(grad, cfg, frames, gre, gim);
                           spec.re.accumulate_grad(std::vector<T>(gre.begin(), gre.end()));
                           spec.im.accumulate_grad(std::vector<T>(gim.begin(), gim.end()));
                         });
  return out;
}

template <typename T>
TigerModel<T>::TigerModel(const TigerConfig& config) : config_(config) {
  config_.validate();
  split_ = bands::BandSplit<T>(store_, "band_split", config_.scheme, config_.separator.N);
  separator_ = separator::Separator<T>(store_, "separator", config_.separator);
  restore_ = bands::BandRestore<T>(store_, "band_restore", config_.scheme, config_.separator.N,
                                   config_.sources);
}

template <typename T>
TigerModel<T> TigerModel<T>::build(const TigerConfig& config, std::uint64_t seed) {
  TigerModel m(config);
  Rng rng(seed);
  m.store_.initialize(rng);
  return m;
}

template <typename T>
TigerModel<T> TigerModel<T>::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::read_checkpoint(path);
  TigerModel m(TigerConfig::from_yaml(ck.config));
  nn::load_parameters(ck, m.store_);
  return m;
}

template <typename T>
void TigerModel<T>::save(const std::filesystem::path& path) const {
  nn::write_checkpoint(path, nn::make_checkpoint(config_.to_yaml(), store_));
}

template <typename T>
bands::MaskTensors<T> TigerModel<T>::masks(const dsp::ComplexSpectrogram& mixture) const {
  return restore_(separator_(split_(mixture)));
}

template <typename T>
std::vector<Tensor<T>> TigerModel<T>::separate(std::span<const double> mixture) const {
  if (mixture.empty()) throw InvalidArgument("separate: empty mixture");
  const std::size_t length = mixture.size();
  std::vector<double> padded(mixture.begin(), mixture.end());
  if (padded.size() < config_.stft.window_size) padded.resize(config_.stft.window_size, 0.0);
  const dsp::ComplexSpectrogram spec = dsp::stft(padded, config_.sample_rate, config_.stft);
  const auto planes = bands::to_planes<T>(spec);
  const auto masks = restore_(separator_(split_(planes)));
  std::vector<Tensor<T>> out;
  for (const auto& m : masks.speakers) {
    Tensor<T> wave = istft(apply_mask(m, planes), config_.stft, padded.size());
    out.push_back(padded.size() == length ? wave : nn::slice(wave, 0, 0, length));
  }
  return out;
}

template <typename T>
std::vector<dsp::Waveform> TigerModel<T>::forward(const dsp::Waveform& mixture) const {
  dsp::validate(mixture);
  if (std::abs(mixture.sample_rate - config_.sample_rate) > 1e-9) {
    throw InvalidArgument("forward: input sample rate " + std::to_string(mixture.sample_rate) +
                          " Hz does not match the model's " + std::to_string(config_.sample_rate) +
                          " Hz");
  }
  std::vector<dsp::Waveform> out;
  for (const auto& t : separate(mixture.samples)) {
    out.push_back({std::vector<double>(t.data().begin(), t.data().end()), mixture.sample_rate});
  }
  return out;
}

template bands::SpectralPlanes<float> apply_mask(const bands::SpectralPlanes<float>&,
                                                 const bands::SpectralPlanes<float>&);
template bands::SpectralPlanes<double> apply_mask(const bands::SpectralPlanes<double>&,
                                                  const bands::SpectralPlanes<double>&);
template Tensor<float> istft(const bands::SpectralPlanes<float>&, const dsp::StftConfig&,
                             std::size_t);
template Tensor<double> istft(const bands::SpectralPlanes<double>&, const dsp::StftConfig&,
                              std::size_t);
template class TigerModel<float>;
template class TigerModel<double>;

}  // namespace tiger::model
