#include "tiger/bands/band_split.hpp"

#include "tiger/common/error.hpp"

namespace tiger::bands {

using nn::LayerSpec;
using nn::Shape;
using nn::Tensor;

template <typename T>
SpectralPlanes<T> to_planes(const dsp::ComplexSpectrogram& spec) {
  std::vector<T> re(spec.data.size());
  std::vector<T> im(spec.data.size());
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    re[i] = static_cast<T>(spec.data[i].real());
    im[i] = static_cast<T>(spec.data[i].imag());
  }
  return {Tensor<T>(Shape{spec.bins, spec.frames}, std::move(re)),
          Tensor<T>(Shape{spec.bins, spec.frames}, std::move(im))};
}

template <typename T>
std::vector<dsp::ComplexSpectrogram> to_mask_set(const MaskTensors<T>& masks, double bin_hz) {
  std::vector<dsp::ComplexSpectrogram> out;
  for (const auto& m : masks.speakers) {
    dsp::ComplexSpectrogram s(m.re.dim(0), m.re.dim(1), bin_hz);
    const auto re = m.re.data();
    const auto im = m.im.data();
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = {re[i], im[i]};
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
BandSplit<T>::BandSplit(nn::ParameterStore<T>& store, const std::string& prefix, BandScheme scheme,
                        std::size_t feature_channels)
    : scheme_(std::move(scheme)), channels_(feature_channels) {
  scheme_.validate(scheme_.bins());
  for (std::size_t k = 0; k < scheme_.bands(); ++k) {
    const std::size_t in = 2 * scheme_.widths[k];
    const std::string p = prefix + "." + std::to_string(k);
    norms_.emplace_back(store, p + ".norm", LayerSpec::group_norm(in, 1));
    convs_.emplace_back(store, p + ".conv", LayerSpec::conv(in, feature_channels, 1));
  }
}

template <typename T>
Tensor<T> BandSplit<T>::operator()(const SpectralPlanes<T>& spec) const {
  if (spec.re.rank() != 2 || spec.re.shape() != spec.im.shape()) {
    throw InvalidArgument("band_split: expected matching F x T real and imaginary planes");
  }
  if (spec.re.dim(0) != scheme_.bins()) {
    throw InvalidArgument("band_split: spectrogram has " + std::to_string(spec.re.dim(0)) +
                          " bins, scheme '" + scheme_.name + "' covers " +
                          std::to_string(scheme_.bins()));
  }
  const std::size_t frames = spec.re.dim(1);
  const auto offsets = scheme_.offsets();
  std::vector<Tensor<T>> bands;
  bands.reserve(scheme_.bands());
  for (std::size_t k = 0; k < scheme_.bands(); ++k) {
    const std::size_t g = scheme_.widths[k];
    Tensor<T> stacked = nn::concat<T>(
        {nn::slice(spec.re, 0, offsets[k], g), nn::slice(spec.im, 0, offsets[k], g)}, 0);
    Tensor<T> z = convs_[k](norms_[k](stacked));
    bands.push_back(nn::reshape(z, Shape{channels_, 1, frames}));
  }
  return nn::concat(bands, 1);
}

template <typename T>
Tensor<T> BandSplit<T>::operator()(const dsp::ComplexSpectrogram& spec) const {
  return (*this)(to_planes<T>(spec));
}

template <typename T>
BandRestore<T>::BandRestore(nn::ParameterStore<T>& store, const std::string& prefix,
                            BandScheme scheme, std::size_t feature_channels, std::size_t speakers)
    : scheme_(std::move(scheme)), channels_(feature_channels), speakers_(speakers) {
  if (speakers == 0) throw InvalidArgument("band_restore: need at least one speaker");
  scheme_.validate(scheme_.bins());
  for (std::size_t k = 0; k < scheme_.bands(); ++k) {
    const std::string p = prefix + "." + std::to_string(k);
    activations_.emplace_back(store, p + ".prelu", LayerSpec::prelu(feature_channels));
    convs_.emplace_back(store, p + ".conv",
                        LayerSpec::conv(feature_channels, 2 * scheme_.widths[k] * speakers, 1));
  }
}

template <typename T>
MaskTensors<T> BandRestore<T>::operator()(const Tensor<T>& features) const {
  if (features.rank() != 3 || features.dim(0) != channels_ || features.dim(1) != scheme_.bands()) {
    throw InvalidArgument("band_restore: expected features " + std::to_string(channels_) + " x " +
                          std::to_string(scheme_.bands()) + " x T, got " +
                          nn::to_string(features.shape()));
  }
  const std::size_t frames = features.dim(2);
  std::vector<std::vector<Tensor<T>>> re(speakers_), im(speakers_);
  for (std::size_t k = 0; k < scheme_.bands(); ++k) {
    const std::size_t g = scheme_.widths[k];
    Tensor<T> band = nn::reshape(nn::slice(features, 1, k, 1), Shape{channels_, frames});
    Tensor<T> out = nn::relu(convs_[k](activations_[k](band)));
    for (std::size_t c = 0; c < speakers_; ++c) {
      re[c].push_back(nn::slice(out, 0, c * 2 * g, g));
      im[c].push_back(nn::slice(out, 0, c * 2 * g + g, g));
    }
  }
  MaskTensors<T> masks;
  for (std::size_t c = 0; c < speakers_; ++c) {
    masks.speakers.push_back({nn::concat(re[c], 0), nn::concat(im[c], 0)});
  }
  return masks;
}

template struct SpectralPlanes<float>;
template struct SpectralPlanes<double>;
template SpectralPlanes<float> to_planes(const dsp::ComplexSpectrogram&);
template SpectralPlanes<double> to_planes(const dsp::ComplexSpectrogram&);
template std::vector<dsp::ComplexSpectrogram> to_mask_set(const MaskTensors<float>&, double);
template std::vector<dsp::ComplexSpectrogram> to_mask_set(const MaskTensors<double>&, double);
template class BandSplit<float>;
template class BandSplit<double>;
template class BandRestore<float>;
template class BandRestore<double>;

}  // namespace tiger::bands
