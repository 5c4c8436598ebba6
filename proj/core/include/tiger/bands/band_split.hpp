#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tiger/bands/band_scheme.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/nn/layer.hpp"

namespace tiger::bands {

/// Real and imaginary planes of a spectrogram as F x T tensors.
template <typename T>
struct SpectralPlanes {
  nn::Tensor<T> re;
  nn::Tensor<T> im;
};

template <typename T>
SpectralPlanes<T> to_planes(const dsp::ComplexSpectrogram& spec);

/// Per-speaker complex masks, each plane F x T.
template <typename T>
struct MaskTensors {
  std::vector<SpectralPlanes<T>> speakers;
};

/// Converts mask tensors to complex spectrograms (one per speaker).
template <typename T>
std::vector<dsp::ComplexSpectrogram> to_mask_set(const MaskTensors<T>& masks, double bin_hz);

/// Learned band split: for band k, [Re; Im] rows (2 G_k x T) go through a
/// one-group GroupNorm and a kernel-1 conv to N x T. Bands are stacked into
/// an N x K x T feature map. Parameters are per band.
template <typename T>
class BandSplit {
 public:
  BandSplit() = default;
  BandSplit(nn::ParameterStore<T>& store, const std::string& prefix, BandScheme scheme,
            std::size_t feature_channels);

  nn::Tensor<T> operator()(const SpectralPlanes<T>& spec) const;
  nn::Tensor<T> operator()(const dsp::ComplexSpectrogram& spec) const;

  const BandScheme& scheme() const { return scheme_; }

 private:
  BandScheme scheme_;
  std::size_t channels_ = 0;
  std::vector<nn::Layer<T>> norms_;
  std::vector<nn::Layer<T>> convs_;
};

/// Learned restoration: for band k, N x T goes through PReLU, a kernel-1
/// conv to 2 G_k C channels and ReLU. Output channels are ordered
/// (speaker, real/imag, bin-in-band); bands are concatenated along F.
template <typename T>
class BandRestore {
 public:
  BandRestore() = default;
  BandRestore(nn::ParameterStore<T>& store, const std::string& prefix, BandScheme scheme,
              std::size_t feature_channels, std::size_t speakers);

  MaskTensors<T> operator()(const nn::Tensor<T>& features) const;

  std::size_t speakers() const { return speakers_; }

 private:
  BandScheme scheme_;
  std::size_t channels_ = 0;
  std::size_t speakers_ = 0;
  std::vector<nn::Layer<T>> activations_;
  std::vector<nn::Layer<T>> convs_;
};

}  // namespace tiger::bands
