#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tiger/bands/band_split.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/dsp/waveform.hpp"
#include "tiger/model/config.hpp"
#include "tiger/nn/parameter_store.hpp"
#include "tiger/separator/separator.hpp"

namespace tiger::model {

/// Complex elementwise product of each mask with the mixture spectrogram.
std::vector<dsp::ComplexSpectrogram> apply_masks(const dsp::ComplexSpectrogram& mixture,
                                                 const std::vector<dsp::ComplexSpectrogram>& masks);

/// Differentiable complex product of mask planes with a constant spectrogram.
template <typename T>
bands::SpectralPlanes<T> apply_mask(const bands::SpectralPlanes<T>& mask,
                                    const bands::SpectralPlanes<T>& mixture);

/// Differentiable inverse STFT of F x T planes to a [length] waveform.
template <typename T>
nn::Tensor<T> istft(const bands::SpectralPlanes<T>& spec, const dsp::StftConfig& cfg,
                    std::size_t length);

/// Encoder, band split, separator, restoration, masking and decoder.
/// Parameters are named "band_split.*", "separator.*" and "band_restore.*".
template <typename T>
class TigerModel {
 public:
  /// Throws InvalidArgument if the configuration is inconsistent.
  static TigerModel build(const TigerConfig& config, std::uint64_t seed);
  static TigerModel load(const std::filesystem::path& checkpoint);
  void save(const std::filesystem::path& checkpoint) const;

  const TigerConfig& config() const { return config_; }
  nn::ParameterStore<T>& parameters() { return store_; }
  const nn::ParameterStore<T>& parameters() const { return store_; }

  const bands::BandSplit<T>& band_split() const { return split_; }
  const separator::Separator<T>& separator() const { return separator_; }
  const bands::BandRestore<T>& band_restore() const { return restore_; }

  /// Per-speaker masks for a mixture spectrogram.
  bands::MaskTensors<T> masks(const dsp::ComplexSpectrogram& mixture) const;

  /// Source estimates as [L] tensors; records onto an active tape so the
  /// result can be differentiated with respect to the parameters. Inputs
  /// shorter than one window are zero-padded and the outputs trimmed.
  std::vector<nn::Tensor<T>> separate(std::span<const double> mixture) const;

  /// Source estimates with the input's length and sample rate.
  std::vector<dsp::Waveform> forward(const dsp::Waveform& mixture) const;

 private:
  TigerModel(const TigerConfig& config);

  TigerConfig config_;
  nn::ParameterStore<T> store_;
  bands::BandSplit<T> split_;
  separator::Separator<T> separator_;
  bands::BandRestore<T> restore_;
};

}  // namespace tiger::model
