#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tiger/dsp/stft.hpp"
#include "tiger/nn/tensor.hpp"

namespace tiger::training {

/// Differentiable SI-SDR (dB) of an [L] estimate against a fixed reference,
/// using the same arithmetic as metrics::si_sdr. Returns a [1] tensor.
template <typename T>
nn::Tensor<T> si_sdr(const nn::Tensor<T>& estimate, std::span<const double> reference);

template <typename T>
struct PitResult {
  nn::Tensor<T> loss;                    // [1]
  double value = 0.0;                    // loss value in double precision
  std::vector<std::size_t> permutation;  // permutation[i] = estimate assigned to reference i
};

/// Negative SI-SDR with the best assignment over all C! permutations:
/// loss = -(1/C) max_pi sum_i si_sdr(est[pi(i)], ref[i]). The gradient flows
/// through the selected assignment.
template <typename T>
PitResult<T> pit_loss(const std::vector<nn::Tensor<T>>& estimates,
                      const std::vector<std::vector<double>>& references);

/// Labelled-stem loss: (1/C) sum_i mean|e_i| + (1/C) sum_i mean_{f,t}|STFT(e_i)|
/// with e_i = est_i - ref_i and |.| the complex modulus in the second term.
template <typename T>
nn::Tensor<T> dnr_loss(const std::vector<nn::Tensor<T>>& estimates,
                       const std::vector<std::vector<double>>& references,
                       const dsp::StftConfig& stft);

}  // namespace tiger::training
