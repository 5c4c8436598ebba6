#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tiger/nn/parameter_store.hpp"

namespace tiger::nn {

struct GradCheckOptions {
  double eps = 1e-6;              // central-difference step, within [1e-7, 1e-3]
  std::size_t coordinates = 200;  // sampled scalars; every tensor gets at least one
  std::uint64_t seed = 0;
};

struct GradCheckSample {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<GradCheckSample> samples;

  const GradCheckSample& worst() const;
};

/// Compares reverse-mode gradients of a scalar loss against central
/// differences. `loss` must read the parameters from `params` and return a
/// one-element tensor. The relative error of a coordinate is
/// |a - n| / max(|a|, |n|, 1e-8). Throws NumericalError if two evaluations
/// at the same point differ.
GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           ParameterStore<double>& params, const GradCheckOptions& options = {});

}  // namespace tiger::nn
