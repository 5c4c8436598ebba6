#include "tiger/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tiger/common/error.hpp"

namespace tiger::nn {

const GradCheckSample& GradCheckResult::worst() const {
  if (samples.empty()) throw InvalidArgument("grad_check: no samples");
  return *std::max_element(samples.begin(), samples.end(),
                           [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
}

namespace {

double evaluate(const std::function<Tensor<double>()>& loss) {
  const Tensor<double> value = loss();
  return value.item();
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           ParameterStore<double>& params, const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw InvalidArgument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  const auto& entries = params.entries();
  if (entries.empty()) throw InvalidArgument("grad_check: no parameters");

  const double base = evaluate(loss);
  if (evaluate(loss) != base) throw NumericalError("grad_check: loss function is not deterministic");

  params.zero_grad();
  {
    GradientTape<double> tape;
    const Tensor<double> value = loss();
    tape.backward(value);
  }

  // Coordinates as (tensor, flat index). Each tensor contributes one, the
  // rest are drawn uniformly over all scalars without replacement.
  std::vector<std::size_t> offsets(entries.size() + 1, 0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    offsets[i + 1] = offsets[i] + entries[i].tensor.numel();
  }
  const std::size_t total = offsets.back();
  Rng rng(options.seed);
  std::set<std::size_t> chosen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].tensor.numel() > 0) chosen.insert(offsets[i] + rng.index(entries[i].tensor.numel()));
  }
  const std::size_t target = std::min(total, std::max(options.coordinates, chosen.size()));
  while (chosen.size() < target) chosen.insert(rng.index(total));

  GradCheckResult result;
  for (std::size_t flat : chosen) {
    const std::size_t ti =
        static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) -
                                 offsets.begin()) - 1;
    Tensor<double> t = entries[ti].tensor;
    const std::size_t k = flat - offsets[ti];
    const auto grad = t.grad();
    const double analytic = grad.empty() ? 0.0 : grad[k];

    auto values = t.mutable_data();
    const double saved = values[k];
    values[k] = saved + options.eps;
    const double up = evaluate(loss);
    values[k] = saved - options.eps;
    const double down = evaluate(loss);
    values[k] = saved;
    const double numeric = (up - down) / (2.0 * options.eps);

    GradCheckSample s{entries[ti].name, k, analytic, numeric, 0.0};
    s.rel_error = std::abs(analytic - numeric) /
                  std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    result.max_rel_error = std::max(result.max_rel_error, s.rel_error);
    result.samples.push_back(std::move(s));
  }
  params.zero_grad();
  return result;
}

}  // namespace tiger::nn
