#include "tiger/training/optimizer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tiger/common/error.hpp"

namespace tiger::training {

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "adamw") return OptimizerKind::AdamW;
  throw InvalidArgument("unknown optimizer '" + std::string(text) + "' (adam, adamw)");
}

template <typename T>
Adam<T>::Adam(nn::ParameterStore<T>& params, AdamOptions options)
    : params_(params), options_(options) {
  set_lr(options.lr);
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::set_lr(double lr) {
  if (!(lr > 0)) throw InvalidArgument("optimizer: learning rate must be positive");
  options_.lr = lr;
}

template <typename T>
void Adam<T>::step() {
  const auto& entries = params_.entries();
  for (const auto& e : entries) {
    for (T g : e.tensor.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("optimizer: non-finite gradient in parameter '" + e.name + "'");
      }
    }
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const bool decay = options_.kind == OptimizerKind::AdamW && options_.weight_decay != 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    nn::Tensor<T> t = entries[i].tensor;
    const auto grad = t.grad();
    auto w = t.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[k]);
      double value = static_cast<double>(w[k]);
      if (decay) value -= options_.lr * options_.weight_decay * value;
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      value -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
      w[k] = static_cast<T>(value);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

PlateauSchedule::PlateauSchedule(double lr, PlateauOptions options)
    : lr_(lr), options_(options), best_(std::numeric_limits<double>::infinity()) {
  if (!(lr > 0)) throw InvalidArgument("schedule: learning rate must be positive");
  if (options.patience == 0 || options.stop_patience == 0) {
    throw InvalidArgument("schedule: patience values must be positive");
  }
  if (!(options.factor > 0 && options.factor < 1)) {
    throw InvalidArgument("schedule: reduction factor must lie in (0, 1)");
  }
}

PlateauSchedule::Decision PlateauSchedule::observe(double valid_loss) {
  Decision d;
  if (valid_loss < best_) {
    best_ = valid_loss;
    since_best_ = 0;
    since_reduce_ = 0;
    d.improved = true;
  } else {
    ++since_best_;
    ++since_reduce_;
    if (since_reduce_ >= options_.patience) {
      lr_ *= options_.factor;
      since_reduce_ = 0;
      d.reduced = true;
    }
    d.stop = since_best_ >= options_.stop_patience;
  }
  d.lr = lr_;
  return d;
}

}  // namespace tiger::training
