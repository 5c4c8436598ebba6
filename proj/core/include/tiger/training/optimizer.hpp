#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "tiger/nn/parameter_store.hpp"

namespace tiger::training {

enum class OptimizerKind { Adam, AdamW };

OptimizerKind parse_optimizer(std::string_view text);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; applied only by AdamW
  OptimizerKind kind = OptimizerKind::Adam;
};

/// Adam / AdamW over every tensor of a parameter store. Moments are kept in
/// double precision. Parameters without a gradient are treated as having a
/// zero gradient.
template <typename T>
class Adam {
 public:
  Adam(nn::ParameterStore<T>& params, AdamOptions options);

  /// One update from the gradients currently held by the parameters.
  /// Throws NumericalError naming the first parameter with a non-finite
  /// gradient; no parameter is modified in that case.
  void step();

  double lr() const { return options_.lr; }
  void set_lr(double lr);
  std::uint64_t steps() const { return steps_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  nn::ParameterStore<T>& params_;
  AdamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct PlateauOptions {
  std::size_t patience = 10;       // epochs without improvement before halving
  double factor = 0.5;
  std::size_t stop_patience = 20;  // epochs without improvement before stopping
};

/// Learning-rate schedule driven by the validation loss. An epoch improves
/// when its loss is strictly below the best so far.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool reduced = false;
    bool stop = false;
    double lr = 0.0;
  };

  PlateauSchedule(double lr, PlateauOptions options);

  Decision observe(double valid_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_;
  PlateauOptions options_;
  double best_;
  std::size_t since_best_ = 0;
  std::size_t since_reduce_ = 0;
};

}  // namespace tiger::training
