#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tiger/model/tiger_model.hpp"
#include "tiger/training/dataset.hpp"
#include "tiger/training/optimizer.hpp"

namespace tiger::training {

enum class LossKind { NegSiSdrPit, DnrMae };

LossKind parse_loss(std::string_view text);

struct TrainConfig {
  LossKind loss = LossKind::NegSiSdrPit;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-3;
  double weight_decay = 0.01;  // AdamW only
  std::size_t plateau_patience = 10;
  double plateau_factor = 0.5;
  std::size_t early_stop_patience = 20;
  std::size_t max_epochs = 500;
  std::size_t max_steps = 0;  // 0 = unlimited
  double segment_seconds = 3.0;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
  std::size_t steps = 0;
  std::string stop_reason;

  /// epoch,train_loss,valid_loss,lr
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Loss of one example on the active tape (if any).
template <typename T>
nn::Tensor<T> example_loss(const model::TigerModel<T>& model, const Example& example,
                           LossKind loss);

/// Copies a window of `length` samples starting at `start` from every signal.
Example crop(const Example& example, std::size_t start, std::size_t length);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop: per-epoch random crops of segment_seconds, shuffled order,
/// gradient averaging over batch_size examples, validation on one fixed
/// segment of every validation example, plateau schedule and early stop.
/// With the SI-SDR loss, crops are redrawn (up to 16 times) until every
/// reference is non-silent; validation takes the first such window on a
/// half-segment grid. Either falls back to the whole example.
/// On return the model holds the parameters of the best validation epoch.
/// Throws NumericalError if a loss becomes non-finite.
template <typename T>
TrainHistory fit(model::TigerModel<T>& model, const std::vector<Example>& train,
                 const std::vector<Example>& valid, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

}  // namespace tiger::training
