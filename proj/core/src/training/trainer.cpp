#include "tiger/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "tiger/common/error.hpp"
#include "tiger/training/losses.hpp"

namespace tiger::training {

LossKind parse_loss(std::string_view text) {
  if (text == "neg_sisdr_pit") return LossKind::NegSiSdrPit;
  if (text == "dnr_mae") return LossKind::DnrMae;
  throw InvalidArgument("unknown loss '" + std::string(text) + "' (neg_sisdr_pit, dnr_mae)");
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw InvalidArgument("train: lr must be positive");
  if (plateau_patience == 0 || early_stop_patience == 0) {
    throw InvalidArgument("train: patience values must be positive");
  }
  if (max_epochs == 0) throw InvalidArgument("train: max_epochs must be positive");
  if (batch_size == 0) throw InvalidArgument("train: batch_size must be positive");
  if (!(segment_seconds > 0)) throw InvalidArgument("train: segment_seconds must be positive");
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,valid_loss,lr\n";
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.valid_loss,
                  e.lr);
    out += buf;
  }
  return out;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("train: cannot write history '" + path.string() + "'");
  out << to_csv();
}

Example crop(const Example& example, std::size_t start, std::size_t length) {
  if (start + length > example.mixture.size()) {
    throw InvalidArgument("crop: window exceeds example '" + example.id + "'");
  }
  auto cut = [start, length](const dsp::Waveform& w) {
    return dsp::Waveform{std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                             w.samples.begin() +
                                                 static_cast<std::ptrdiff_t>(start + length)),
                         w.sample_rate};
  };
  Example out;
  out.id = example.id;
  out.mixture = cut(example.mixture);
  for (const auto& r : example.references) out.references.push_back(cut(r));
  if (example.noise) out.noise = cut(*example.noise);
  return out;
}

template <typename T>
nn::Tensor<T> example_loss(const model::TigerModel<T>& model, const Example& example,
                           LossKind loss) {
  if (example.references.size() != model.config().sources) {
    throw InvalidArgument("train: example '" + example.id + "' has " +
                          std::to_string(example.references.size()) + " references, model has " +
                          std::to_string(model.config().sources) + " outputs");
  }
  const auto estimates = model.separate(example.mixture.samples);
  std::vector<std::vector<double>> refs;
  for (const auto& r : example.references) refs.push_back(r.samples);
  if (loss == LossKind::NegSiSdrPit) return pit_loss(estimates, refs).loss;
  return dnr_loss(estimates, refs, model.config().stft);
}

namespace {

std::size_t segment_samples(const model::TigerConfig& mc, const TrainConfig& tc) {
  return static_cast<std::size_t>(std::llround(tc.segment_seconds * mc.sample_rate));
}

constexpr std::size_t kCropAttempts = 16;

// SI-SDR is undefined for a silent reference, so negative SI-SDR training
// needs windows in which every reference is active.
bool references_active(const Example& e, std::size_t start, std::size_t length) {
  for (const auto& r : e.references) {
    const auto first = r.samples.begin() + static_cast<std::ptrdiff_t>(start);
    if (std::all_of(first, first + static_cast<std::ptrdiff_t>(length),
                    [](double v) { return v == 0.0; })) {
      return false;
    }
  }
  return true;
}

// Random window; falls back to the whole example when no draw is usable.
Example training_window(const Example& e, std::size_t segment, LossKind loss, Rng& rng) {
  const std::size_t len = e.mixture.size();
  if (len <= segment) return e;
  for (std::size_t attempt = 0; attempt < kCropAttempts; ++attempt) {
    const std::size_t start = rng.index(len - segment + 1);
    if (loss != LossKind::NegSiSdrPit || references_active(e, start, segment)) {
      return crop(e, start, segment);
    }
  }
  return e;
}

// First usable window on a half-segment grid, else the whole example.
Example validation_window(const Example& e, std::size_t segment, LossKind loss) {
  const std::size_t len = e.mixture.size();
  if (len <= segment) return e;
  const std::size_t step = std::max<std::size_t>(1, segment / 2);
  for (std::size_t start = 0;; start = std::min(start + step, len - segment)) {
    if (loss != LossKind::NegSiSdrPit || references_active(e, start, segment)) {
      return crop(e, start, segment);
    }
    if (start == len - segment) return e;
  }
}

void check_finite(double value, const std::string& where) {
  if (!std::isfinite(value)) throw NumericalError("train: loss diverged (" + where + ")");
}

}  // namespace

template <typename T>
TrainHistory fit(model::TigerModel<T>& model, const std::vector<Example>& train,
                 const std::vector<Example>& valid, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty() || valid.empty()) throw InvalidArgument("train: datasets must be non-empty");
  for (const auto& e : train) e.validate();
  for (const auto& e : valid) e.validate();

  const std::size_t segment = segment_samples(model.config(), config);
  auto& params = model.parameters();
  Adam<T> optimizer(params, {.lr = config.lr,
                             .weight_decay = config.optimizer == OptimizerKind::AdamW
                                                 ? config.weight_decay
                                                 : 0.0,
                             .kind = config.optimizer});
  PlateauSchedule schedule(config.lr, {.patience = config.plateau_patience,
                                       .factor = config.plateau_factor,
                                       .stop_patience = config.early_stop_patience});
  Rng rng(config.seed);

  TrainHistory history;
  history.best_valid_loss = INFINITY;
  auto best = params.snapshot();
  std::vector<std::size_t> order(train.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double train_sum = 0.0;
    std::size_t in_batch = 0;
    bool out_of_steps = false;
    params.zero_grad();
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const Example& full = train[order[pos]];
      const Example segment_ex = training_window(full, segment, config.loss, rng);
      double value = 0.0;
      {
        nn::GradientTape<T> tape;
        const nn::Tensor<T> loss = example_loss(model, segment_ex, config.loss);
        value = static_cast<double>(loss.item());
        check_finite(value, "epoch " + std::to_string(epoch) + ", example '" + full.id + "'");
        tape.backward(loss);
      }
      train_sum += value;
      if (++in_batch == config.batch_size || pos + 1 == order.size()) {
        if (in_batch > 1) {
          const T inv = static_cast<T>(1.0 / static_cast<double>(in_batch));
          for (const auto& e : params.entries()) {
            nn::Tensor<T> t = e.tensor;
            for (auto& g : t.grad_buffer()) g *= inv;
          }
        }
        optimizer.step();
        params.zero_grad();
        in_batch = 0;
        ++history.steps;
        if (config.max_steps != 0 && history.steps >= config.max_steps) {
          out_of_steps = true;
          train_sum *= static_cast<double>(order.size()) / static_cast<double>(pos + 1);
          break;
        }
      }
    }

    double valid_sum = 0.0;
    for (const auto& v : valid) {
      const Example ex = validation_window(v, segment, config.loss);
      const double value = static_cast<double>(example_loss(model, ex, config.loss).item());
      check_finite(value, "validation of '" + v.id + "'");
      valid_sum += value;
    }

    EpochRecord rec{epoch, train_sum / static_cast<double>(train.size()),
                    valid_sum / static_cast<double>(valid.size()), optimizer.lr()};
    history.epochs.push_back(rec);
    const auto decision = schedule.observe(rec.valid_loss);
    if (decision.improved) {
      history.best_epoch = epoch;
      history.best_valid_loss = rec.valid_loss;
      best = params.snapshot();
    }
    if (decision.reduced) optimizer.set_lr(decision.lr);
    if (on_epoch) on_epoch(rec);
    if (out_of_steps) {
      history.stop_reason = "max_steps";
      break;
    }
    if (decision.stop) {
      history.stop_reason = "early_stop";
      break;
    }
    if (epoch == config.max_epochs) history.stop_reason = "max_epochs";
  }
  params.restore(best);
  return history;
}

template nn::Tensor<float> example_loss(const model::TigerModel<float>&, const Example&, LossKind);
template nn::Tensor<double> example_loss(const model::TigerModel<double>&, const Example&,
                                         LossKind);
template TrainHistory fit(model::TigerModel<float>&, const std::vector<Example>&,
                          const std::vector<Example>&, const TrainConfig&, const EpochCallback&);
template TrainHistory fit(model::TigerModel<double>&, const std::vector<Example>&,
                          const std::vector<Example>&, const TrainConfig&, const EpochCallback&);

}  // namespace tiger::training
