#include "tiger/model/infer_long.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tiger/common/error.hpp"

namespace tiger::model {

SegmentPlan plan_segments(std::size_t length, std::size_t segment, double overlap) {
  if (segment == 0) throw InvalidArgument("infer_long: segment length must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw InvalidArgument("infer_long: overlap fraction must lie in [0, 1)");
  }
  SegmentPlan plan;
  plan.segment = std::min(segment, length);
  plan.stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(segment) * (1.0 - overlap))));
  if (length <= segment) {
    plan.starts = {0};
    return plan;
  }
  for (std::size_t s = 0; s + segment < length; s += plan.stride) plan.starts.push_back(s);
  if (plan.starts.back() + segment != length) plan.starts.push_back(length - segment);
  return plan;
}

namespace {

double overlap_score(const std::vector<std::vector<double>>& prev, std::size_t prev_offset,
                     const std::vector<std::vector<double>>& cur, std::size_t overlap,
                     const std::vector<std::size_t>& perm) {
  double score = 0.0;
  for (std::size_t c = 0; c < prev.size(); ++c) {
    const double* a = prev[c].data() + prev_offset;
    const double* b = cur[perm[c]].data();
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < overlap; ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    score += ab / std::sqrt(aa * bb + 1e-20);
  }
  return score;
}

}  // namespace

std::vector<std::vector<double>> infer_long(const SegmentSeparator& separate,
                                            std::span<const double> wave, std::size_t segment,
                                            double overlap) {
  const std::size_t length = wave.size();
  if (length == 0) throw InvalidArgument("infer_long: empty input");
  const SegmentPlan plan = plan_segments(length, segment, overlap);
  const std::size_t seg = plan.segment;

  std::vector<std::vector<double>> acc;
  std::vector<double> weight_sum(length, 0.0);
  std::vector<std::vector<double>> prev;
  std::size_t prev_start = 0;

  for (std::size_t s = 0; s < plan.starts.size(); ++s) {
    const std::size_t start = plan.starts[s];
    auto est = separate(wave.subspan(start, seg));
    if (est.empty()) throw InvalidArgument("infer_long: separator returned no sources");
    for (const auto& e : est) {
      if (e.size() != seg) throw InvalidArgument("infer_long: separator changed the segment length");
    }
    if (acc.empty()) acc.assign(est.size(), std::vector<double>(length, 0.0));
    if (est.size() != acc.size()) throw InvalidArgument("infer_long: source count changed");

    const std::size_t left = s > 0 ? prev_start + seg - start : 0;
    const std::size_t right =
        s + 1 < plan.starts.size() ? start + seg - plan.starts[s + 1] : 0;

    if (s > 0 && left > 0 && est.size() > 1) {
      std::vector<std::size_t> perm(est.size()), best;
      std::iota(perm.begin(), perm.end(), 0);
      double best_score = -INFINITY;
      do {
        const double score = overlap_score(prev, start - prev_start, est, left, perm);
        if (score > best_score) {
          best_score = score;
          best = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      std::vector<std::vector<double>> reordered(est.size());
      for (std::size_t c = 0; c < est.size(); ++c) reordered[c] = std::move(est[best[c]]);
      est = std::move(reordered);
    }

    for (std::size_t j = 0; j < seg; ++j) {
      double w = 1.0;
      if (j < left) w = std::min(w, (static_cast<double>(j) + 0.5) / static_cast<double>(left));
      if (j + right >= seg) {
        w = std::min(w, (static_cast<double>(seg - j) - 0.5) / static_cast<double>(right));
      }
      weight_sum[start + j] += w;
      for (std::size_t c = 0; c < est.size(); ++c) acc[c][start + j] += w * est[c][j];
    }
    prev = std::move(est);
    prev_start = start;
  }
  for (auto& channel : acc) {
    for (std::size_t i = 0; i < length; ++i) channel[i] /= weight_sum[i];
  }
  return acc;
}

template <typename T>
std::vector<dsp::Waveform> infer_long(const TigerModel<T>& model, const dsp::Waveform& wave,
                                      double segment_seconds, double overlap) {
  dsp::validate(wave);
  const auto segment =
      static_cast<std::size_t>(std::llround(segment_seconds * model.config().sample_rate));
  if (segment < model.config().stft.window_size) {
    throw InvalidArgument("infer_long: segment shorter than one STFT window");
  }
  if (std::abs(wave.sample_rate - model.config().sample_rate) > 1e-9) {
    throw InvalidArgument("infer_long: input sample rate does not match the model");
  }
  const SegmentSeparator fn = [&model](std::span<const double> samples) {
    std::vector<std::vector<double>> out;
    for (const auto& t : model.separate(samples)) out.emplace_back(t.data().begin(), t.data().end());
    return out;
  };
  std::vector<dsp::Waveform> result;
  for (auto& s : infer_long(fn, wave.samples, segment, overlap)) {
    result.push_back({std::move(s), wave.sample_rate});
  }
  return result;
}

template std::vector<dsp::Waveform> infer_long(const TigerModel<float>&, const dsp::Waveform&,
                                               double, double);
template std::vector<dsp::Waveform> infer_long(const TigerModel<double>&, const dsp::Waveform&,
                                               double, double);

}  // namespace tiger::model
