#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tiger/dsp/waveform.hpp"
#include "tiger/model/tiger_model.hpp"

namespace tiger::model {

/// Segment start positions for sliding-window inference. Segments advance
/// by round(segment * (1 - overlap)); a final segment is aligned to the end
/// of the signal when the stride does not land there exactly.
struct SegmentPlan {
  std::size_t segment = 0;
  std::size_t stride = 0;
  std::vector<std::size_t> starts;
};

SegmentPlan plan_segments(std::size_t length, std::size_t segment, double overlap);

/// Maps one segment of samples to per-source estimates of the same length.
using SegmentSeparator = std::function<std::vector<std::vector<double>>(std::span<const double>)>;

/// Runs `separate` on overlapping segments and stitches the results with
/// triangular crossfades normalised by the summed weights. Before
/// stitching, the sources of each segment are reordered to maximise the
/// normalised correlation with the previous segment over their overlap.
/// Inputs no longer than one segment are separated in a single call.
std::vector<std::vector<double>> infer_long(const SegmentSeparator& separate,
                                            std::span<const double> wave, std::size_t segment,
                                            double overlap = 0.5);

template <typename T>
std::vector<dsp::Waveform> infer_long(const TigerModel<T>& model, const dsp::Waveform& wave,
                                      double segment_seconds, double overlap = 0.5);

}  // namespace tiger::model
