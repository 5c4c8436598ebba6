#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tiger::metrics {

inline constexpr double kEpsilon = 1e-8;

/// Scale-invariant SDR in dB:
/// a = <est, ref> / (<ref, ref> + eps),
/// 10 log10((|a ref|^2 + eps) / (|a ref - est|^2 + eps)).
double si_sdr(std::span<const double> est, std::span<const double> ref);

/// Plain energy-ratio SDR in dB: 10 log10((|ref|^2 + eps) / (|ref - est|^2 + eps)).
double sdr(std::span<const double> est, std::span<const double> ref);

enum class Metric { Sdr, SiSdr };

/// metric(est, ref) - metric(mixture, ref).
double improvement(Metric metric, std::span<const double> est, std::span<const double> mixture,
                   std::span<const double> ref);

/// Estimate index assigned to each reference, maximising the summed SI-SDR
/// over all permutations.
std::vector<std::size_t> best_permutation(const std::vector<std::vector<double>>& estimates,
                                          const std::vector<std::vector<double>>& references);

struct UtteranceScore {
  std::string utterance_id;
  std::size_t speaker = 0;
  double sdr = 0.0;
  double si_sdr = 0.0;
  double sdri = 0.0;
  double si_sdri = 0.0;
};

struct MetricReport {
  std::vector<UtteranceScore> rows;

  /// Scores every estimate against its reference (estimates are expected to
  /// be already aligned to the references).
  void add_utterance(const std::string& id, const std::vector<std::vector<double>>& estimates,
                     std::span<const double> mixture,
                     const std::vector<std::vector<double>>& references);

  std::size_t utterances() const;
  /// Mean over utterances of the per-utterance speaker mean.
  double mean_sdr() const;
  double mean_si_sdr() const;
  double mean_sdri() const;
  double mean_si_sdri() const;

  /// utterance_id,speaker,sdr,si_sdr,sdri,si_sdri
  std::string to_csv() const;
  /// JSON summary with means and the utterance count.
  std::string summary_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace tiger::metrics
