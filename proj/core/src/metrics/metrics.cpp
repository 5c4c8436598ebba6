#include "tiger/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tiger/common/error.hpp"

namespace tiger::metrics {
namespace {

void check_pair(std::span<const double> est, std::span<const double> ref, const char* what) {
  if (est.size() != ref.size()) {
    throw InvalidArgument(std::string(what) + ": length mismatch (" + std::to_string(est.size()) +
                          " vs " + std::to_string(ref.size()) + ")");
  }
  if (ref.empty()) throw InvalidArgument(std::string(what) + ": empty signals");
  bool silent = true;
  for (double v : ref) {
    if (v != 0.0) {
      silent = false;
      break;
    }
  }
  if (silent) throw InvalidArgument(std::string(what) + ": reference is all zeros");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double si_sdr(std::span<const double> est, std::span<const double> ref) {
  check_pair(est, ref, "si_sdr");
  const double rr = dot(ref, ref);
  const double alpha = dot(est, ref) / (rr + kEpsilon);
  double target = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = alpha * ref[i];
    const double e = t - est[i];
    target += t * t;
    noise += e * e;
  }
  return 10.0 * std::log10((target + kEpsilon) / (noise + kEpsilon));
}

double sdr(std::span<const double> est, std::span<const double> ref) {
  check_pair(est, ref, "sdr");
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double e = ref[i] - est[i];
    signal += ref[i] * ref[i];
    noise += e * e;
  }
  return 10.0 * std::log10((signal + kEpsilon) / (noise + kEpsilon));
}

double improvement(Metric metric, std::span<const double> est, std::span<const double> mixture,
                   std::span<const double> ref) {
  const auto fn = metric == Metric::Sdr ? &sdr : &si_sdr;
  return fn(est, ref) - fn(mixture, ref);
}

std::vector<std::size_t> best_permutation(const std::vector<std::vector<double>>& estimates,
                                          const std::vector<std::vector<double>>& references) {
  if (estimates.size() != references.size() || estimates.empty()) {
    throw InvalidArgument("best_permutation: need one estimate per reference");
  }
  const std::size_t c = references.size();
  std::vector<std::vector<double>> score(c, std::vector<double>(c));
  for (std::size_t r = 0; r < c; ++r) {
    for (std::size_t e = 0; e < c; ++e) score[r][e] = si_sdr(estimates[e], references[r]);
  }
  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_total = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < c; ++r) total += score[r][perm[r]];
    if (total > best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void MetricReport::add_utterance(const std::string& id,
                                 const std::vector<std::vector<double>>& estimates,
                                 std::span<const double> mixture,
                                 const std::vector<std::vector<double>>& references) {
  if (estimates.size() != references.size()) {
    throw InvalidArgument("metrics: " + std::to_string(estimates.size()) + " estimates for " +
                          std::to_string(references.size()) + " references");
  }
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    UtteranceScore row;
    row.utterance_id = id;
    row.speaker = s;
    row.sdr = sdr(estimates[s], references[s]);
    row.si_sdr = si_sdr(estimates[s], references[s]);
    row.sdri = row.sdr - sdr(mixture, references[s]);
    row.si_sdri = row.si_sdr - si_sdr(mixture, references[s]);
    rows.push_back(std::move(row));
  }
}

namespace {

// Mean over utterances of the mean over that utterance's speakers, keeping
// first-appearance order so the result does not depend on id sorting.
template <typename F>
double nested_mean(const std::vector<UtteranceScore>& rows, F field) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto [it, inserted] = acc.try_emplace(r.utterance_id, 0.0, 0);
    if (inserted) order.push_back(r.utterance_id);
    it->second.first += field(r);
    it->second.second += 1;
  }
  if (order.empty()) return 0.0;
  double total = 0.0;
  for (const auto& id : order) total += acc[id].first / static_cast<double>(acc[id].second);
  return total / static_cast<double>(order.size());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::size_t MetricReport::utterances() const {
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (std::find(ids.begin(), ids.end(), r.utterance_id) == ids.end()) ids.push_back(r.utterance_id);
  }
  return ids.size();
}

double MetricReport::mean_sdr() const { return nested_mean(rows, [](auto& r) { return r.sdr; }); }
double MetricReport::mean_si_sdr() const {
  return nested_mean(rows, [](auto& r) { return r.si_sdr; });
}
double MetricReport::mean_sdri() const { return nested_mean(rows, [](auto& r) { return r.sdri; }); }
double MetricReport::mean_si_sdri() const {
  return nested_mean(rows, [](auto& r) { return r.si_sdri; });
}

std::string MetricReport::to_csv() const {
  std::string out = "utterance_id,speaker,sdr,si_sdr,sdri,si_sdri\n";
  for (const auto& r : rows) {
    out += r.utterance_id + "," + std::to_string(r.speaker) + "," + fmt(r.sdr) + "," +
           fmt(r.si_sdr) + "," + fmt(r.sdri) + "," + fmt(r.si_sdri) + "\n";
  }
  return out;
}

std::string MetricReport::summary_json() const {
  nlohmann::ordered_json j;
  j["utterances"] = utterances();
  j["sdr"] = mean_sdr();
  j["si_sdr"] = mean_si_sdr();
  j["sdri"] = mean_sdri();
  j["si_sdri"] = mean_si_sdri();
  return j.dump(2) + "\n";
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("metrics: cannot write '" + path.string() + "'");
  out << to_csv();
}

}  // namespace tiger::metrics
