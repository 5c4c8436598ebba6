#include "tiger/mixgen/mixgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tiger/common/error.hpp"
#include "tiger/dsp/wav.hpp"

namespace tiger::mixgen {
namespace {

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

std::size_t to_samples(double seconds, double rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

void MixSpec::validate() const {
  if (!(speaker_sdr_min <= speaker_sdr_max) || !(noise_sdr_min <= noise_sdr_max)) {
    throw InvalidArgument("mix spec: SDR ranges must be ordered");
  }
  if (!(duration > 0)) throw InvalidArgument("mix spec: duration must be positive");
  if (overlap_ratio && !(*overlap_ratio >= 0.0 && *overlap_ratio <= 1.0)) {
    throw InvalidArgument("mix spec: overlap ratio must lie in [0, 1]");
  }
}

double energy_ratio_db(std::span<const double> a, std::span<const double> b) {
  return 10.0 * std::log10(energy(a) / energy(b));
}

double gain_for_sdr(std::span<const double> signal, std::span<const double> interferer,
                    double target_db) {
  const double es = energy(signal);
  const double ei = energy(interferer);
  if (es == 0.0 || ei == 0.0) throw InvalidArgument("gain_for_sdr: silent input");
  return std::sqrt(es / (ei * std::pow(10.0, target_db / 10.0)));
}

MixtureExample make_mixture(const std::vector<dsp::Waveform>& sources, const dsp::Waveform& noise,
                            const MixSpec& spec, Rng& rng) {
  spec.validate();
  if (sources.empty()) throw InvalidArgument("make_mixture: no sources");
  const double rate = sources[0].sample_rate;
  for (const auto& s : sources) {
    dsp::validate(s);
    if (s.sample_rate != rate) throw InvalidArgument("make_mixture: sample rates differ");
  }
  dsp::validate(noise);
  if (noise.sample_rate != rate) throw InvalidArgument("make_mixture: noise sample rate differs");
  const std::size_t total = to_samples(spec.duration, rate);
  if (noise.size() < total) throw InvalidArgument("make_mixture: noise shorter than the mixture");

  MixtureExample ex;
  auto& meta = ex.meta;
  meta.overlap_ratio = spec.overlap_ratio ? *spec.overlap_ratio : rng.uniform();

  // Layout relative to source 0, which starts at 0 before the global shift.
  const std::size_t l0 = sources[0].size();
  std::vector<std::size_t> rel{0};
  std::size_t span = l0;
  for (std::size_t i = 1; i < sources.size(); ++i) {
    const std::size_t li = sources[i].size();
    const auto overlap = static_cast<std::size_t>(
        std::llround(meta.overlap_ratio * static_cast<double>(std::min(l0, li))));
    rel.push_back(l0 - overlap);
    span = std::max(span, l0 - overlap + li);
  }
  if (span > total) {
    throw InvalidArgument("make_mixture: sources need " + std::to_string(span) +
                          " samples at overlap " + std::to_string(meta.overlap_ratio) +
                          " but the mixture has " + std::to_string(total));
  }
  const std::size_t shift = rng.index(total - span + 1);

  std::vector<std::vector<double>> placed(sources.size(), std::vector<double>(total, 0.0));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    meta.offsets.push_back(shift + rel[i]);
    std::copy(sources[i].samples.begin(), sources[i].samples.end(),
              placed[i].begin() + static_cast<std::ptrdiff_t>(meta.offsets[i]));
  }

  meta.gains.assign(sources.size(), 1.0);
  for (std::size_t i = 1; i < sources.size(); ++i) {
    const double target = rng.uniform(spec.speaker_sdr_min, spec.speaker_sdr_max);
    meta.speaker_sdr_target.push_back(target);
    meta.gains[i] = gain_for_sdr(placed[0], placed[i], target);
    for (auto& v : placed[i]) v *= meta.gains[i];
  }

  std::vector<double> speech(total, 0.0);
  for (const auto& p : placed) {
    for (std::size_t n = 0; n < total; ++n) speech[n] += p[n];
  }
  const std::size_t noise_start = rng.index(noise.size() - total + 1);
  std::vector<double> n_sig(noise.samples.begin() + static_cast<std::ptrdiff_t>(noise_start),
                            noise.samples.begin() + static_cast<std::ptrdiff_t>(noise_start + total));
  meta.noise_sdr_target = rng.uniform(spec.noise_sdr_min, spec.noise_sdr_max);
  meta.noise_gain = gain_for_sdr(speech, n_sig, meta.noise_sdr_target);
  for (auto& v : n_sig) v *= meta.noise_gain;

  auto sum_up = [&] {
    std::vector<double> mix(total, 0.0);
    for (const auto& p : placed) {
      for (std::size_t n = 0; n < total; ++n) mix[n] += p[n];
    }
    for (std::size_t n = 0; n < total; ++n) mix[n] += n_sig[n];
    return mix;
  };
  std::vector<double> mix = sum_up();
  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  if (peak > 1.0) {
    meta.rescale = 0.9 / peak;
    for (auto& p : placed) {
      for (auto& v : p) v *= meta.rescale;
    }
    for (auto& v : n_sig) v *= meta.rescale;
    mix = sum_up();
  }

  std::vector<double> speech_final(total, 0.0);
  for (const auto& p : placed) {
    for (std::size_t n = 0; n < total; ++n) speech_final[n] += p[n];
  }
  for (std::size_t i = 1; i < placed.size(); ++i) {
    meta.speaker_sdr_realized.push_back(energy_ratio_db(placed[0], placed[i]));
  }
  meta.noise_sdr_realized = energy_ratio_db(speech_final, n_sig);

  ex.mixture = {std::move(mix), rate};
  for (auto& p : placed) ex.references.push_back({std::move(p), rate});
  ex.noise = {std::move(n_sig), rate};
  return ex;
}

std::vector<dsp::Waveform> synth_sources(Rng& rng, std::size_t count, double duration,
                                         double sample_rate) {
  if (!(duration >= 0.05)) throw InvalidArgument("synth_sources: duration must be at least 0.05 s");
  if (!(sample_rate > 0)) throw InvalidArgument("synth_sources: sample rate must be positive");
  const std::size_t length = to_samples(duration, sample_rate);
  // Log-spaced disjoint bands between 150 Hz and min(3.6 kHz, 0.45 fs), with
  // a 10% guard on each side of every band.
  const double lo = 150.0;
  const double hi = std::min(3600.0, 0.45 * sample_rate);
  std::vector<dsp::Waveform> out;
  for (std::size_t s = 0; s < count; ++s) {
    const double b0 = lo * std::pow(hi / lo, static_cast<double>(s) / static_cast<double>(count));
    const double b1 =
        lo * std::pow(hi / lo, static_cast<double>(s + 1) / static_cast<double>(count));
    const double f_lo = b0 * 1.1;
    const double f_hi = b1 / 1.1;
    std::vector<double> x(length, 0.0);
    const std::size_t bursts = 3 + rng.index(6);
    for (std::size_t b = 0; b < bursts; ++b) {
      const double freq = f_lo * std::pow(f_hi / f_lo, rng.uniform());
      const double amp = rng.uniform(0.3, 1.0);
      const double mod_hz = rng.uniform(2.0, 8.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const auto burst_len = std::max<std::size_t>(
          16, static_cast<std::size_t>(rng.uniform(0.25, 0.6) * static_cast<double>(length)));
      const std::size_t start = rng.index(length - std::min(burst_len, length) + 1);
      const std::size_t end = std::min(length, start + burst_len);
      for (std::size_t n = start; n < end; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        const double u = static_cast<double>(n - start) / static_cast<double>(end - start);
        const double envelope = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u));
        const double am = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * mod_hz * t);
        x[n] += amp * envelope * am * std::sin(2.0 * std::numbers::pi * freq * t + phase);
      }
    }
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    const double target = rng.uniform(0.5, 0.9);
    if (peak > 0) {
      for (auto& v : x) v *= target / peak;
    }
    out.push_back({std::move(x), sample_rate});
  }
  return out;
}

dsp::Waveform synth_noise(Rng& rng, double duration, double sample_rate) {
  dsp::Waveform w{std::vector<double>(to_samples(duration, sample_rate)), sample_rate};
  for (auto& v : w.samples) v = 0.1 * rng.normal();
  return w;
}

MixtureExample synth_example(const DatasetSpec& spec, std::size_t index) {
  if (spec.speakers == 0) throw InvalidArgument("dataset: need at least one speaker");
  Rng rng(mix_seed(spec.seed, index));
  MixSpec mix = spec.mix;
  if (!mix.overlap_ratio) mix.overlap_ratio = rng.uniform();
  // Equal-length sources with overlap r span L (2 - r) samples.
  // One sample of slack absorbs rounding of the overlap length.
  const double source_seconds =
      (std::floor(mix.duration / (2.0 - *mix.overlap_ratio) * spec.sample_rate) - 1.0) /
      spec.sample_rate;
  const auto sources = synth_sources(rng, spec.speakers, source_seconds,
                                     spec.sample_rate);
  const auto noise = synth_noise(rng, mix.duration, spec.sample_rate);
  return make_mixture(sources, noise, mix, rng);
}

training::Example to_example(const MixtureExample& m, const std::string& id) {
  return {id, m.mixture, m.references, m.noise};
}

std::vector<training::ManifestEntry> write_dataset(const std::filesystem::path& dir,
                                                   const DatasetSpec& spec) {
  std::filesystem::create_directories(dir);
  std::vector<training::ManifestEntry> entries;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const MixtureExample ex = synth_example(spec, i);
    char name[32];
    std::snprintf(name, sizeof name, "ex%04zu", i);
    const std::filesystem::path sub = name;
    std::filesystem::create_directories(dir / sub);
    training::ManifestEntry e;
    e.id = name;
    e.mix = sub / "mix.wav";
    dsp::write_wav(dir / e.mix, ex.mixture);
    for (std::size_t s = 0; s < ex.references.size(); ++s) {
      e.refs.push_back(sub / ("s" + std::to_string(s + 1) + ".wav"));
      dsp::write_wav(dir / e.refs.back(), ex.references[s]);
    }
    e.noise = sub / "noise.wav";
    dsp::write_wav(dir / *e.noise, ex.noise);
    entries.push_back(std::move(e));
  }
  training::write_manifest(dir / "manifest.yaml", entries);
  return entries;
}

}  // namespace tiger::mixgen
