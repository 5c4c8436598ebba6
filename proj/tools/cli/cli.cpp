#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "tiger/common/error.hpp"
#include "tiger/dsp/spectrogram_dump.hpp"
#include "tiger/dsp/stft.hpp"
#include "tiger/dsp/wav.hpp"
#include "tiger/metrics/metrics.hpp"
#include "tiger/mixgen/mixgen.hpp"
#include "tiger/model/config.hpp"
#include "tiger/model/infer_long.hpp"
#include "tiger/model/tiger_model.hpp"
#include "tiger/profiler/profiler.hpp"
#include "tiger/training/dataset.hpp"
#include "tiger/training/trainer.hpp"

namespace tiger::cli {

namespace fs = std::filesystem;
using Model = model::TigerModel<float>;

namespace {

struct ModelSource {
  std::string preset = "small";
  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint;
};

void add_config_options(CLI::App* cmd, ModelSource& src, bool allow_checkpoint) {
  auto* preset = cmd->add_option("--preset", src.preset, "Model preset name")
                     ->check(CLI::IsMember(model::preset_names()))
                     ->capture_default_str();
  auto* config = cmd->add_option("--config", src.config_path, "Model config file (YAML)")
                     ->check(CLI::ExistingFile);
  preset->excludes(config);
  cmd->add_option("--set", src.overrides, "Config override key=value (repeatable)")
      ->type_name("KEY=VALUE")
      ->allow_extra_args(false);
  if (allow_checkpoint) {
    auto* ckpt = cmd->add_option("--checkpoint", src.checkpoint, "Trained checkpoint")
                     ->check(CLI::ExistingFile);
    ckpt->excludes(preset)->excludes(config);
  }
}

model::TigerConfig resolve_config(const ModelSource& src) {
  auto cfg = src.config_path.empty() ? model::TigerConfig::from_preset(src.preset)
                                     : model::TigerConfig::load(src.config_path);
  for (const auto& kv : src.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

Model resolve_model(const ModelSource& src, std::uint64_t seed) {
  if (!src.checkpoint.empty()) {
    if (!src.overrides.empty()) throw InvalidArgument("--set cannot modify a checkpoint");
    return Model::load(src.checkpoint);
  }
  return Model::build(resolve_config(src), seed);
}

std::vector<std::vector<double>> separate_wave(const Model& m, const dsp::Waveform& wave,
                                               std::optional<double> segment, double overlap) {
  std::vector<dsp::Waveform> parts =
      segment ? model::infer_long(m, wave, *segment, overlap) : m.forward(wave);
  std::vector<std::vector<double>> out;
  out.reserve(parts.size());
  for (auto& p : parts) out.push_back(std::move(p.samples));
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---- separate ---------------------------------------------------------------

struct SeparateArgs {
  ModelSource model;
  std::string input;
  std::string out_dir = ".";
  std::optional<double> segment;
  double overlap = 0.5;
};

void register_separate(CLI::App& app, SeparateArgs& a) {
  auto* cmd = app.add_subcommand("separate", "Split a mixture wav into one wav per speaker");
  add_config_options(cmd, a.model, true);
  cmd->add_option("--in", a.input, "Mixture wav")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", a.out_dir, "Directory for <stem>_s<i>.wav")->capture_default_str();
  cmd->add_option("--segment", a.segment, "Segment length in seconds (enables long-form mode)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--overlap", a.overlap, "Segment overlap fraction")
      ->check(CLI::Range(0.0, 0.95))
      ->capture_default_str();
}

int do_separate(const SeparateArgs& a, std::uint64_t seed, std::ostream& out) {
  const Model m = resolve_model(a.model, seed);
  const auto wave = dsp::read_wav(a.input);
  const auto parts = separate_wave(m, wave, a.segment, a.overlap);
  ensure_dir(a.out_dir);
  const std::string stem = fs::path(a.input).stem().string();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const fs::path path = fs::path(a.out_dir) / (stem + "_s" + std::to_string(i + 1) + ".wav");
    dsp::write_wav(path, {parts[i], wave.sample_rate});
    out << path.string() << "\n";
  }
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  ModelSource model;
  std::string manifest;
  std::string valid_manifest;
  std::string output;
  std::string history;
  std::string loss = "neg_sisdr_pit";
  std::string optimizer = "adam";
  training::TrainConfig cfg;
  bool quiet = false;
};

void register_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train a model on a manifest and write a checkpoint");
  add_config_options(cmd, a.model, false);
  cmd->add_option("--manifest", a.manifest, "Training manifest")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--valid-manifest", a.valid_manifest,
                  "Validation manifest (defaults to the training manifest)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", a.output, "Checkpoint path")->required();
  cmd->add_option("--history", a.history, "History CSV (default: <out>.history.csv)");
  cmd->add_option("--loss", a.loss, "neg_sisdr_pit or dnr_mae")->capture_default_str();
  cmd->add_option("--optimizer", a.optimizer, "adam or adamw")->capture_default_str();
  cmd->add_option("--lr", a.cfg.lr, "Initial learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", a.cfg.weight_decay, "AdamW weight decay")
      ->capture_default_str();
  cmd->add_option("--max-epochs", a.cfg.max_epochs, "Epoch limit")->capture_default_str();
  cmd->add_option("--max-steps", a.cfg.max_steps, "Optimizer step limit (0 = none)")
      ->capture_default_str();
  cmd->add_option("--segment", a.cfg.segment_seconds, "Training crop in seconds")
      ->capture_default_str();
  cmd->add_option("--batch-size", a.cfg.batch_size, "Examples per step")->capture_default_str();
  cmd->add_option("--plateau-patience", a.cfg.plateau_patience,
                  "Epochs without improvement before halving the rate")
      ->capture_default_str();
  cmd->add_option("--early-stop-patience", a.cfg.early_stop_patience,
                  "Epochs without improvement before stopping")
      ->capture_default_str();
  cmd->add_flag("--quiet", a.quiet, "Suppress per-epoch lines");
}

int do_train(TrainArgs& a, std::uint64_t seed, std::ostream& out) {
  a.cfg.loss = training::parse_loss(a.loss);
  a.cfg.optimizer = training::parse_optimizer(a.optimizer);
  a.cfg.seed = seed;
  a.cfg.validate();
  Model m = Model::build(resolve_config(a.model), seed);
  const auto train = training::load_dataset(a.manifest);
  const auto valid =
      a.valid_manifest.empty() ? train : training::load_dataset(a.valid_manifest);
  auto on_epoch = [&](const training::EpochRecord& r) {
    if (a.quiet) return;
    out << "epoch " << r.epoch << " train " << r.train_loss << " valid " << r.valid_loss
        << " lr " << r.lr << std::endl;
  };
  const auto history = training::fit(m, train, valid, a.cfg, on_epoch);
  m.save(a.output);
  history.write_csv(a.history.empty() ? a.output + ".history.csv" : a.history);
  out << "stopped: " << history.stop_reason << " after " << history.steps
      << " steps; best epoch " << history.best_epoch << " valid " << history.best_valid_loss
      << "\n";
  return kExitOk;
}

// ---- mix --------------------------------------------------------------------

struct MixArgs {
  mixgen::DatasetSpec spec;
  std::string out_dir;
  std::optional<double> overlap;
};

void register_mix(CLI::App& app, MixArgs& a) {
  auto* cmd = app.add_subcommand("mix", "Generate a synthetic mixture dataset");
  auto& s = a.spec;
  cmd->add_option("--out-dir", a.out_dir, "Dataset directory")->required();
  cmd->add_option("--count", s.count, "Number of mixtures")->capture_default_str();
  cmd->add_option("--speakers", s.speakers, "Sources per mixture")->capture_default_str();
  cmd->add_option("--sample-rate", s.sample_rate, "Sample rate in Hz")->capture_default_str();
  cmd->add_option("--duration", s.mix.duration, "Mixture length in seconds")
      ->capture_default_str();
  cmd->add_option("--overlap-ratio", a.overlap, "Fixed overlap ratio (default: random)")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--speaker-sdr-min", s.mix.speaker_sdr_min, "dB")->capture_default_str();
  cmd->add_option("--speaker-sdr-max", s.mix.speaker_sdr_max, "dB")->capture_default_str();
  cmd->add_option("--noise-sdr-min", s.mix.noise_sdr_min, "dB")->capture_default_str();
  cmd->add_option("--noise-sdr-max", s.mix.noise_sdr_max, "dB")->capture_default_str();
}

int do_mix(MixArgs& a, std::uint64_t seed, std::ostream& out) {
  a.spec.seed = seed;
  a.spec.mix.overlap_ratio = a.overlap;
  a.spec.mix.validate();
  const auto entries = mixgen::write_dataset(a.out_dir, a.spec);
  out << "wrote " << entries.size() << " mixtures to "
      << (fs::path(a.out_dir) / "manifest.yaml").string() << "\n";
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  ModelSource model;
  std::string manifest;
  std::string csv;
  std::optional<double> segment;
  double overlap = 0.5;
};

void register_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Score a model on a manifest (SDR, SI-SDR and gains)");
  add_config_options(cmd, a.model, true);
  cmd->add_option("--manifest", a.manifest, "Evaluation manifest")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--csv", a.csv, "Per-utterance CSV path (default: stdout)");
  cmd->add_option("--segment", a.segment, "Segment length in seconds (enables long-form mode)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--overlap", a.overlap, "Segment overlap fraction")
      ->check(CLI::Range(0.0, 0.95))
      ->capture_default_str();
}

int do_eval(const EvalArgs& a, std::uint64_t seed, std::ostream& out) {
  const Model m = resolve_model(a.model, seed);
  const auto data = training::load_dataset(a.manifest);
  metrics::MetricReport report;
  for (const auto& ex : data) {
    const auto est = separate_wave(m, ex.mixture, a.segment, a.overlap);
    std::vector<std::vector<double>> refs;
    for (const auto& r : ex.references) refs.push_back(r.samples);
    if (est.size() != refs.size()) {
      throw InvalidArgument("eval: model produces " + std::to_string(est.size()) +
                            " sources but " + ex.id + " has " + std::to_string(refs.size()));
    }
    const auto perm = metrics::best_permutation(est, refs);
    std::vector<std::vector<double>> aligned;
    for (std::size_t r = 0; r < refs.size(); ++r) aligned.push_back(est[perm[r]]);
    report.add_utterance(ex.id, aligned, ex.mixture.samples, refs);
  }
  if (a.csv.empty()) {
    out << report.to_csv();
  } else {
    report.write_csv(a.csv);
  }
  out << report.summary_json();
  return kExitOk;
}

// ---- profile ----------------------------------------------------------------

struct ProfileArgs {
  ModelSource model;
  double seconds = 1.0;
  bool per_layer = false;
  std::string csv;
  std::size_t runs = 0;
  std::size_t warmup = 10;
  bool backward = false;
  bool working_set = false;
};

void register_profile(CLI::App& app, ProfileArgs& a) {
  auto* cmd = app.add_subcommand("profile", "Report parameters, MACs and optional timings");
  add_config_options(cmd, a.model, true);
  cmd->add_option("--seconds", a.seconds, "Audio length for MACs and timing")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--per-layer", a.per_layer, "Print one row per layer");
  cmd->add_option("--csv", a.csv, "Write per-layer rows as CSV");
  cmd->add_option("--runs", a.runs, "Timed runs (0 skips timing)")->capture_default_str();
  cmd->add_option("--warmup", a.warmup, "Untimed warm-up runs")->capture_default_str();
  cmd->add_flag("--backward", a.backward, "Also time forward plus backward");
  cmd->add_flag("--working-set", a.working_set, "Estimate training working set");
}

int do_profile(const ProfileArgs& a, std::uint64_t seed, std::ostream& out) {
  const bool need_model = a.runs > 0 || a.working_set || !a.model.checkpoint.empty();
  std::optional<Model> m;
  if (need_model) m.emplace(resolve_model(a.model, seed));
  const auto cfg = m ? m->config() : resolve_config(a.model);
  auto report = profiler::count_macs(cfg, a.seconds);
  if (a.runs > 0) {
    report.forward = profiler::benchmark(*m, a.runs, profiler::BenchMode::Forward, a.warmup,
                                         a.seconds);
    if (a.backward) {
      report.forward_backward = profiler::benchmark(
          *m, a.runs, profiler::BenchMode::ForwardBackward, a.warmup, a.seconds);
    }
  }
  if (a.working_set) report.working_set_bytes = profiler::working_set_bytes(*m, a.seconds);
  out << report.to_text(a.per_layer);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv, std::ios::binary);
    if (!f) throw IoError("cannot write " + a.csv);
    f << report.to_csv();
  }
  return kExitOk;
}

// ---- spectrogram ------------------------------------------------------------

struct SpectrogramArgs {
  std::string input;
  std::string csv;
  std::string pgm;
  dsp::StftConfig stft;
  double range_db = 80.0;
};

void register_spectrogram(CLI::App& app, SpectrogramArgs& a) {
  auto* cmd = app.add_subcommand("spectrogram", "Dump the STFT magnitude of a wav");
  cmd->add_option("--in", a.input, "Input wav")->required()->check(CLI::ExistingFile);
  cmd->add_option("--csv", a.csv, "Magnitude CSV (frames x bins)");
  cmd->add_option("--pgm", a.pgm, "Log-magnitude PGM image");
  cmd->add_option("--window", a.stft.window_size, "Window length in samples")
      ->capture_default_str();
  cmd->add_option("--hop", a.stft.hop, "Hop in samples")->capture_default_str();
  cmd->add_option("--range-db", a.range_db, "PGM dynamic range")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

int do_spectrogram(const SpectrogramArgs& a, std::ostream& out) {
  if (a.csv.empty() && a.pgm.empty()) throw InvalidArgument("spectrogram: give --csv or --pgm");
  a.stft.validate();
  const auto wave = dsp::read_wav(a.input);
  const auto spec = dsp::stft(wave, a.stft);
  if (!a.csv.empty()) dsp::write_magnitude_csv(a.csv, spec);
  if (!a.pgm.empty()) dsp::write_log_magnitude_pgm(a.pgm, spec, a.range_db);
  out << spec.bins << " bins x " << spec.frames << " frames\n";
  return kExitOk;
}

}  // namespace

unsigned thread_limit() {
  const char* env = std::getenv("TIGER_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  unsigned value = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc() || ptr != end || value == 0) {
    throw InvalidArgument(std::string("TIGER_THREADS must be a positive integer, got '") + env +
                          "'");
  }
  return value;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-frequency speech separation toolkit", "tiger"};
  app.require_subcommand(1, 1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();

  SeparateArgs separate;
  TrainArgs train;
  MixArgs mix;
  EvalArgs eval;
  ProfileArgs profile;
  SpectrogramArgs spectrogram;
  register_separate(app, separate);
  register_train(app, train);
  register_mix(app, mix);
  register_eval(app, eval);
  register_profile(app, profile);
  register_spectrogram(app, spectrogram);
  // --seed is accepted before or after the subcommand name.
  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    thread_limit();
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "separate") return do_separate(separate, seed, out);
    if (name == "train") return do_train(train, seed, out);
    if (name == "mix") return do_mix(mix, seed, out);
    if (name == "eval") return do_eval(eval, seed, out);
    if (name == "profile") return do_profile(profile, seed, out);
    return do_spectrogram(spectrogram, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace tiger::cli
