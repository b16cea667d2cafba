// madt: train, separate, evaluate, check and fixture subcommands.

#include "madtwinnet/checkpoint.hpp"
#include "madtwinnet/config.hpp"
#include "madtwinnet/errors.hpp"
#include "madtwinnet/eval.hpp"
#include "madtwinnet/pipeline.hpp"
#include "madtwinnet/selfcheck.hpp"
#include "madtwinnet/wav.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

namespace fs = std::filesystem;
using namespace madt;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

std::size_t worker_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MADT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v < 1) throw ConfigError("MADT_THREADS must be a positive integer");
      n = static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("MADT_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return n;
}

void print_loss(std::ostream& out, const LossBreakdown& l) {
  char line[512];
  std::snprintf(line, sizeof line,
                "L_D=%.6g L_M=%.6g L_TW=%.6g L_twin=%.6g diag_l1=%.6g dec_l2=%.6g total=%.6g\n",
                l.denoiser, l.masker, l.twin_kl, l.twin_reg, l.diag_l1, l.dec_l2, l.total);
  out << line;
}

struct TrainArgs {
  std::string config, data, out;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig::desk_preset() : load_config(a.config);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.seed) cfg.train.seed = *a.seed;
  cfg.validate();
  const MaskerConfig dims = cfg.masker_config();

  std::vector<TrainingBatch> parts;
  for (const auto& name : list_tracks(a.data)) {
    const TrackPair track = read_track_dir(fs::path(a.data) / name);
    if (track.sample_rate != cfg.stft.sample_rate) {
      throw DatasetLayoutError("track '" + name + "' has sample rate " +
                               std::to_string(track.sample_rate) + ", config expects " +
                               std::to_string(cfg.stft.sample_rate));
    }
    parts.push_back(make_track_windows(track, cfg.stft, dims));
  }
  TrainingBatch pool = concat_batches(parts);

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream(out / "config.cfg") << cfg.to_text();

  TrainingSession session(cfg, std::move(pool));
  const fs::path ckpt_path = out / "checkpoint.madt";
  if (cfg.train.epochs == 0) {
    save_checkpoint(ckpt_path, session.checkpoint());
    std::cout << "wrote initialized checkpoint " << ckpt_path.string() << "\n";
    return kOk;
  }

  std::ofstream log(out / "log.csv");
  log << kTrainingLogHeader << "\n";
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    session.run_epoch([&](std::size_t step, const StepReport& r) { log << format_log_row(step, r) << "\n"; });
    log.flush();
    save_checkpoint(ckpt_path, session.checkpoint());
    std::cout << "epoch " << epoch << " done, " << session.steps_taken() << " steps\n";
  }
  std::cout << "final ";
  print_loss(std::cout, session.evaluate_pool());
  return kOk;
}

int cmd_separate(const std::string& checkpoint, const std::string& input, const std::string& output,
                 std::optional<std::size_t> gla_iters) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const MonoAudio audio = read_wav(input);
  if (audio.sample_rate != ckpt.stft.sample_rate) {
    throw DatasetLayoutError("input sample rate " + std::to_string(audio.sample_rate) +
                             " differs from the model's " + std::to_string(ckpt.stft.sample_rate));
  }
  const std::size_t iters = gla_iters.value_or(RunConfig{}.griffin_lim_iterations);
  const auto voice = separate_voice(audio.samples, ckpt, iters);
  write_wav(output, voice, audio.sample_rate);
  return kOk;
}

int cmd_evaluate(const std::string& estimates, const std::string& references, const std::string& out) {
  const EvalScores scores = evaluate_tracks(estimates, references, worker_threads());
  std::ofstream file(out);
  if (!file) throw DatasetLayoutError("cannot write " + out);
  write_scores_csv(file, scores);
  write_scores_csv(std::cout, scores);
  std::cout << "note: time-invariant projection metrics, not comparable to BSS-eval v3 "
               "(512-tap) leaderboard numbers\n";
  return kOk;
}

int cmd_check(std::uint64_t seed) {
  const auto results = run_self_checks(seed);
  print_check_table(std::cout, results);
  for (const auto& r : results) {
    if (!r.passed) return kNumeric;
  }
  return kOk;
}

int cmd_fixture(const std::string& out, std::size_t tracks, double duration, std::uint64_t seed) {
  for (std::size_t i = 0; i < tracks; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "track_%02zu", i);
    write_track_dir(fs::path(out) / name, synth_fixture(seed + i, duration));
  }
  std::cout << "wrote " << tracks << " fixture tracks to " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MaD TwinNet singing-voice separation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train on a dataset of track directories");
  train_cmd->add_option("--config", train.config, "key = value config file (defaults: desk preset)");
  train_cmd->add_option("--data", train.data, "Dataset root with <track>/{mixture,vocals,accompaniment}.wav")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--epochs", train.epochs, "Override epochs (0 writes the initial checkpoint only)");
  train_cmd->add_option("--seed", train.seed, "Override seed");

  std::string checkpoint, input, output;
  std::optional<std::size_t> gla_iters;
  auto* sep_cmd = app.add_subcommand("separate", "Extract the singing voice from a mixture WAV");
  sep_cmd->add_option("--checkpoint", checkpoint)->required();
  sep_cmd->add_option("--input", input)->required();
  sep_cmd->add_option("--output", output)->required();
  sep_cmd->add_option("--gla-iters", gla_iters, "Griffin-Lim iterations (default 10)");

  std::string estimates, references, scores_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score estimated vocals against references");
  eval_cmd->add_option("--estimates", estimates)->required();
  eval_cmd->add_option("--references", references)->required();
  eval_cmd->add_option("--out", scores_out, "CSV path")->required();

  std::uint64_t check_seed = 0;
  auto* check_cmd = app.add_subcommand("check", "Run gradient, STFT and invariant checks");
  check_cmd->add_option("--seed", check_seed);

  std::string fixture_out;
  std::size_t fixture_tracks = 1;
  double fixture_duration = 4.0;
  std::uint64_t fixture_seed = 0;
  auto* fix_cmd = app.add_subcommand("fixture", "Write synthetic voice/accompaniment tracks");
  fix_cmd->add_option("--out", fixture_out)->required();
  fix_cmd->add_option("--tracks", fixture_tracks)->check(CLI::PositiveNumber);
  fix_cmd->add_option("--duration", fixture_duration, "Seconds per track")->check(CLI::PositiveNumber);
  fix_cmd->add_option("--seed", fixture_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*sep_cmd) return cmd_separate(checkpoint, input, output, gla_iters);
    if (*eval_cmd) return cmd_evaluate(estimates, references, scores_out);
    if (*check_cmd) return cmd_check(check_seed);
    if (*fix_cmd) return cmd_fixture(fixture_out, fixture_tracks, fixture_duration, fixture_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DatasetLayoutError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const WavError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const CorruptCheckpoint& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const UndefinedMetric& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
