#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gaitlab/checkpoint.hpp"
#include "gaitlab/eval.hpp"
#include "gaitlab/report.hpp"
#include "gaitlab/run_config.hpp"

namespace gaitlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Exit code for an exception escaping a subcommand.
int exit_code_for(const std::exception& e);

// ---- gait generation -----------------------------------------------------

struct GenGaitsOptions {
  std::string model = "default";
  std::filesystem::path out = "gaits.json";
  int budget = 2000;
  std::uint64_t seed = 1;
  double max_speed = 1.0;
  double step = 0.1;
  int workers = 1;
};

struct GenGaitsResult {
  GaitLibrary library;
  bool complete = true;
};

/// Optimizes every grid speed and saves the library (with a gap list when
/// some speeds had no feasible gait).
GenGaitsResult generate_library(const GenGaitsOptions& opt, std::ostream& log);

// ---- training ---------------------------------------------------------------

struct TrainResult {
  std::filesystem::path checkpoint;  // final (or last good) checkpoint
  std::vector<IterationLog> logs;
  bool diverged = false;
  bool interrupted = false;
};

Checkpoint make_checkpoint(const ActorCritic<float>& net, const RunConfig& cfg, const RunInputs& in, int iteration);

/// Full training run into cfg.out: config.json, train_log.csv,
/// reward_means.csv, periodic checkpoints and final.ckpt.
/// `stop` is polled between iterations.
TrainResult train_run(const RunConfig& cfg, std::ostream& log, const std::atomic<bool>* stop = nullptr,
                      int workers = 1);

// ---- evaluation -------------------------------------------------------------

/// Evaluation world described by a checkpoint's embedded metadata.
EvalSetup setup_from_checkpoint(const Checkpoint& ckpt);

struct EvalOptions {
  std::string suite = "all";  // velocity|push|cot|transfer|all
  std::uint64_t seed = 0;
  int samples = 300;
  int transfer_samples = 60;
  int workers = 1;
  std::string expected_config_hash;  // empty skips the check
};

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const EvalOptions& opt, std::ostream& log);

/// A few lines of the report for the terminal.
std::string summarize(const EvalReport& r);

/// gaitlab <subcommand> ...; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Set by SIGINT; training flushes a checkpoint and stops.
std::atomic<bool>& interrupt_flag();

}  // namespace gaitlab
