#include "gaitlab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "gaitlab/errors.hpp"
#include "gaitlab/gait_optimizer.hpp"
#include "gaitlab/hash.hpp"
#include "gaitlab/io.hpp"
#include "gaitlab/parallel.hpp"
#include "gaitlab/trainer.hpp"
#include "gaitlab/vec_env.hpp"

namespace gaitlab {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kManifestSchemaVersion = 1;

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const IncompatibleModelError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
    return kExitConfig;
  return kExitRuntime;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Records what produced the files in a directory.
void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_hash,
                    std::uint64_t seed, const std::vector<std::string>& files) {
  json m = {{"manifest_schema", kManifestSchemaVersion},
            {"command", command},
            {"config_hash", config_hash},
            {"seed", seed},
            {"schemas",
             {{"gait", kGaitSchemaVersion},
              {"checkpoint", kCheckpointSchemaVersion},
              {"report", kReportSchemaVersion},
              {"run", kRunConfigSchemaVersion},
              {"observation", kObservationSchemaVersion}}},
            {"files", files}};
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

// ---- gait generation -----------------------------------------------------

GenGaitsResult generate_library(const GenGaitsOptions& opt, std::ostream& log) {
  if (opt.budget < 1) throw ConfigError("budget must be >= 1");
  if (!(opt.step > 0.0) || !(opt.max_speed >= 0.0)) throw ConfigError("grid step must be positive");
  const RobotModel model = load_model_spec(opt.model);
  const int n = static_cast<int>(std::floor(opt.max_speed / opt.step + 1e-9)) + 1;

  struct Slot {
    ReferenceGait gait;
    bool feasible = false;
    std::string error;
  };
  std::vector<Slot> slots(n);
  parallel_for(n, opt.workers, [&](int i) {
    const double v = std::round(i * opt.step * 1e9) / 1e9;
    try {
      slots[i].gait = optimize_gait(model, v, opt.seed, opt.budget);
      slots[i].feasible = true;
    } catch (const InfeasibleGaitError& e) {
      slots[i].gait = e.best();
      slots[i].error = e.what();
    }
  });

  GenGaitsResult out;
  out.library.model_hash = model.hash;
  for (const auto& j : model.joints) out.library.joint_names.push_back(j.name);
  for (int i = 0; i < n; ++i) {
    const Slot& s = slots[i];
    const GaitDiagnostics& d = s.gait.diagnostics;
    log << "v=" << fmt("%.2f", s.gait.command) << " objective=" << fmt("%.4f", d.objective)
        << " feasible=" << (s.feasible ? "yes" : "no") << " speed=" << fmt("%.4f", d.mean_speed)
        << " period=" << fmt("%.3f", s.gait.period) << " cot=" << fmt("%.3f", d.work_per_distance)
        << " residual=" << fmt("%.2e", periodicity_residual(s.gait)) << '\n';
    if (s.feasible) {
      out.library.gaits.push_back(s.gait);
    } else {
      out.library.gaps.push_back(s.gait.command);
      out.complete = false;
    }
  }
  save_library(out.library, opt.out);
  const std::string hash = content_hash(read_file(opt.out));
  log << "wrote " << opt.out.string() << " (" << out.library.gaits.size() << " gaits, " << out.library.gaps.size()
      << " gaps, hash " << hash << ")\n";
  return out;
}

// ---- training ---------------------------------------------------------------

Checkpoint make_checkpoint(const ActorCritic<float>& net, const RunConfig& cfg, const RunInputs& in, int iteration) {
  Checkpoint c;
  c.params = net.params();
  c.meta = {{"config", cfg.to_json()},
            {"config_hash", cfg.hash()},
            {"seed", cfg.seed},
            {"iteration", iteration},
            {"preset", cfg.preset},
            {"network", net.shape().to_json()},
            {"rewards", in.rewards.to_json()},
            {"episode", cfg.episode.to_json()},
            {"model", in.model->to_json()},
            {"model_hash", in.model->hash},
            {"observation_schema", kObservationSchemaVersion}};
  c.meta["library"] = in.library ? library_to_json(*in.library) : json(nullptr);
  return c;
}

TrainResult train_run(const RunConfig& cfg, std::ostream& log, const std::atomic<bool>* stop, int workers) {
  const RunInputs in = resolve_inputs(cfg);  // configuration errors surface before any compute
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  json resolved = cfg.to_json();
  resolved["config_hash"] = cfg.hash();
  write_file_atomic(dir / "config.json", resolved.dump(2) + "\n");

  EpisodeConfig episode = cfg.episode;
  if (episode.seed == 0) episode.seed = cfg.seed;
  BipedVecEnv envs(cfg.ppo.agents, in.model, in.library, in.rewards, episode, workers);
  PpoTrainer trainer(envs, cfg.ppo, cfg.network, cfg.seed);

  std::ofstream train_csv(dir / "train_log.csv", std::ios::trunc);
  std::ofstream means_csv(dir / "reward_means.csv", std::ios::trunc);
  if (!train_csv || !means_csv) throw IoError("cannot write logs in '" + dir.string() + "'");
  train_csv << train_log_header();
  means_csv << reward_means_header(envs.term_names());

  TrainResult result;
  std::vector<std::string> files{"config.json", "train_log.csv", "reward_means.csv"};
  auto save = [&](const ActorCritic<float>& net, int iteration, const std::string& name) {
    save_checkpoint(make_checkpoint(net, cfg, in, iteration), dir / name);
    files.push_back(name);
    return dir / name;
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    IterationLog l;
    try {
      l = trainer.iterate();
    } catch (const TrainingDiverged& e) {
      ActorCritic<float> good = trainer.policy();
      good.params() = e.last_good();
      result.checkpoint = save(good, e.iteration(), "last_good.ckpt");
      result.diverged = true;
      log << "training diverged at iteration " << e.iteration() << ": " << e.what() << "; saved "
          << result.checkpoint.string() << '\n';
      break;
    }
    train_csv << train_log_row(l) << std::flush;
    means_csv << reward_means_row(l) << std::flush;
    result.logs.push_back(l);
    if (l.iteration % 10 == 0 || l.iteration == 1 || l.iteration == cfg.iterations)
      log << "iter " << l.iteration << " len " << fmt("%.2f", l.mean_episode_length) << " fall "
          << fmt("%.2f", l.fall_rate) << " reward " << fmt("%.3f", l.mean_step_reward) << " kl "
          << fmt("%.4f", l.kl) << " lr " << fmt("%.1e", l.learning_rate) << '\n'
          << std::flush;
    if (l.iteration % cfg.checkpoint_every == 0 && l.iteration != cfg.iterations) {
      char name[40];
      std::snprintf(name, sizeof name, "ckpt_%06d.ckpt", l.iteration);
      save(trainer.policy(), l.iteration, name);
    }
    if (stop && stop->load()) {
      result.interrupted = true;
      break;
    }
  }
  if (!result.diverged) result.checkpoint = save(trainer.policy(), trainer.iteration(), "final.ckpt");
  write_manifest(dir, "train", cfg.hash(), cfg.seed, files);
  return result;
}

// ---- evaluation -------------------------------------------------------------

EvalSetup setup_from_checkpoint(const Checkpoint& ckpt) {
  try {
    const json& m = ckpt.meta;
    EvalSetup s;
    auto model = std::make_shared<RobotModel>(build_model(m.at("model")));
    if (model->hash != m.at("model_hash").get<std::string>())
      throw IncompatibleModelError("embedded robot model does not match its recorded hash");
    if (!m.at("library").is_null()) {
      auto lib = std::make_shared<GaitLibrary>(library_from_json(m.at("library")));
      if (lib->model_hash != model->hash) throw IncompatibleModelError("embedded gait library was built for another model");
      s.library = std::move(lib);
    }
    s.model = std::move(model);
    s.rewards = RewardConfig::from_json(m.at("rewards"), preset(m.at("preset").get<std::string>()));
    s.episode = evaluation_episode(EpisodeConfig::from_json(m.at("episode"), EpisodeConfig{}));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint metadata", e.what());
  }
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const EvalOptions& opt, std::ostream& log) {
  static const std::vector<std::string> suites{"velocity", "push", "cot", "transfer", "all"};
  if (std::find(suites.begin(), suites.end(), opt.suite) == suites.end())
    throw ConfigError("unknown suite '" + opt.suite + "' (velocity, push, cot, transfer, all)");
  if (opt.samples < 1 || opt.transfer_samples < 1) throw ConfigError("sample counts must be >= 1");
  const EvalSetup setup = setup_from_checkpoint(ckpt);
  const Policy policy(ckpt.policy());

  EvalReport r;
  r.checkpoint_hash = ckpt.hash;
  r.config_hash = ckpt.meta.value("config_hash", std::string());
  r.model_hash = setup.model->hash;
  r.preset = setup.rewards.preset;
  r.seed = opt.seed;
  if (!opt.expected_config_hash.empty() && opt.expected_config_hash != r.config_hash) {
    const std::string w = "config hash mismatch: checkpoint " + r.config_hash + ", config " + opt.expected_config_hash;
    log << "warning: " << w << '\n';
    r.warnings.push_back(w);
  }
  const bool all = opt.suite == "all";
  if (all || opt.suite == "velocity") {
    log << "velocity step...\n";
    r.velocity = velocity_step_test(policy, setup, opt.seed);
  }
  if (all || opt.suite == "push") {
    for (PushRegime g : kAllRegimes) {
      log << "push recovery (" << to_string(g) << ", " << opt.samples << " trials)...\n";
      r.push.push_back(push_recovery(policy, setup, g, opt.samples, opt.seed, r.push_grid, 1.0, opt.workers));
    }
  }
  if (all || opt.suite == "cot") {
    log << "cost of transport...\n";
    try {
      r.cot = cost_of_transport(policy, setup, opt.seed);
    } catch (const CotIncomplete& e) {
      r.cot = e.partial();
      r.cot_failure = e.what();
    }
  }
  if (all || opt.suite == "transfer") {
    log << "transfer check...\n";
    TransferConfig tc;
    tc.push_samples = opt.transfer_samples;
    tc.grid = r.push_grid;
    r.transfer = transfer_check(policy, setup, default_perturbations(), opt.seed, tc, opt.workers);
  }
  return r;
}

std::string summarize(const EvalReport& r) {
  std::ostringstream os;
  os << "preset " << r.preset << " checkpoint " << r.checkpoint_hash << " seed " << r.seed << '\n';
  if (r.velocity) {
    const auto& v = *r.velocity;
    os << "velocity: steady " << fmt("%.3f", v.steady_mean) << " +/- " << fmt("%.3f", v.steady_deviation)
       << " m/s, rise " << fmt("%.2f", v.rise_time) << " s, zero-command mean " << fmt("%.3f", v.zero_mean);
    if (v.fell) os << ", FELL at " << fmt("%.2f", v.fall_time) << " s";
    if (v.tracking_failure) os << ", tracking failure";
    os << '\n';
  }
  for (const auto& p : r.push)
    os << "push " << to_string(p.regime) << ": " << fmt("%.3f", p.rate) << " of " << p.samples << '\n';
  if (r.cot) {
    os << "cost of transport: C_et " << fmt("%.3f", r.cot->c_et) << " C_mt " << fmt("%.3f", r.cot->c_mt)
       << " (human " << kHumanCet << " / " << kHumanCmt << ")";
    if (!r.cot_failure.empty()) os << " INCOMPLETE: " << r.cot_failure;
    os << '\n';
  }
  for (const auto& row : r.transfer) {
    os << "transfer " << row.perturbation.name << ": steady " << fmt("%.3f", row.velocity.steady_mean);
    for (const auto& p : row.push) os << ' ' << to_string(p.regime) << ' ' << fmt("%.2f", p.rate);
    if (row.cot) os << " C_et " << fmt("%.3f", row.cot->c_et);
    os << '\n';
  }
  return os.str();
}

// ---- command line -------------------------------------------------------------

namespace {

int workers_or_default(int w) { return w > 0 ? w : default_workers(); }

std::vector<std::string> report_files(const EvalReport& r) {
  std::vector<std::string> f{"report.json"};
  if (r.velocity) f.push_back("velocity.csv");
  if (!r.push.empty()) f.push_back("recovery.csv");
  if (!r.transfer.empty()) f.push_back("transfer.csv");
  return f;
}

std::vector<std::string> unique_labels(const std::vector<EvalReport>& reports) {
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& r : reports) {
    const int k = seen[r.preset]++;
    labels.push_back(k == 0 ? r.preset : r.preset + "_" + std::to_string(k + 1));
  }
  // Earlier duplicates get their suffix too.
  for (size_t i = 0; i < labels.size(); ++i)
    if (seen[reports[i].preset] > 1 && labels[i] == reports[i].preset) labels[i] += "_1";
  return labels;
}

void write_comparison(std::vector<EvalReport> reports, const fs::path& dir, std::uint64_t seed,
                      const std::string& command) {
  const auto labels = unique_labels(reports);
  std::vector<std::string> files{"recovery.csv", "comparison.csv"};
  for (size_t i = 0; i < reports.size(); ++i) reports[i].preset = labels[i];
  fs::create_directories(dir);
  write_file_atomic(dir / "recovery.csv", recovery_csv(reports));
  write_file_atomic(dir / "comparison.csv", comparison_csv(reports));
  std::string hashes;
  for (const auto& r : reports) {
    hashes += r.config_hash;
    if (r.velocity) {
      const std::string name = "velocity_" + r.preset + ".csv";
      write_file_atomic(dir / name, velocity_csv(*r.velocity));
      files.push_back(name);
    }
  }
  write_manifest(dir, command, content_hash(hashes), seed, files);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gaitlab: reference gaits, imitation-weighted PPO and locomotion benchmarks for a planar biped"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gaitlab 1.0");

  GenGaitsOptions gen;
  int gen_workers = 0;
  auto* gen_cmd = app.add_subcommand("gen-gaits", "Optimize the reference-gait library over the speed grid");
  gen_cmd->add_option("--model", gen.model, "Model file or 'default'");
  gen_cmd->add_option("--out", gen.out, "Library output file");
  gen_cmd->add_option("--budget", gen.budget, "Rollout evaluations per grid speed");
  gen_cmd->add_option("--seed", gen.seed, "Search seed");
  gen_cmd->add_option("--max-speed", gen.max_speed, "Largest grid speed (m/s)");
  gen_cmd->add_option("--step", gen.step, "Grid spacing (m/s)");
  gen_cmd->add_option("--workers", gen_workers, "Worker threads (default: GAITLAB_WORKERS or all cores)");

  std::string train_config, t_preset, t_model, t_library, t_out;
  int t_agents = 0, t_iterations = 0, t_every = 0, t_steps = 0, t_workers = 0;
  std::uint64_t t_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a policy with PPO");
  train_cmd->add_option("--config", train_config, "Run config file (JSON)");
  auto* o_preset = train_cmd->add_option("--preset", t_preset, "Reward preset: gait1, gait2 or gait3");
  auto* o_model = train_cmd->add_option("--model", t_model, "Model file or 'default'");
  auto* o_library = train_cmd->add_option("--library", t_library, "Gait library file");
  auto* o_agents = train_cmd->add_option("--agents", t_agents, "Parallel environments");
  auto* o_iters = train_cmd->add_option("--iterations", t_iterations, "PPO iterations");
  auto* o_seed = train_cmd->add_option("--seed", t_seed, "Run seed");
  auto* o_out = train_cmd->add_option("--out", t_out, "Output directory");
  auto* o_every = train_cmd->add_option("--checkpoint-every", t_every, "Checkpoint interval (iterations)");
  auto* o_steps = train_cmd->add_option("--steps", t_steps, "Control steps per agent per iteration");
  train_cmd->add_option("--workers", t_workers, "Worker threads");

  std::string e_checkpoint, e_config;
  std::vector<std::string> e_compare;
  EvalOptions eopt;
  std::string e_out = "eval";
  int e_workers = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Run the benchmark suites on a checkpoint");
  auto* o_ckpt = eval_cmd->add_option("--checkpoint", e_checkpoint, "Checkpoint file");
  auto* o_cmp = eval_cmd->add_option("--compare", e_compare, "Checkpoints to compare side by side");
  o_ckpt->excludes(o_cmp);
  eval_cmd->add_option("--suite", eopt.suite, "velocity, push, cot, transfer or all");
  eval_cmd->add_option("--seed", eopt.seed, "Evaluation seed");
  eval_cmd->add_option("--samples", eopt.samples, "Push trials per regime");
  eval_cmd->add_option("--transfer-samples", eopt.transfer_samples, "Push trials per regime per perturbation");
  eval_cmd->add_option("--out", e_out, "Output directory");
  eval_cmd->add_option("--config", e_config, "Run config expected to match the checkpoint");
  eval_cmd->add_option("--workers", e_workers, "Worker threads");

  std::vector<std::string> r_reports, r_runs;
  std::string r_out = "report";
  auto* report_cmd = app.add_subcommand("report", "Merge reports and training runs into plot-ready CSV files");
  report_cmd->add_option("--reports", r_reports, "report.json files");
  report_cmd->add_option("--runs", r_runs, "Training output directories");
  report_cmd->add_option("--out", r_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen_cmd) {
      gen.workers = workers_or_default(gen_workers);
      const GenGaitsResult r = generate_library(gen, out);
      if (!r.complete) {
        err << "error: no feasible gait at " << r.library.gaps.size()
            << " grid speed(s); partial library saved with its gap list\n";
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (*train_cmd) {
      RunConfig cfg;
      if (!train_config.empty()) cfg = load_run_config(train_config, cfg);
      if (*o_preset) cfg.preset = t_preset;
      if (*o_model) cfg.model = t_model;
      if (*o_library) cfg.library = t_library;
      if (*o_agents) cfg.ppo.agents = t_agents;
      if (*o_iters) cfg.iterations = t_iterations;
      if (*o_seed) cfg.seed = t_seed;
      if (*o_out) cfg.out = t_out;
      if (*o_every) cfg.checkpoint_every = t_every;
      if (*o_steps) cfg.ppo.steps_per_iteration = t_steps;
      interrupt_flag() = false;
      auto previous = std::signal(SIGINT, [](int) { interrupt_flag() = true; });
      TrainResult r;
      try {
        r = train_run(cfg, out, &interrupt_flag(), workers_or_default(t_workers));
      } catch (...) {
        std::signal(SIGINT, previous);
        throw;
      }
      std::signal(SIGINT, previous);
      out << "checkpoint " << r.checkpoint.string() << '\n';
      if (r.diverged) {
        err << "error: training diverged; last good checkpoint saved\n";
        return kExitRuntime;
      }
      if (r.interrupted) {
        err << "interrupted; checkpoint flushed\n";
        return kExitRuntime;
      }
      return kExitOk;
    }

    if (*eval_cmd) {
      eopt.workers = workers_or_default(e_workers);
      if (!e_config.empty()) eopt.expected_config_hash = load_run_config(e_config).hash();
      if (e_checkpoint.empty() && e_compare.empty()) throw ConfigError("eval needs --checkpoint or --compare");
      if (!e_checkpoint.empty()) {
        const Checkpoint ckpt = load_checkpoint(e_checkpoint);
        const EvalReport r = evaluate_checkpoint(ckpt, eopt, err);
        write_report_files(r, e_out);
        write_manifest(e_out, "eval", r.config_hash, r.seed, report_files(r));
        out << summarize(r);
        return kExitOk;
      }
      std::vector<EvalReport> reports;
      for (const auto& path : e_compare) {
        const Checkpoint ckpt = load_checkpoint(path);
        reports.push_back(evaluate_checkpoint(ckpt, eopt, err));
      }
      const auto labels = unique_labels(reports);
      for (size_t i = 0; i < reports.size(); ++i) {
        const fs::path sub = fs::path(e_out) / labels[i];
        write_report_files(reports[i], sub);
        write_manifest(sub, "eval", reports[i].config_hash, reports[i].seed, report_files(reports[i]));
        out << summarize(reports[i]);
      }
      write_comparison(reports, e_out, eopt.seed, "eval --compare");
      return kExitOk;
    }

    if (*report_cmd) {
      if (r_reports.empty() && r_runs.empty()) throw ConfigError("report needs --reports and/or --runs");
      fs::create_directories(r_out);
      std::uint64_t seed = 0;
      std::string hashes;
      if (!r_reports.empty()) {
        std::vector<EvalReport> reports;
        for (const auto& p : r_reports) reports.push_back(load_report(p));
        seed = reports.front().seed;
        write_comparison(reports, r_out, seed, "report");
        for (const auto& r : reports) hashes += r.config_hash;
      }
      if (!r_runs.empty()) {
        std::vector<std::pair<std::string, fs::path>> runs;
        for (const auto& d : r_runs) {
          json cfg;
          try {
            cfg = json::parse(read_file(fs::path(d) / "config.json"));
            runs.emplace_back(cfg.at("preset").get<std::string>(), fs::path(d) / "reward_means.csv");
          } catch (const json::exception& e) {
            throw ParseError((fs::path(d) / "config.json").string(), e.what());
          }
          hashes += cfg.value("config_hash", std::string());
        }
        write_file_atomic(fs::path(r_out) / "reward_means.csv", merge_reward_means(runs));
      }
      std::vector<std::string> files;
      for (const auto& entry : fs::directory_iterator(r_out))
        if (entry.path().extension() == ".csv") files.push_back(entry.path().filename().string());
      std::sort(files.begin(), files.end());
      write_manifest(r_out, "report", content_hash(hashes), seed, files);
      out << "wrote merged tables to " << r_out << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace gaitlab
