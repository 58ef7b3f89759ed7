#include "gaitlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gaitlab/kinematics.hpp"
#include "gaitlab/parallel.hpp"
#include "gaitlab/vec_env.hpp"

namespace gaitlab {

using nlohmann::json;

Eigen::VectorXd Policy::act(const Eigen::VectorXd& obs) const {
  if (!net_) throw ContractError("policy has no network");
  ActorCritic<float>::Mat o = obs.cast<float>();
  ActorCritic<float>::Mat mean;
  net_->action_mean(o, mean);
  return mean.col(0).cast<double>();
}

EpisodeConfig evaluation_episode(const EpisodeConfig& train) {
  EpisodeConfig e = train;
  e.randomization.friction.reset();
  e.randomization.mass_scale = {1.0, 1.0};
  e.randomization.gain_scale = {1.0, 1.0};
  e.randomization.noise_scale = {0.0, 0.0};
  e.resample_interval = 0.0;
  return e;
}

BipedEnv EvalSetup::make_env(double t_max) const {
  if (!model) throw ContractError("evaluation needs a robot model");
  EpisodeConfig e = episode;
  e.t_max = t_max;
  e.resample_interval = 0.0;
  return BipedEnv(model, library, rewards, e);
}

namespace {

double com_vx(const BipedEnv& env) { return com_velocity(env.model(), env.state().q, env.state().qd).x(); }
double com_x(const RobotModel& m, const SimState& s) { return com_position(m, s.q).x(); }

int control_steps(double seconds, const EpisodeConfig& e) {
  return static_cast<int>(std::lround(seconds / e.control_dt()));
}

}  // namespace

// ---- velocity step ------------------------------------------------------

VelocityResponse velocity_step_test(const Policy& policy, const EvalSetup& setup, std::uint64_t seed,
                                    const VelocityStepConfig& cfg) {
  if (!(cfg.duration > cfg.t_step) || cfg.t_step < 0.0) throw ContractError("velocity step must fall inside the test");
  BipedEnv env = setup.make_env(cfg.duration + 1.0);
  env.set_command(cfg.v_before);
  Eigen::VectorXd o = env.reset(seed);
  const int n = control_steps(cfg.duration, env.episode_config());
  VelocityResponse r;
  r.t.reserve(n);
  for (int k = 0; k < n; ++k) {
    if (env.time() >= cfg.t_step - 1e-9) {
      env.set_command(cfg.v_after);
      o[obs::kCommand] = cfg.v_after;
    }
    const StepResult s = env.step(policy.act(o));
    o = s.obs;
    r.t.push_back(s.info.time);
    r.command.push_back(s.info.command);
    r.measured.push_back(com_vx(env));
    if (s.fell) {
      r.fell = true;
      r.fall_time = s.info.time;
      break;
    }
  }

  double zero_sum = 0.0;
  int zero_n = 0;
  for (size_t i = 0; i < r.t.size(); ++i) {
    if (r.t[i] <= cfg.t_step + 1e-9) {
      zero_sum += r.measured[i];
      ++zero_n;
    } else if (r.rise_time < 0.0 && r.measured[i] >= 0.9 * cfg.v_after) {
      r.rise_time = r.t[i] - cfg.t_step;
    }
  }
  r.zero_mean = zero_n ? zero_sum / zero_n : 0.0;

  const double window_start = cfg.duration - cfg.steady_window;
  double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  int m = 0;
  for (size_t i = 0; i < r.t.size(); ++i) {
    if (r.t[i] <= window_start + 1e-9) continue;
    sum += r.measured[i];
    lo = std::min(lo, r.measured[i]);
    hi = std::max(hi, r.measured[i]);
    ++m;
  }
  if (m > 0 && !r.fell) {
    r.steady_mean = sum / m;
    r.steady_deviation = 0.5 * (hi - lo);
  }
  r.tracking_failure = r.fell || r.steady_mean < cfg.failure_ratio * cfg.v_after;
  return r;
}

// ---- push recovery ------------------------------------------------------

std::string to_string(PushRegime r) {
  switch (r) {
    case PushRegime::linear: return "linear";
    case PushRegime::angular: return "angular";
    case PushRegime::combined: return "combined";
  }
  return "linear";
}

PushRegime push_regime_from(const std::string& s) {
  for (PushRegime r : kAllRegimes)
    if (to_string(r) == s) return r;
  throw ConfigError("unknown push regime '" + s + "' (linear, angular, combined)");
}

json PushGrid::to_json() const {
  return {{"linear", {linear.lo, linear.hi}},
          {"angular", {angular.lo, angular.hi}},
          {"settle", settle},
          {"window", window},
          {"upright_pitch", upright_pitch},
          {"upright_height", upright_height}};
}

PushTrial run_push_trial(const Policy& policy, const EvalSetup& setup, PushRegime regime, double linear,
                         double angular, double delay, std::uint64_t seed, const PushGrid& grid) {
  BipedEnv env = setup.make_env(grid.settle + delay + grid.window + 1.0);
  env.set_command(0.0);
  Eigen::VectorXd o = env.reset(seed);
  PushTrial t;
  t.regime = regime;
  t.linear = linear;
  t.angular = angular;

  const int before = control_steps(grid.settle + delay, env.episode_config());
  for (int k = 0; k < before; ++k) {
    const StepResult s = env.step(policy.act(o));
    o = s.obs;
    if (s.fell) {
      t.fell_before_push = true;
      t.time = s.info.time;
      return t;
    }
  }
  t.time = env.time();
  t.phase = env.phase();
  Impulse imp;
  imp.linear = Vec2(linear, 0.0);
  imp.angular = angular;
  imp.time = env.state().t;
  env.schedule_impulse(imp);

  const int after = control_steps(grid.window, env.episode_config());
  for (int k = 0; k < after; ++k) {
    const StepResult s = env.step(policy.act(o));
    o = s.obs;
    if (s.fell) {
      t.time_to_fall = s.info.time - t.time;
      return t;
    }
  }
  const SimState& st = env.state();
  t.recovered = std::abs(st.q[2]) < grid.upright_pitch && st.q[1] > grid.upright_height * env.nominal_height();
  if (!t.recovered) t.time_to_fall = grid.window;
  return t;
}

PushSummary push_recovery(const Policy& policy, const EvalSetup& setup, PushRegime regime, int samples,
                          std::uint64_t seed, const PushGrid& grid, double magnitude_scale, int workers) {
  if (samples < 1) throw ContractError("push recovery needs at least one sample");
  if (!(magnitude_scale >= 0.0)) throw ContractError("magnitude scale must be >= 0");
  const double period = setup.library && !setup.library->empty() ? query_period(*setup.library, 0.0)
                                                                  : setup.episode.clock_period;
  PushSummary out;
  out.regime = regime;
  out.samples = samples;
  out.trials.resize(samples);
  parallel_for(samples, workers, [&](int i) {
    // Draws depend only on (seed, i) so regimes and magnitude sweeps share them.
    std::mt19937_64 rng(episode_seed(seed, i, 0x9a5));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u_lin = unit(rng), u_ang = unit(rng);
    const double s_lin = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double s_ang = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double delay = unit(rng) * period;
    const std::uint64_t reset_seed = rng();
    double lin = 0.0, ang = 0.0;
    if (regime != PushRegime::angular) lin = s_lin * (grid.linear.lo + u_lin * (grid.linear.hi - grid.linear.lo));
    if (regime != PushRegime::linear) ang = s_ang * (grid.angular.lo + u_ang * (grid.angular.hi - grid.angular.lo));
    out.trials[i] = run_push_trial(policy, setup, regime, magnitude_scale * lin, magnitude_scale * ang, delay,
                                   reset_seed, grid);
  });
  int ok = 0;
  for (const auto& t : out.trials) ok += t.recovered ? 1 : 0;
  out.rate = static_cast<double>(ok) / samples;
  return out;
}

// ---- cost of transport --------------------------------------------------

void TransportMeter::start(double x) {
  start_x_ = x;
  e_abs_ = e_pos_ = 0.0;
  started_ = true;
}

void TransportMeter::add(const Eigen::VectorXd& tau, const Eigen::VectorXd& omega, double dt, double x) {
  if (!started_) start(x);
  if (tau.size() != omega.size()) throw ContractError("torque and velocity lengths differ");
  for (Eigen::Index j = 0; j < tau.size(); ++j) {
    const double p = tau[j] * omega[j];
    e_abs_ += std::abs(p) * dt;
    e_pos_ += std::max(p, 0.0) * dt;
  }
  const double d = x - start_x_;
  if (d >= length_) {
    c_et_.push_back(e_abs_ / (weight_ * d));
    c_mt_.push_back(e_pos_ / (weight_ * d));
    start(x);
  }
}

double TransportMeter::mean_c_et() const {
  if (c_et_.empty()) return 0.0;
  double s = 0.0;
  for (double c : c_et_) s += c;
  return s / c_et_.size();
}

double TransportMeter::mean_c_mt() const {
  if (c_mt_.empty()) return 0.0;
  double s = 0.0;
  for (double c : c_mt_) s += c;
  return s / c_mt_.size();
}

CotResult cost_of_transport(const Policy& policy, const EvalSetup& setup, std::uint64_t seed, const CotConfig& cfg) {
  if (cfg.segments < 1 || !(cfg.segment_length > 0.0)) throw ContractError("need at least one positive segment");
  BipedEnv env = setup.make_env(cfg.warmup + cfg.timeout + 1.0);
  env.set_command(cfg.speed);
  Eigen::VectorXd o = env.reset(seed);
  const RobotModel& m = env.model();
  TransportMeter meter(m.total_mass * m.gravity, cfg.segment_length);
  bool metering = false;
  double meter_start_time = 0.0, meter_start_x = 0.0, last_x = 0.0, last_t = 0.0;
  Observer ob;
  ob.on_substep = [&](const SimState& s) {
    if (!metering) return;
    last_x = com_x(m, s);
    last_t = s.t;
    meter.add(s.tau, s.joint_omega, env.episode_config().sim_dt, last_x);
  };
  env.set_observer(ob);

  auto finish = [&](bool complete, const std::string& why) {
    CotResult r;
    r.segment_c_et = meter.c_et();
    r.segment_c_mt = meter.c_mt();
    r.c_et = meter.mean_c_et();
    r.c_mt = meter.mean_c_mt();
    r.complete = complete;
    r.failure = why;
    if (metering && last_t > meter_start_time) r.mean_speed = (last_x - meter_start_x) / (last_t - meter_start_time);
    return r;
  };

  const int warm = control_steps(cfg.warmup, env.episode_config());
  const int limit = warm + control_steps(cfg.timeout, env.episode_config());
  for (int k = 0; k < limit; ++k) {
    if (k == warm) {
      metering = true;
      meter_start_x = last_x = com_x(m, env.state());
      meter_start_time = last_t = env.state().t;
      meter.start(meter_start_x);
    }
    const StepResult s = env.step(policy.act(o));
    o = s.obs;
    if (s.fell) {
      throw CotIncomplete("robot fell during the cost-of-transport run",
                          finish(false, "fell after " + std::to_string(meter.segments()) + " segments"));
    }
    if (meter.segments() >= cfg.segments) return finish(true, "");
  }
  throw CotIncomplete("cost-of-transport run timed out before covering the distance",
                      finish(false, "timed out after " + std::to_string(meter.segments()) + " segments"));
}

// ---- transfer ------------------------------------------------------------

json Perturbation::to_json() const {
  json j = {{"name", name}, {"mass_scale", mass_scale}, {"gain_scale", gain_scale}, {"noise_scale", noise_scale}};
  j["friction"] = friction ? json(*friction) : json(nullptr);
  return j;
}

Perturbation Perturbation::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("perturbation", "expected an object");
  Perturbation p;
  for (const auto& [key, v] : j.items()) {
    const std::string path = "perturbation." + key;
    if (key == "name") {
      if (!v.is_string()) throw ParseError(path, "expected a string");
      p.name = v.get<std::string>();
      continue;
    }
    if (key == "friction" && v.is_null()) {
      p.friction.reset();
      continue;
    }
    if (!v.is_number()) throw ParseError(path, "expected a number");
    const double x = v.get<double>();
    if (key == "friction") p.friction = x;
    else if (key == "mass_scale") p.mass_scale = x;
    else if (key == "gain_scale") p.gain_scale = x;
    else if (key == "noise_scale") p.noise_scale = x;
    else throw ParseError(path, "unknown key");
  }
  return p;
}

std::vector<Perturbation> default_perturbations() {
  std::vector<Perturbation> g;
  auto add = [&](std::string name, std::optional<double> f, double m, double k, double n) {
    g.push_back(Perturbation{std::move(name), f, m, k, n});
  };
  add("friction_0.5", 0.5, 1.0, 1.0, 0.0);
  add("friction_1.2", 1.2, 1.0, 1.0, 0.0);
  add("mass_0.9", std::nullopt, 0.9, 1.0, 0.0);
  add("mass_1.1", std::nullopt, 1.1, 1.0, 0.0);
  add("gain_0.8", std::nullopt, 1.0, 0.8, 0.0);
  add("gain_1.2", std::nullopt, 1.0, 1.2, 0.0);
  add("noise_1", std::nullopt, 1.0, 1.0, 1.0);
  add("noise_2", std::nullopt, 1.0, 1.0, 2.0);
  return g;
}

EvalSetup perturbed(const EvalSetup& setup, const Perturbation& p) {
  EvalSetup s = setup;
  Randomization& r = s.episode.randomization;
  if (p.friction) r.friction = Range{*p.friction, *p.friction};
  else r.friction.reset();
  r.mass_scale = {p.mass_scale, p.mass_scale};
  r.gain_scale = {p.gain_scale, p.gain_scale};
  r.noise_scale = {p.noise_scale, p.noise_scale};
  r.validate();
  return s;
}

std::vector<TransferRow> transfer_check(const Policy& policy, const EvalSetup& setup,
                                        const std::vector<Perturbation>& grid, std::uint64_t seed,
                                        const TransferConfig& cfg, int workers) {
  std::vector<Perturbation> all{Perturbation{"nominal", std::nullopt, 1.0, 1.0, 0.0}};
  all.insert(all.end(), grid.begin(), grid.end());
  std::vector<TransferRow> rows;
  for (const auto& p : all) {
    const EvalSetup s = perturbed(setup, p);
    TransferRow row;
    row.perturbation = p;
    row.velocity = velocity_step_test(policy, s, seed, cfg.velocity);
    for (PushRegime r : kAllRegimes)
      row.push.push_back(push_recovery(policy, s, r, cfg.push_samples, seed, cfg.grid, 1.0, workers));
    try {
      row.cot = cost_of_transport(policy, s, seed, cfg.cot);
    } catch (const CotIncomplete& e) {
      row.cot = e.partial();
      row.cot_failure = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gaitlab
