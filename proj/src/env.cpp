#include "gaitlab/env.hpp"

#include <cmath>

#include "gaitlab/kinematics.hpp"

namespace gaitlab {

using nlohmann::json;

namespace {

void check_range(const Range& r, const std::string& what) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
    throw ValidationError(what + " range must satisfy lo <= hi");
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ParseError(path, "expected [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path, "expected a number");
  return v.get<double>();
}

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.degenerate()) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

void Randomization::validate() const {
  if (friction) {
    check_range(*friction, "friction");
    if (friction->lo < 0.0) throw ValidationError("friction must be >= 0");
  }
  check_range(mass_scale, "mass scale");
  check_range(gain_scale, "gain scale");
  check_range(noise_scale, "noise scale");
  if (!(mass_scale.lo > 0.0)) throw ValidationError("mass scale must be > 0");
  if (gain_scale.lo < 0.0 || noise_scale.lo < 0.0) throw ValidationError("scales must be >= 0");
  if (vel_noise_std < 0.0 || pos_noise_std < 0.0) throw ValidationError("noise std must be >= 0");
}

json Randomization::to_json() const {
  json j = {{"mass_scale", range_json(mass_scale)},
            {"gain_scale", range_json(gain_scale)},
            {"noise_scale", range_json(noise_scale)},
            {"vel_noise_std", vel_noise_std},
            {"pos_noise_std", pos_noise_std}};
  j["friction"] = friction ? range_json(*friction) : json(nullptr);
  return j;
}

Randomization Randomization::from_json(const json& doc, const Randomization& base) {
  if (!doc.is_object()) throw ParseError("randomization", "expected an object");
  Randomization r = base;
  for (const auto& [key, v] : doc.items()) {
    const std::string path = "episode.randomization." + key;
    if (key == "friction") {
      if (v.is_null()) r.friction.reset();
      else r.friction = range_from(v, path);
    } else if (key == "mass_scale") {
      r.mass_scale = range_from(v, path);
    } else if (key == "gain_scale") {
      r.gain_scale = range_from(v, path);
    } else if (key == "noise_scale") {
      r.noise_scale = range_from(v, path);
    } else if (key == "vel_noise_std") {
      r.vel_noise_std = number(v, path);
    } else if (key == "pos_noise_std") {
      r.pos_noise_std = number(v, path);
    } else {
      throw ParseError(path, "unknown key");
    }
  }
  r.validate();
  return r;
}

void EpisodeConfig::validate() const {
  if (!(t_max > 0.0)) throw ValidationError("t_max must be positive");
  check_range(command, "command");
  randomization.validate();
  if (!(action_scale > 0.0) || !(action_clip > 0.0)) throw ValidationError("action scale and clip must be positive");
  if (decimation < 1) throw ValidationError("decimation must be >= 1");
  if (!(sim_dt > 0.0)) throw ValidationError("sim_dt must be positive");
  if (init_noise < 0.0) throw ValidationError("init_noise must be >= 0");
  if (!(clock_period > 0.0)) throw ValidationError("clock_period must be positive");
}

json EpisodeConfig::to_json() const {
  return {{"t_max", t_max},
          {"resample_interval", resample_interval},
          {"command", range_json(command)},
          {"randomization", randomization.to_json()},
          {"action_scale", action_scale},
          {"action_clip", action_clip},
          {"decimation", decimation},
          {"sim_dt", sim_dt},
          {"init_noise", init_noise},
          {"fall_pitch", fall_pitch},
          {"fall_height_ratio", fall_height_ratio},
          {"clock_period", clock_period},
          {"seed", seed}};
}

EpisodeConfig EpisodeConfig::from_json(const json& doc, const EpisodeConfig& base) {
  if (!doc.is_object()) throw ParseError("episode", "expected an object");
  EpisodeConfig e = base;
  for (const auto& [key, v] : doc.items()) {
    const std::string path = "episode." + key;
    if (key == "t_max") e.t_max = number(v, path);
    else if (key == "resample_interval") e.resample_interval = number(v, path);
    else if (key == "command") e.command = range_from(v, path);
    else if (key == "randomization") e.randomization = Randomization::from_json(v, e.randomization);
    else if (key == "action_scale") e.action_scale = number(v, path);
    else if (key == "action_clip") e.action_clip = number(v, path);
    else if (key == "decimation") {
      if (!v.is_number_integer()) throw ParseError(path, "expected an integer");
      e.decimation = v.get<int>();
    } else if (key == "sim_dt") e.sim_dt = number(v, path);
    else if (key == "init_noise") e.init_noise = number(v, path);
    else if (key == "fall_pitch") e.fall_pitch = number(v, path);
    else if (key == "fall_height_ratio") e.fall_height_ratio = number(v, path);
    else if (key == "clock_period") e.clock_period = number(v, path);
    else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ParseError(path, "expected a non-negative integer");
      e.seed = v.get<std::uint64_t>();
    } else throw ParseError(path, "unknown key");
  }
  e.validate();
  return e;
}

BipedEnv::BipedEnv(std::shared_ptr<const RobotModel> model, std::shared_ptr<const GaitLibrary> library,
                   RewardConfig rewards, EpisodeConfig episode)
    : base_model_(std::move(model)),
      library_(std::move(library)),
      model_(*base_model_),
      rewards_(std::move(rewards)),
      episode_(std::move(episode)),
      rng_(episode_.seed) {
  rewards_.validate();
  episode_.validate();
  if (model_.num_joints() != obs::kPrevAction - obs::kJointVel || !model_.floating_base)
    throw ConfigError("the environment expects a floating-base model with 10 actuated joints");
  if (rewards_.needs_gait_library() && (!library_ || library_->empty()))
    throw ConfigError("reward preset '" + rewards_.preset + "' needs a gait library");
  if (library_ && !library_->empty()) {
    if (library_->model_hash != base_model_->hash)
      throw IncompatibleModelError("gait library was built for a different model");
    if (library_->gaits.front().num_joints() != model_.num_joints())
      throw IncompatibleModelError("gait library joint count does not match the model");
  }
  const Eigen::VectorXd q = full_configuration(model_, 0.0, 0.0, 0.0, model_.nominal_pose);
  nominal_height_ = ground_base_height(model_, q, 0.0);
  prev_action_ = Eigen::VectorXd::Zero(model_.num_joints());
  RandomizationSample identity;
  identity.friction = base_model_->ground.friction;
  install(identity);
  state_ = make_state(model_, full_configuration(model_, 0.0, nominal_height_, 0.0, model_.nominal_pose));
}

void BipedEnv::install(const RandomizationSample& s) {
  sample_ = s;
  model_ = *base_model_;
  model_.ground.friction = s.friction;
  if (s.mass_scale != 1.0) {
    for (auto& l : model_.links) {
      l.mass *= s.mass_scale;
      l.inertia *= s.mass_scale;
    }
    model_.total_mass *= s.mass_scale;
  }
  for (auto& j : model_.joints) {
    j.kp *= s.gain_scale;
    j.kd *= s.gain_scale;
  }
  pd_ = PdCommand::with_model_gains(model_, model_.nominal_pose);
}

void BipedEnv::sample_randomization(std::mt19937_64& rng) {
  const Randomization& r = episode_.randomization;
  RandomizationSample s;
  s.friction = r.friction ? uniform(rng, *r.friction) : base_model_->ground.friction;
  s.mass_scale = uniform(rng, r.mass_scale);
  s.gain_scale = uniform(rng, r.gain_scale);
  s.noise_scale = uniform(rng, r.noise_scale);
  install(s);
}

void BipedEnv::apply_randomization(const Randomization& ranges, std::uint64_t seed) {
  ranges.validate();
  episode_.randomization = ranges;
  std::mt19937_64 rng(seed);
  sample_randomization(rng);
  locked_randomization_ = true;
}

double BipedEnv::sample_command() { return uniform(rng_, episode_.command); }

void BipedEnv::set_command(double v) {
  command_ = v;
  scripted_command_ = true;
}

void BipedEnv::schedule_impulse(const Impulse& imp) {
  if (!(imp.time >= 0.0)) throw ContractError("impulse time must be >= 0");
  impulses_.push_back(imp);
}

void BipedEnv::set_elapsed_steps(long steps) {
  control_steps_ = std::max(0L, steps);
  time_ = control_steps_ * episode_.control_dt();
  if (episode_.resample_interval > 0.0)
    next_resample_ = (std::floor(time_ / episode_.resample_interval + 1e-9) + 1.0) * episode_.resample_interval;
}

double BipedEnv::gait_period() const {
  if (library_ && !library_->empty()) return query_period(*library_, command_);
  return episode_.clock_period;
}

Eigen::VectorXd BipedEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  if (!locked_randomization_) sample_randomization(rng_);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int nj = model_.num_joints();
  Eigen::VectorXd joints = model_.nominal_pose;
  for (int j = 0; j < nj; ++j) {
    const Joint& jt = model_.joints[j];
    const double d = episode_.init_noise * (2.0 * unit(rng_) - 1.0);
    joints[j] = std::clamp(joints[j] + d, jt.lower, jt.upper);
  }
  Eigen::VectorXd q = full_configuration(model_, 0.0, 0.0, 0.0, joints);
  q[1] = ground_base_height(model_, q, 0.0);
  state_ = make_state(model_, q);
  if (!scripted_command_) command_ = sample_command();
  phase_ = unit(rng_);
  if (phase_ >= 1.0) phase_ = 0.0;
  time_ = 0.0;
  control_steps_ = 0;
  next_resample_ = episode_.resample_interval;
  prev_action_.setZero(nj);
  impulses_.clear();
  return observation();
}

Eigen::VectorXd BipedEnv::observation() {
  const int nb = model_.base_dofs();
  const int nj = model_.num_joints();
  const double noise = sample_.noise_scale;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto pos_noise = [&]() { return noise > 0.0 ? noise * episode_.randomization.pos_noise_std * normal(rng_) : 0.0; };
  auto vel_noise = [&]() { return noise > 0.0 ? noise * episode_.randomization.vel_noise_std * normal(rng_) : 0.0; };

  Eigen::VectorXd o(obs::kSize);
  const Vec2 v = com_velocity(model_, state_.q, state_.qd);
  const double pitch = state_.q[2] + pos_noise();
  o[obs::kClock] = phase_;
  o[obs::kLinVel] = (v.x() + vel_noise()) / obs::kLinVelScale;
  o[obs::kLinVel + 1] = (v.y() + vel_noise()) / obs::kLinVelScale;
  o[obs::kPitchRate] = (state_.qd[2] + vel_noise()) / obs::kPitchRateScale;
  o[obs::kGravity] = -std::sin(pitch);
  o[obs::kGravity + 1] = -std::cos(pitch);
  o[obs::kCommand] = command_;
  o[obs::kCommand + 1] = 0.0;
  for (int j = 0; j < nj; ++j) {
    o[obs::kJointPos + j] = (state_.q[nb + j] + pos_noise()) / obs::kJointPosScale;
    o[obs::kJointVel + j] = (state_.qd[nb + j] + vel_noise()) / obs::kJointVelScale;
    o[obs::kPrevAction + j] = prev_action_[j];
  }
  return o;
}

bool BipedEnv::upright() const {
  return std::abs(state_.q[2]) <= episode_.fall_pitch && state_.q[1] >= episode_.fall_height_ratio * nominal_height_;
}

StepResult BipedEnv::step(const Eigen::VectorXd& action) {
  const int nj = model_.num_joints();
  if (action.size() != nj) throw ContractError("action length must equal the actuated joint count");
  if (!action.allFinite()) throw ContractError("action must be finite");
  const Eigen::VectorXd a = action.cwiseMax(-episode_.action_clip).cwiseMin(episode_.action_clip);

  StepResult out;
  StepInfo& info = out.info;
  pd_.target = model_.nominal_pose + episode_.action_scale * a;

  std::vector<double> touchdowns;
  StepOptions opts;
  opts.dt = episode_.sim_dt;
  for (int k = 0; k < episode_.decimation; ++k) {
    try {
      state_ = gaitlab::step(model_, state_, pd_, impulses_, opts);
    } catch (const SimulationDiverged& e) {
      state_ = e.prior_state();
      info.diverged = true;
      break;
    }
    for (const auto& f : state_.feet)
      if (f.touchdown) touchdowns.push_back(f.touchdown_air_time);
    for (int j = 0; j < nj; ++j) {
      const double pj = state_.tau[j] * state_.joint_omega[j];
      info.work_abs += std::abs(pj) * opts.dt;
      info.work_pos += std::max(pj, 0.0) * opts.dt;
    }
    if (observer_.on_substep) observer_.on_substep(state_);
  }
  ++control_steps_;
  time_ = control_steps_ * episode_.control_dt();

  // Clock advance at the command-interpolated stride period.
  phase_ = std::fmod(phase_ + episode_.control_dt() / gait_period(), 1.0);

  const bool fell = info.diverged || !upright();
  const bool timeout = !fell && time_ >= episode_.t_max - 1e-9;

  RewardInputs in = gather_inputs(model_, state_, fell);
  in.touchdowns = std::move(touchdowns);
  std::optional<GaitQuery> ref;
  if (rewards_.needs_gait_library()) ref = query(*library_, command_, phase_);
  info.reward = evaluate(in, model_, prev_action_, a, Command{command_, 0.0}, ref ? &*ref : nullptr, rewards_);
  info.command = command_;
  info.phase = phase_;
  info.time = time_;
  info.randomization = sample_;
  for (const auto& f : state_.feet) info.foot_contact.push_back(f.in_contact);

  prev_action_ = a;
  if (!scripted_command_ && episode_.resample_interval > 0.0 && time_ >= next_resample_ - 1e-9) {
    command_ = sample_command();
    next_resample_ += episode_.resample_interval;
  }

  out.reward = info.reward.total;
  out.fell = fell;
  out.timeout = timeout;
  out.done = fell || timeout;
  out.obs = observation();
  return out;
}

}  // namespace gaitlab
