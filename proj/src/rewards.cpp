#include "gaitlab/rewards.hpp"

#include <cmath>

#include "gaitlab/kinematics.hpp"

namespace gaitlab {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumTerms> kTermNames = {
    "imitation_joints", "imitation_feet", "tracking_lin_vel", "tracking_ang_vel", "no_fly",
    "feet_air_time",    "action_rate",    "dof_vel_limit",    "termination",      "dof_pos_limit",
    "orientation",      "lin_vel_z",      "torques",
};

}  // namespace

std::string_view term_name(Term t) { return kTermNames[index(t)]; }

std::optional<Term> term_from_name(std::string_view name) {
  for (int i = 0; i < kNumTerms; ++i)
    if (kTermNames[i] == name) return static_cast<Term>(i);
  return std::nullopt;
}

bool is_penalty(Term t) {
  switch (t) {
    case Term::action_rate:
    case Term::dof_vel_limit:
    case Term::termination:
    case Term::dof_pos_limit:
    case Term::orientation:
    case Term::lin_vel_z:
    case Term::torques: return true;
    default: return false;
  }
}

bool RewardConfig::needs_gait_library() const {
  return weight(Term::imitation_joints) != 0.0 || weight(Term::imitation_feet) != 0.0;
}

void RewardConfig::validate() const {
  for (int i = 0; i < kNumTerms; ++i) {
    const Term t = static_cast<Term>(i);
    if (!std::isfinite(weights[i])) throw ValidationError("reward weight '" + std::string(term_name(t)) + "' is not finite");
    if (is_penalty(t) && weights[i] > 0.0)
      throw ValidationError("penalty weight '" + std::string(term_name(t)) + "' must be <= 0");
    if (!is_penalty(t) && weights[i] < 0.0)
      throw ValidationError("reward weight '" + std::string(term_name(t)) + "' must be >= 0");
  }
  if (!(sigma_lin > 0.0) || !(sigma_ang > 0.0)) throw ValidationError("tracking sigma must be positive");
  if (!(joint_sharpness > 0.0) || !(feet_sharpness > 0.0)) throw ValidationError("imitation sharpness must be positive");
  if (!(no_fly_threshold >= 0.0)) throw ValidationError("no-fly threshold must be >= 0");
  if (!(t_max > 0.0)) throw ValidationError("t_max must be positive");
}

json RewardConfig::to_json() const {
  json w = json::object();
  for (int i = 0; i < kNumTerms; ++i) w[std::string(kTermNames[i])] = weights[i];
  return {{"preset", preset},
          {"weights", w},
          {"sigma_lin", sigma_lin},
          {"sigma_ang", sigma_ang},
          {"joint_sharpness", joint_sharpness},
          {"feet_sharpness", feet_sharpness},
          {"no_fly_threshold", no_fly_threshold},
          {"air_time_target", air_time_target},
          {"t_max", t_max}};
}

RewardConfig RewardConfig::from_json(const json& doc, const RewardConfig& base) {
  if (!doc.is_object()) throw ParseError("rewards", "expected an object");
  RewardConfig cfg = base;
  auto number = [](const json& v, const std::string& key) {
    if (!v.is_number()) throw ParseError(key, "expected a number");
    return v.get<double>();
  };
  for (const auto& [key, value] : doc.items()) {
    const std::string path = "rewards." + key;
    if (key == "preset") {
      if (!value.is_string()) throw ParseError(path, "expected a string");
      cfg.preset = value.get<std::string>();
    } else if (key == "weights") {
      if (!value.is_object()) throw ParseError(path, "expected an object");
      for (const auto& [name, w] : value.items()) {
        const auto t = term_from_name(name);
        if (!t) throw ParseError(path + "." + name, "unknown reward term");
        cfg.weight(*t) = number(w, path + "." + name);
      }
    } else if (key == "sigma_lin") {
      cfg.sigma_lin = number(value, path);
    } else if (key == "sigma_ang") {
      cfg.sigma_ang = number(value, path);
    } else if (key == "joint_sharpness") {
      cfg.joint_sharpness = number(value, path);
    } else if (key == "feet_sharpness") {
      cfg.feet_sharpness = number(value, path);
    } else if (key == "no_fly_threshold") {
      cfg.no_fly_threshold = number(value, path);
    } else if (key == "air_time_target") {
      cfg.air_time_target = number(value, path);
    } else if (key == "t_max") {
      cfg.t_max = number(value, path);
    } else {
      throw ParseError(path, "unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

RewardConfig preset(std::string_view name) {
  RewardConfig c;
  c.preset = std::string(name);
  auto& w = c.weights;
  w.fill(0.0);
  if (name == "gait1") {
    w[index(Term::imitation_joints)] = 5.0;
    w[index(Term::imitation_feet)] = 5.0;
    return c;
  }
  if (name != "gait2" && name != "gait3")
    throw ConfigError("unknown reward preset '" + std::string(name) + "' (valid: gait1, gait2, gait3)");
  const bool g2 = name == "gait2";
  w[index(Term::imitation_joints)] = g2 ? 5.0 : 0.0;
  w[index(Term::imitation_feet)] = 0.0;
  w[index(Term::tracking_lin_vel)] = g2 ? 1.5 : 0.4;
  w[index(Term::tracking_ang_vel)] = g2 ? 1.5 : 0.3;
  w[index(Term::no_fly)] = g2 ? 0.1 : 0.4;
  w[index(Term::feet_air_time)] = 3.0;
  w[index(Term::action_rate)] = g2 ? -3e-3 : -5e-4;
  w[index(Term::dof_vel_limit)] = -0.01;
  w[index(Term::termination)] = -30.0;
  w[index(Term::dof_pos_limit)] = -0.95;
  w[index(Term::orientation)] = -1.0;
  w[index(Term::lin_vel_z)] = -1.5;
  w[index(Term::torques)] = -8e-6;
  return c;
}

std::vector<std::string> preset_names() { return {"gait1", "gait2", "gait3"}; }

double imitation_joints(const Eigen::VectorXd& q, const Eigen::VectorXd& q_ref, double w, double sharpness) {
  if (q.size() != q_ref.size()) throw ContractError("imitation: joint vector lengths differ");
  if (w == 0.0) return 0.0;
  return w * std::exp(-(q - q_ref).squaredNorm() / sharpness);
}

double imitation_feet(const std::vector<Vec2>& x, const std::vector<Vec2>& x_ref, double w, double sharpness) {
  if (x.size() != x_ref.size() || x.size() != 2) throw ContractError("imitation: expected two feet");
  if (w == 0.0) return 0.0;
  double err = 0.0;
  for (size_t i = 0; i < x.size(); ++i) err += (x[i] - x_ref[i]).cwiseAbs().sum();
  return w * std::exp(-err / sharpness);
}

double tracking(double error_norm, double w, double sigma) {
  if (w == 0.0) return 0.0;
  return w * std::exp(-error_norm / sigma);
}

RewardInputs gather_inputs(const RobotModel& model, const SimState& state, bool fell) {
  RewardInputs in;
  const int nb = model.base_dofs();
  const int nj = model.num_joints();
  in.joint_pos = state.q.segment(nb, nj);
  in.joint_vel = state.qd.segment(nb, nj);
  in.tau = state.tau.size() == nj ? state.tau : Eigen::VectorXd::Zero(nj);
  in.feet = foot_positions(model, state.q);
  for (const auto& f : state.feet) {
    in.foot_force.push_back(f.normal_force);
    if (f.touchdown) in.touchdowns.push_back(f.touchdown_air_time);
  }
  in.lin_vel = com_velocity(model, state.q, state.qd);
  const double pitch = base_pitch(model, state.q);
  in.gravity_body = Vec2(-std::sin(pitch), -std::cos(pitch));
  in.fell = fell;
  return in;
}

RewardBreakdown evaluate(const RewardInputs& in, const RobotModel& model, const Eigen::VectorXd& prev_action,
                         const Eigen::VectorXd& action, const Command& command, const GaitQuery* ref,
                         const RewardConfig& cfg) {
  RewardBreakdown b;
  auto& v = b.values;
  const int nj = model.num_joints();
  if (in.joint_pos.size() != nj || in.joint_vel.size() != nj) throw ContractError("reward inputs do not match the model");
  if (prev_action.size() != action.size()) throw ContractError("action lengths differ");

  const double wj = cfg.weight(Term::imitation_joints);
  const double wf = cfg.weight(Term::imitation_feet);
  if ((wj != 0.0 || wf != 0.0) && ref == nullptr) throw ContractError("imitation terms need a reference");
  if (wj != 0.0) v[index(Term::imitation_joints)] = imitation_joints(in.joint_pos, ref->joints, wj, cfg.joint_sharpness);
  if (wf != 0.0) v[index(Term::imitation_feet)] = imitation_feet(in.feet, ref->feet, wf, cfg.feet_sharpness);

  v[index(Term::tracking_lin_vel)] =
      tracking(std::abs(command.lin_x - in.lin_vel.x()), cfg.weight(Term::tracking_lin_vel), cfg.sigma_lin);
  v[index(Term::tracking_ang_vel)] =
      tracking(std::abs(command.yaw_rate - in.yaw_rate), cfg.weight(Term::tracking_ang_vel), cfg.sigma_ang);

  int loaded = 0;
  for (double f : in.foot_force)
    if (f > cfg.no_fly_threshold) ++loaded;
  v[index(Term::no_fly)] = loaded == 1 ? cfg.weight(Term::no_fly) : 0.0;

  double air = 0.0;
  for (double t : in.touchdowns) air += t - cfg.air_time_target;
  v[index(Term::feet_air_time)] = cfg.weight(Term::feet_air_time) * air;

  v[index(Term::action_rate)] = cfg.weight(Term::action_rate) * (action - prev_action).squaredNorm();

  double vel_excess = 0.0, pos_excess = 0.0;
  for (int j = 0; j < nj; ++j) {
    const Joint& jt = model.joints[j];
    vel_excess += std::max(0.0, std::abs(in.joint_vel[j]) - jt.velocity_limit);
    pos_excess += std::max(0.0, jt.lower - in.joint_pos[j]) + std::max(0.0, in.joint_pos[j] - jt.upper);
  }
  v[index(Term::dof_vel_limit)] = cfg.weight(Term::dof_vel_limit) * vel_excess;
  v[index(Term::dof_pos_limit)] = cfg.weight(Term::dof_pos_limit) * pos_excess;

  v[index(Term::termination)] = in.fell ? cfg.weight(Term::termination) : 0.0;
  // In the plane the horizontal part of the torso-frame gravity is its x component.
  v[index(Term::orientation)] = cfg.weight(Term::orientation) * in.gravity_body.x() * in.gravity_body.x();
  v[index(Term::lin_vel_z)] = cfg.weight(Term::lin_vel_z) * in.lin_vel.y() * in.lin_vel.y();
  v[index(Term::torques)] = cfg.weight(Term::torques) * in.tau.squaredNorm();

  // Zero weights give exact zeros, whatever the inputs.
  for (int i = 0; i < kNumTerms; ++i)
    if (cfg.weights[i] == 0.0) v[i] = 0.0;
  b.total = 0.0;
  for (double x : v) b.total += x;
  return b;
}

void EpisodeRewardMeans::add(const RewardBreakdown& b) {
  for (int i = 0; i < kNumTerms; ++i) sums_[i] += b.values[i];
  ++steps_;
}

TermArray EpisodeRewardMeans::means() const {
  TermArray m{};
  if (steps_ == 0) return m;
  for (int i = 0; i < kNumTerms; ++i) m[i] = sums_[i] / steps_;
  return m;
}

void EpisodeRewardMeans::reset() {
  sums_.fill(0.0);
  steps_ = 0;
}

}  // namespace gaitlab
