#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaitlab/dynamics.hpp"
#include "gaitlab/gait.hpp"
#include "gaitlab/model.hpp"

namespace gaitlab {

enum class Term {
  imitation_joints,
  imitation_feet,
  tracking_lin_vel,
  tracking_ang_vel,
  no_fly,
  feet_air_time,
  action_rate,
  dof_vel_limit,
  termination,
  dof_pos_limit,
  orientation,
  lin_vel_z,
  torques,
};
inline constexpr int kNumTerms = 13;
using TermArray = std::array<double, kNumTerms>;

std::string_view term_name(Term t);
std::optional<Term> term_from_name(std::string_view name);
inline constexpr int index(Term t) { return static_cast<int>(t); }
/// Terms whose weight must be <= 0.
bool is_penalty(Term t);

struct RewardConfig {
  std::string preset;
  TermArray weights{};
  double sigma_lin = 0.25;        // tracking scales
  double sigma_ang = 0.25;
  double joint_sharpness = 0.2;   // denominators of the imitation exponentials
  double feet_sharpness = 0.1;
  double no_fly_threshold = 0.1;  // N
  double air_time_target = 0.3;   // s
  double t_max = 20.0;            // s

  double weight(Term t) const { return weights[index(t)]; }
  double& weight(Term t) { return weights[index(t)]; }
  double imitation_weight() const { return std::max(weight(Term::imitation_joints), weight(Term::imitation_feet)); }
  bool needs_gait_library() const;
  void validate() const;

  nlohmann::json to_json() const;
  /// Applies overrides from `doc` on top of `base`; unknown keys are errors.
  static RewardConfig from_json(const nlohmann::json& doc, const RewardConfig& base);
};

/// Weight columns: "gait1", "gait2", "gait3".
RewardConfig preset(std::string_view name);
std::vector<std::string> preset_names();

struct RewardBreakdown {
  TermArray values{};
  double total = 0.0;
  double operator[](Term t) const { return values[index(t)]; }
};

/// w exp(-sum (q - q*)^2 / sharpness).
double imitation_joints(const Eigen::VectorXd& q, const Eigen::VectorXd& q_ref, double w, double sharpness = 0.2);
/// w exp(-sum |x - x*|_1 / sharpness) over both feet.
double imitation_feet(const std::vector<Vec2>& x, const std::vector<Vec2>& x_ref, double w, double sharpness = 0.1);
double tracking(double error_norm, double w, double sigma);

/// Everything the reward terms need at one control step.
struct RewardInputs {
  Eigen::VectorXd joint_pos;
  Eigen::VectorXd joint_vel;
  Eigen::VectorXd tau;
  std::vector<Vec2> feet;          // CoM-relative foot centres
  std::vector<double> foot_force;  // per-foot normal force (N)
  std::vector<double> touchdowns;  // air times of touchdowns during the step
  Vec2 lin_vel = Vec2::Zero();     // CoM velocity (x, z)
  double yaw_rate = 0.0;           // always 0 in the plane
  Vec2 gravity_body = Vec2(0.0, -1.0);  // unit gravity in the torso frame
  bool fell = false;
};

/// Inputs from a single simulator state; touchdowns are those flagged in it.
RewardInputs gather_inputs(const RobotModel& model, const SimState& state, bool fell);

struct Command {
  double lin_x = 0.0;
  double yaw_rate = 0.0;
};

/// All terms of one control step. `ref` may be null when the imitation weights are 0.
RewardBreakdown evaluate(const RewardInputs& in, const RobotModel& model, const Eigen::VectorXd& prev_action,
                         const Eigen::VectorXd& action, const Command& command, const GaitQuery* ref,
                         const RewardConfig& cfg);

/// Per-episode means of every term (sum over steps / steps).
class EpisodeRewardMeans {
 public:
  void add(const RewardBreakdown& b);
  int steps() const { return steps_; }
  TermArray means() const;
  void reset();

 private:
  TermArray sums_{};
  int steps_ = 0;
};

}  // namespace gaitlab
