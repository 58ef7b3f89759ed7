#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "gaitlab/dynamics.hpp"
#include "gaitlab/gait.hpp"
#include "gaitlab/model.hpp"
#include "gaitlab/rewards.hpp"

namespace gaitlab {

inline constexpr int kObservationSchemaVersion = 1;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate() const { return lo == hi; }
};

struct Randomization {
  std::optional<Range> friction;  // absolute coefficient; the model value when unset
  Range mass_scale{1.0, 1.0};     // all link masses and inertias
  Range gain_scale{1.0, 1.0};     // all PD gains
  Range noise_scale{0.0, 0.0};    // multiplies the sensor-noise standard deviations
  double vel_noise_std = 0.01;    // m/s, rad/s
  double pos_noise_std = 0.005;   // rad

  void validate() const;
  nlohmann::json to_json() const;
  static Randomization from_json(const nlohmann::json& doc, const Randomization& base);
};

/// Values drawn by one randomization, reported in step info.
struct RandomizationSample {
  double friction = 0.0;
  double mass_scale = 1.0;
  double gain_scale = 1.0;
  double noise_scale = 0.0;
};

struct EpisodeConfig {
  double t_max = 20.0;              // s
  double resample_interval = 5.0;   // s, <= 0 disables resampling
  Range command{0.0, 1.0};          // m/s
  Randomization randomization;
  double action_scale = 0.5;        // rad per unit action
  double action_clip = 5.0;
  int decimation = 20;              // inner 1 kHz steps per control step
  double sim_dt = 1e-3;
  double init_noise = 0.05;         // rad, uniform joint perturbation at reset
  double fall_pitch = 0.8;          // rad
  double fall_height_ratio = 0.6;   // of the nominal base height
  double clock_period = 1.0;        // s, clock rate when there is no gait library
  std::uint64_t seed = 0;

  double control_dt() const { return decimation * sim_dt; }
  void validate() const;
  nlohmann::json to_json() const;
  static EpisodeConfig from_json(const nlohmann::json& doc, const EpisodeConfig& base);
};

/// Observation layout; every value is divided by its normalization constant.
namespace obs {
inline constexpr int kClock = 0;
inline constexpr int kLinVel = 1;     // CoM velocity x, z
inline constexpr int kPitchRate = 3;
inline constexpr int kGravity = 4;    // torso-frame gravity direction x, z
inline constexpr int kCommand = 6;    // forward velocity, yaw-rate placeholder
inline constexpr int kJointPos = 8;
inline constexpr int kJointVel = 18;
inline constexpr int kPrevAction = 28;
inline constexpr int kSize = 38;
inline constexpr double kLinVelScale = 1.0;
inline constexpr double kPitchRateScale = 4.0;
inline constexpr double kJointPosScale = 1.0;
inline constexpr double kJointVelScale = 10.0;
}  // namespace obs

struct Observer {
  // Called after every 1 kHz step with the state it produced.
  std::function<void(const SimState&)> on_substep;
};

struct StepInfo {
  RewardBreakdown reward;
  std::vector<bool> foot_contact;
  RandomizationSample randomization;
  double command = 0.0;
  double phase = 0.0;      // clock used for this step's reference
  double time = 0.0;       // s since reset, after the step
  double work_abs = 0.0;   // sum |tau omega| dt over the inner steps (J)
  double work_pos = 0.0;   // sum max(tau omega, 0) dt
  bool diverged = false;
};

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;
  bool fell = false;
  bool timeout = false;
  StepInfo info;
};

/// The planar-biped locomotion environment: 50 Hz policy actions, 1 kHz PD.
class BipedEnv {
 public:
  /// `library` may be null for presets without imitation terms.
  BipedEnv(std::shared_ptr<const RobotModel> model, std::shared_ptr<const GaitLibrary> library,
           RewardConfig rewards, EpisodeConfig episode);

  Eigen::VectorXd reset(std::uint64_t seed);
  StepResult step(const Eigen::VectorXd& action);

  /// Draws and installs friction, mass, gain and noise values.
  void apply_randomization(const Randomization& ranges, std::uint64_t seed);
  /// Fixed command from now on (no resampling).
  void set_command(double v);
  void release_command() { scripted_command_ = false; }
  void set_phase(double phase) { phase_ = phase; }
  /// Pretends `steps` control steps already elapsed in this episode (used to
  /// stagger time-outs across parallel agents).
  void set_elapsed_steps(long steps);
  void schedule_impulse(const Impulse& imp);
  void set_observer(Observer obs) { observer_ = std::move(obs); }

  Eigen::VectorXd observation();
  const SimState& state() const { return state_; }
  const RobotModel& model() const { return model_; }
  const RobotModel& nominal_model() const { return *base_model_; }
  const RewardConfig& reward_config() const { return rewards_; }
  const EpisodeConfig& episode_config() const { return episode_; }
  const RandomizationSample& randomization() const { return sample_; }
  double command() const { return command_; }
  double phase() const { return phase_; }
  double time() const { return time_; }
  double nominal_height() const { return nominal_height_; }
  /// Upright per the fall test used for termination.
  bool upright() const;
  /// Stride period used to advance the clock at the current command.
  double gait_period() const;

  static constexpr int observation_size() { return obs::kSize; }
  int action_size() const { return model_.num_joints(); }

 private:
  void sample_randomization(std::mt19937_64& rng);
  void install(const RandomizationSample& s);
  double sample_command();

  std::shared_ptr<const RobotModel> base_model_;
  std::shared_ptr<const GaitLibrary> library_;
  RobotModel model_;  // randomized copy
  RewardConfig rewards_;
  EpisodeConfig episode_;
  RandomizationSample sample_;
  bool locked_randomization_ = false;
  std::mt19937_64 rng_;
  SimState state_;
  PdCommand pd_;
  Eigen::VectorXd prev_action_;
  std::vector<Impulse> impulses_;
  Observer observer_;
  double command_ = 0.0;
  bool scripted_command_ = false;
  double phase_ = 0.0;
  double time_ = 0.0;
  long control_steps_ = 0;
  double next_resample_ = 0.0;
  double nominal_height_ = 0.0;
};

}  // namespace gaitlab
