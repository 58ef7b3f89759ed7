#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gaitlab/env.hpp"
#include "gaitlab/errors.hpp"
#include "gaitlab/policy.hpp"

namespace gaitlab {

/// Deterministic policy: the actor mean.
class Policy {
 public:
  Policy() = default;
  explicit Policy(ActorCritic<float> net) : net_(std::make_shared<ActorCritic<float>>(std::move(net))) {}
  virtual ~Policy() = default;
  virtual Eigen::VectorXd act(const Eigen::VectorXd& obs) const;

 private:
  std::shared_ptr<const ActorCritic<float>> net_;
};

/// Everything needed to build evaluation environments.
struct EvalSetup {
  std::shared_ptr<const RobotModel> model;
  std::shared_ptr<const GaitLibrary> library;  // may be null
  RewardConfig rewards;
  EpisodeConfig episode;  // t_max is raised to cover each test

  /// Fresh environment with scripted command and (optional) fixed perturbation.
  BipedEnv make_env(double t_max) const;
};

/// Training episode settings with randomization removed and no command
/// resampling, as used by every evaluation.
EpisodeConfig evaluation_episode(const EpisodeConfig& train);

// ---- velocity step ------------------------------------------------------

struct VelocityStepConfig {
  double v_before = 0.0;   // m/s
  double v_after = 1.0;
  double t_step = 2.0;     // s
  double duration = 10.0;  // s
  double steady_window = 4.0;  // s at the end used for the steady-state statistics
  double failure_ratio = 0.8;  // steady mean below ratio * command flags a tracking failure
};

struct VelocityResponse {
  std::vector<double> t;         // s, one sample per control step
  std::vector<double> command;   // m/s
  std::vector<double> measured;  // CoM forward velocity
  double rise_time = -1.0;       // s after the step to reach 90% of the command, -1 if never
  double steady_mean = 0.0;
  double steady_deviation = 0.0;  // half peak-to-peak in the steady window
  double zero_mean = 0.0;         // mean velocity before the step
  bool fell = false;
  double fall_time = 0.0;
  bool tracking_failure = false;
};

VelocityResponse velocity_step_test(const Policy& policy, const EvalSetup& setup, std::uint64_t seed,
                                    const VelocityStepConfig& cfg = {});

// ---- push recovery ------------------------------------------------------

enum class PushRegime { linear, angular, combined };
std::string to_string(PushRegime r);
PushRegime push_regime_from(const std::string& s);
inline constexpr PushRegime kAllRegimes[] = {PushRegime::linear, PushRegime::angular, PushRegime::combined};

struct PushGrid {
  Range linear{2.0, 40.0};   // N s, horizontal, random sign
  Range angular{1.0, 20.0};  // N m s about pitch, random sign
  double settle = 2.0;       // s of standing before the earliest push
  double window = 5.0;       // s observed after the push
  double upright_pitch = 0.5;   // rad
  double upright_height = 0.7;  // of the nominal base height

  nlohmann::json to_json() const;
};

struct PushTrial {
  PushRegime regime = PushRegime::linear;
  double linear = 0.0;   // signed, N s
  double angular = 0.0;  // signed, N m s
  double phase = 0.0;    // clock phase at application
  double time = 0.0;     // s since reset at application
  bool recovered = false;
  double time_to_fall = 0.0;  // s after the impulse; 0 when recovered
  bool fell_before_push = false;
};

struct PushSummary {
  PushRegime regime = PushRegime::linear;
  int samples = 0;
  double rate = 0.0;
  std::vector<PushTrial> trials;
};

/// Random trial draws; `magnitude_scale` multiplies every impulse so sweeps
/// share their random numbers.
PushSummary push_recovery(const Policy& policy, const EvalSetup& setup, PushRegime regime, int samples,
                          std::uint64_t seed, const PushGrid& grid = {}, double magnitude_scale = 1.0,
                          int workers = 1);
PushTrial run_push_trial(const Policy& policy, const EvalSetup& setup, PushRegime regime, double linear,
                         double angular, double delay, std::uint64_t seed, const PushGrid& grid);

// ---- cost of transport --------------------------------------------------

/// Accumulates |tau omega| and max(tau omega, 0) from 1 kHz records and
/// closes a segment every `segment_length` metres of CoM travel.
class TransportMeter {
 public:
  TransportMeter(double weight, double segment_length) : weight_(weight), length_(segment_length) {}
  void start(double x);
  void add(const Eigen::VectorXd& tau, const Eigen::VectorXd& omega, double dt, double x);
  int segments() const { return static_cast<int>(c_et_.size()); }
  const std::vector<double>& c_et() const { return c_et_; }
  const std::vector<double>& c_mt() const { return c_mt_; }
  double mean_c_et() const;
  double mean_c_mt() const;

 private:
  double weight_, length_;
  double start_x_ = 0.0;
  double e_abs_ = 0.0, e_pos_ = 0.0;
  bool started_ = false;
  std::vector<double> c_et_, c_mt_;
  std::vector<double> durations_;
};

struct CotConfig {
  double speed = 0.5;       // m/s command
  double warmup = 4.0;      // s of walking before metering
  int segments = 5;         // metre segments to average
  double segment_length = 1.0;
  double timeout = 60.0;    // s
};

struct CotResult {
  double c_et = 0.0;
  double c_mt = 0.0;
  std::vector<double> segment_c_et, segment_c_mt;
  double mean_speed = 0.0;  // over the metered distance
  bool complete = false;
  std::string failure;
};

inline constexpr double kHumanCet = 0.2;
inline constexpr double kHumanCmt = 0.05;

class CotIncomplete : public Error {
 public:
  CotIncomplete(const std::string& what, CotResult partial) : Error(what), partial_(std::move(partial)) {}
  const CotResult& partial() const { return partial_; }

 private:
  CotResult partial_;
};

/// Throws CotIncomplete when the robot falls or stalls before all segments.
CotResult cost_of_transport(const Policy& policy, const EvalSetup& setup, std::uint64_t seed,
                            const CotConfig& cfg = {});

// ---- transfer ------------------------------------------------------------

struct Perturbation {
  std::string name;
  std::optional<double> friction;
  double mass_scale = 1.0;
  double gain_scale = 1.0;
  double noise_scale = 0.0;

  nlohmann::json to_json() const;
  static Perturbation from_json(const nlohmann::json& j);
};

std::vector<Perturbation> default_perturbations();

struct TransferConfig {
  int push_samples = 60;
  VelocityStepConfig velocity;
  CotConfig cot;
  PushGrid grid;
};

struct TransferRow {
  Perturbation perturbation;
  VelocityResponse velocity;
  std::vector<PushSummary> push;  // one per regime
  std::optional<CotResult> cot;
  std::string cot_failure;
};

/// Applies a perturbation as a degenerate randomization range.
EvalSetup perturbed(const EvalSetup& setup, const Perturbation& p);

/// Re-runs the velocity, push and cost suites per perturbed world. Row 0 is
/// always the unperturbed world.
std::vector<TransferRow> transfer_check(const Policy& policy, const EvalSetup& setup,
                                        const std::vector<Perturbation>& grid, std::uint64_t seed,
                                        const TransferConfig& cfg = {}, int workers = 1);

}  // namespace gaitlab
