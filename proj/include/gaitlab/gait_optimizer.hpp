#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

#include "gaitlab/errors.hpp"
#include "gaitlab/gait.hpp"
#include "gaitlab/model.hpp"

namespace gaitlab {

struct GaitOptimizerOptions {
  double period_min = 0.5;   // s
  double period_max = 1.6;
  double coeff_sigma = 0.04; // rad, initial search spread on coefficients
  double period_sigma = 0.05;
  int population = 0;        // 0 selects the CMA-ES default
  double min_clearance = 0.02;  // m, swing foot in mid swing
  double swing_lift = 0.06;     // m, apex height of the initial candidate
  double fall_pitch = 0.8;      // rad
  double fall_height_ratio = 0.6;  // of the nominal base height
  double periodicity_limit = 1.0;  // scaled mirrored-state mismatch for feasibility
  // Tracking gains for the stride rollout; by joint role when left empty.
  Eigen::VectorXd track_kp;
  Eigen::VectorXd track_kd;
  // Objective weights.
  double speed_weight = 100.0;       // per (0.1 m/s)^2 of mean-speed error
  double periodicity_weight = 2.0;
  double clearance_weight = 10.0;
  double fall_penalty = 1000.0;
};

/// High-gain PD used to play back candidate trajectories.
void tracking_gains(const RobotModel& model, const GaitOptimizerOptions& opt, Eigen::VectorXd& kp,
                    Eigen::VectorXd& kd);

/// Decision vector layout: for every joint the free coefficients alpha_0..alpha_3 (the
/// last two follow from continuity with the mirrored half-stride), then T.
int decision_size(const RobotModel& model);
ReferenceGait gait_from_decision(const RobotModel& model, const Eigen::VectorXd& x, double command,
                                 const GaitOptimizerOptions& opt);
Eigen::VectorXd decision_from_gait(const ReferenceGait& gait);

/// Kinematic walking template fitted to the Bezier form; the search start.
ReferenceGait initial_gait(const RobotModel& model, double v_star, const GaitOptimizerOptions& opt = {});

/// Rolls out one stride under tracking control and scores it.
GaitDiagnostics evaluate_gait(const RobotModel& model, const ReferenceGait& gait,
                              const GaitOptimizerOptions& opt = {});

class InfeasibleGaitError : public Error {
 public:
  InfeasibleGaitError(const std::string& what, ReferenceGait best)
      : Error(what), best_(std::move(best)) {}
  const ReferenceGait& best() const { return best_; }

 private:
  ReferenceGait best_;
};

/// Evolution-strategy search from the initial candidate. Returns the best
/// feasible gait; throws InfeasibleGaitError when none was found.
ReferenceGait optimize_gait(const RobotModel& model, double v_star, std::uint64_t seed, int budget,
                            const GaitOptimizerOptions& opt = {});

}  // namespace gaitlab
