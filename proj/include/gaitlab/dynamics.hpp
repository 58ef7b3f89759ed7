#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "gaitlab/errors.hpp"
#include "gaitlab/kinematics.hpp"
#include "gaitlab/model.hpp"

namespace gaitlab {

struct ContactPoint {
  bool active = false;
  double normal_force = 0.0;      // N, >= 0
  double tangential_force = 0.0;  // N, along +x
};

struct FootContact {
  bool in_contact = false;
  double normal_force = 0.0;  // sum over the foot's points
  double air_time = 0.0;      // s since lift-off, 0 while in contact
  bool touchdown = false;     // touched down during the last step
  double touchdown_air_time = 0.0;  // air time that ended at that touchdown
};

struct SimState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  double t = 0.0;
  std::vector<ContactPoint> contacts;  // feet in model order, points in foot order
  std::vector<FootContact> feet;
  // Metering data of the last step: applied joint torques and the joint
  // velocities that carried the configuration over the step.
  Eigen::VectorXd tau;
  Eigen::VectorXd joint_omega;
};

/// Joint-space PD targets: tau = clamp(kp (target - q) - kd (qd - target_velocity)).
struct PdCommand {
  Eigen::VectorXd target;
  Eigen::VectorXd kp;
  Eigen::VectorXd kd;
  Eigen::VectorXd target_velocity;  // empty means zero

  /// Targets with the model's default gains.
  static PdCommand with_model_gains(const RobotModel& model, const Eigen::VectorXd& target);
  static PdCommand zero_gains(const RobotModel& model);
};

/// Instantaneous momentum change applied at the CoM of `link` (the torso by default).
struct Impulse {
  Vec2 linear = Vec2::Zero();  // N*s
  double angular = 0.0;        // N*m*s about the pitch axis
  double time = 0.0;           // s
  int link = 0;
};

struct StepOptions {
  double dt = 1e-3;
  bool contact = true;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(const std::string& what, SimState prior)
      : Error(what), prior_(std::move(prior)) {}
  const SimState& prior_state() const { return prior_; }

 private:
  SimState prior_;
};

/// State at rest with empty contact records sized for the model.
SimState make_state(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd);
SimState make_state(const RobotModel& model, const Eigen::VectorXd& q);

/// Joint-angle vector with the floating base prepended (base x, z, pitch).
Eigen::VectorXd full_configuration(const RobotModel& model, double x, double z, double pitch,
                                   const Eigen::VectorXd& joints);

/// Clamped PD torques for the given state.
Eigen::VectorXd pd_torques(const RobotModel& model, const SimState& state, const PdCommand& pd);

/// Velocity change produced by an impulse at the current configuration.
Eigen::VectorXd impulse_velocity_change(const RobotModel& model, const Eigen::VectorXd& q, const Impulse& imp);

/// Advances one fixed step. Each step holds the PD torque and integrates with
/// a kick-drift-kick split; contact damping and friction are implicit in the
/// kicks. Impulses with time in [t, t + dt) are applied at the start.
SimState step(const RobotModel& model, const SimState& state, const PdCommand& pd,
              std::span<const Impulse> impulses, const StepOptions& options = {});

/// Base height that puts the lowest contact point `clearance` above the ground.
double ground_base_height(const RobotModel& model, const Eigen::VectorXd& q, double clearance);

}  // namespace gaitlab
