#pragma once

#include <Eigen/Dense>

#include <vector>

#include "gaitlab/model.hpp"

namespace gaitlab {

using Jacobian2 = Eigen::Matrix<double, 2, Eigen::Dynamic>;

inline Eigen::Matrix2d rotation(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// Derivative direction of a rotating lever arm: d/dtheta (R r) = perp(R r).
inline Vec2 perp(const Vec2& r) { return {-r.y(), r.x()}; }

/// Per-link world-frame quantities for one configuration. Reused as a
/// workspace by the dynamics routines.
struct Kinematics {
  std::vector<Vec2> origin;
  std::vector<double> angle;
  std::vector<Vec2> com;
  // Filled by update_velocities().
  std::vector<double> omega;
  std::vector<Vec2> origin_bias;  // J̇·q̇ of the link frame origin
  std::vector<Vec2> com_bias;     // J̇·q̇ of the link CoM
};

void update_positions(const RobotModel& model, const Eigen::VectorXd& q, Kinematics& kin);
/// Requires update_positions() for the same configuration.
void update_velocities(const RobotModel& model, const Eigen::VectorXd& qd, Kinematics& kin);

Vec2 world_point(const Kinematics& kin, int link, const Vec2& local);
/// 2 x ndof Jacobian of a point fixed to `link`, located at `point` (world).
void point_jacobian(const RobotModel& model, const Kinematics& kin, int link, const Vec2& point,
                    Jacobian2& jac);
/// J̇·q̇ of a point fixed to `link` with link-frame coordinates `local`.
Vec2 point_bias(const Kinematics& kin, int link, const Vec2& local);

void mass_matrix(const RobotModel& model, const Kinematics& kin, Eigen::MatrixXd& mass);
/// Velocity-product and gravity terms h in M q̈ + h = Q. Needs velocities.
void bias_forces(const RobotModel& model, const Kinematics& kin, Eigen::VectorXd& bias);

Eigen::MatrixXd mass_matrix(const RobotModel& model, const Eigen::VectorXd& q);
Eigen::VectorXd bias_forces(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd);

Vec2 com_position(const RobotModel& model, const Kinematics& kin);
Vec2 com_position(const RobotModel& model, const Eigen::VectorXd& q);
Vec2 com_velocity(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd);
/// Total linear momentum (x, z) of the tree.
Vec2 linear_momentum(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd);

double kinetic_energy(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd);
/// Gravitational potential with the datum at z = 0.
double potential_energy(const RobotModel& model, const Eigen::VectorXd& q);

/// Local coordinates of the centre of each foot (mean of its contact points).
Vec2 foot_center_local(const Foot& foot);
std::vector<Vec2> foot_centers_world(const RobotModel& model, const Eigen::VectorXd& q);
/// Foot centres relative to the whole-body CoM, in world axes.
std::vector<Vec2> foot_positions(const RobotModel& model, const Eigen::VectorXd& q);

/// World positions of every contact point, feet in model order.
std::vector<Vec2> contact_points_world(const RobotModel& model, const Eigen::VectorXd& q);

/// Base pitch (fixed pose for fixed-base models).
double base_pitch(const RobotModel& model, const Eigen::VectorXd& q);
double base_height(const RobotModel& model, const Eigen::VectorXd& q);

}  // namespace gaitlab
