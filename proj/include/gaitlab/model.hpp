#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "gaitlab/errors.hpp"

namespace gaitlab {

using Vec2 = Eigen::Vector2d;

inline constexpr int kModelSchemaVersion = 1;

enum class JointRole { none, hip, knee, ankle, shoulder, elbow };
enum class Side { none, left, right };

struct Link {
  std::string name;
  double mass = 0.0;     // kg
  double length = 0.0;   // m, nominal segment length
  double inertia = 0.0;  // kg*m^2 about the CoM
  Vec2 com = Vec2::Zero();  // CoM in the link frame (frame origin = parent joint)
};

struct Joint {
  std::string name;
  int parent = -1;  // link index
  int child = -1;   // link index
  Vec2 origin = Vec2::Zero();  // joint location in the parent link frame
  double lower = 0.0;
  double upper = 0.0;
  double velocity_limit = 0.0;  // rad/s
  double torque_limit = 0.0;    // N*m
  double kp = 0.0;              // default PD gains
  double kd = 0.0;
  JointRole role = JointRole::none;
  Side side = Side::none;
  int mirror = -1;  // joint with the same role on the other side (self if unpaired)
};

struct Foot {
  std::string name;
  Side side = Side::none;
  int link = -1;
  std::vector<Vec2> points;  // contact points in the foot link frame
};

struct GroundParams {
  double stiffness = 1.0e5;    // N/m
  double damping = 1.0e3;      // N*s/m
  double friction = 0.8;       // Coulomb coefficient
  double slip_velocity = 5e-3; // m/s, regularization of the friction cone
};

/// Planar articulated robot: a tree of links hanging off a floating (x, z, pitch)
/// or fixed base. Generalized coordinates are [x, z, pitch, joints...] for a
/// floating base and [joints...] for a fixed one.
struct RobotModel {
  std::string name;
  bool floating_base = true;
  Eigen::Vector3d fixed_pose = Eigen::Vector3d::Zero();  // x, z, pitch when fixed
  double gravity = 9.81;
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<Foot> feet;
  GroundParams ground;
  Eigen::VectorXd nominal_pose;  // joint angles

  // Derived on build.
  double total_mass = 0.0;
  std::vector<int> link_joint;                 // joint whose child is the link, -1 for root
  std::vector<std::vector<int>> link_chain;    // angle DOFs from root to link, in order
  std::vector<int> dof_pivot_link;             // for angle DOFs: link whose origin is the pivot
  std::string hash;                            // hash of the canonical document

  int num_joints() const { return static_cast<int>(joints.size()); }
  int base_dofs() const { return floating_base ? 3 : 0; }
  int num_dofs() const { return base_dofs() + num_joints(); }
  int joint_dof(int j) const { return base_dofs() + j; }
  int num_contact_points() const;

  int find_link(const std::string& name) const;
  int find_joint(const std::string& name) const;
  /// Joint index for (role, side), -1 if absent.
  int joint_with(JointRole role, Side side) const;
  Eigen::VectorXd torque_limits() const;
  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  Eigen::VectorXd velocity_limits() const;

  nlohmann::json to_json() const;
};

/// Validates and builds a model from a parsed document.
RobotModel build_model(const nlohmann::json& doc);
RobotModel parse_model(const std::string& text);
RobotModel load_model(const std::filesystem::path& path);
/// "default" selects the built-in biped, anything else is a file path.
RobotModel load_model_spec(const std::string& spec);

const std::string& default_model_text();
RobotModel default_model();

std::string to_string(JointRole r);
std::string to_string(Side s);

}  // namespace gaitlab
