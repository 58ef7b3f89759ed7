#include "gaitlab/kinematics.hpp"

namespace gaitlab {

void update_positions(const RobotModel& model, const Eigen::VectorXd& q, Kinematics& kin) {
  const size_t nl = model.links.size();
  kin.origin.resize(nl);
  kin.angle.resize(nl);
  kin.com.resize(nl);
  if (model.floating_base) {
    kin.origin[0] = Vec2(q[0], q[1]);
    kin.angle[0] = q[2];
  } else {
    kin.origin[0] = Vec2(model.fixed_pose[0], model.fixed_pose[1]);
    kin.angle[0] = model.fixed_pose[2];
  }
  kin.com[0] = kin.origin[0] + rotation(kin.angle[0]) * model.links[0].com;
  for (size_t l = 1; l < nl; ++l) {
    const int j = model.link_joint[l];
    const Joint& jt = model.joints[j];
    kin.origin[l] = kin.origin[jt.parent] + rotation(kin.angle[jt.parent]) * jt.origin;
    kin.angle[l] = kin.angle[jt.parent] + q[model.joint_dof(j)];
    kin.com[l] = kin.origin[l] + rotation(kin.angle[l]) * model.links[l].com;
  }
}

void update_velocities(const RobotModel& model, const Eigen::VectorXd& qd, Kinematics& kin) {
  const size_t nl = model.links.size();
  kin.omega.resize(nl);
  kin.origin_bias.resize(nl);
  kin.com_bias.resize(nl);
  kin.omega[0] = model.floating_base ? qd[2] : 0.0;
  kin.origin_bias[0] = Vec2::Zero();
  for (size_t l = 0; l < nl; ++l) {
    if (l > 0) {
      const int j = model.link_joint[l];
      const Joint& jt = model.joints[j];
      const double wp = kin.omega[jt.parent];
      kin.omega[l] = wp + qd[model.joint_dof(j)];
      kin.origin_bias[l] = kin.origin_bias[jt.parent] - wp * wp * (kin.origin[l] - kin.origin[jt.parent]);
    }
    const double w = kin.omega[l];
    kin.com_bias[l] = kin.origin_bias[l] - w * w * (kin.com[l] - kin.origin[l]);
  }
}

Vec2 world_point(const Kinematics& kin, int link, const Vec2& local) {
  return kin.origin[link] + rotation(kin.angle[link]) * local;
}

Vec2 point_bias(const Kinematics& kin, int link, const Vec2& local) {
  const double w = kin.omega[link];
  return kin.origin_bias[link] - w * w * (rotation(kin.angle[link]) * local);
}

void point_jacobian(const RobotModel& model, const Kinematics& kin, int link, const Vec2& point,
                    Jacobian2& jac) {
  jac.setZero(2, model.num_dofs());
  if (model.floating_base) {
    jac(0, 0) = 1.0;
    jac(1, 1) = 1.0;
  }
  for (int dof : model.link_chain[link]) {
    jac.col(dof) = perp(point - kin.origin[model.dof_pivot_link[dof]]);
  }
}

void mass_matrix(const RobotModel& model, const Kinematics& kin, Eigen::MatrixXd& mass) {
  const int n = model.num_dofs();
  mass.setZero(n, n);
  const bool fb = model.floating_base;
  // Columns of the CoM Jacobian are only non-zero on the base translation and
  // the link's chain of angle DOFs.
  Vec2 cols[64];
  int idx[64];
  for (size_t l = 0; l < model.links.size(); ++l) {
    const Link& link = model.links[l];
    int k = 0;
    if (fb) {
      cols[k] = Vec2(1.0, 0.0);
      idx[k++] = 0;
      cols[k] = Vec2(0.0, 1.0);
      idx[k++] = 1;
    }
    const int first_angle = k;
    for (int dof : model.link_chain[l]) {
      cols[k] = perp(kin.com[l] - kin.origin[model.dof_pivot_link[dof]]);
      idx[k++] = dof;
    }
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b <= a; ++b) {
        double v = link.mass * cols[a].dot(cols[b]);
        if (a >= first_angle && b >= first_angle) v += link.inertia;
        mass(idx[a], idx[b]) += v;
        if (a != b) mass(idx[b], idx[a]) += v;
      }
    }
  }
}

void bias_forces(const RobotModel& model, const Kinematics& kin, Eigen::VectorXd& bias) {
  const int n = model.num_dofs();
  bias.setZero(n);
  for (size_t l = 0; l < model.links.size(); ++l) {
    const Link& link = model.links[l];
    const Vec2 f = link.mass * (kin.com_bias[l] + Vec2(0.0, model.gravity));
    if (model.floating_base) {
      bias[0] += f.x();
      bias[1] += f.y();
    }
    for (int dof : model.link_chain[l]) {
      bias[dof] += perp(kin.com[l] - kin.origin[model.dof_pivot_link[dof]]).dot(f);
    }
  }
}

Eigen::MatrixXd mass_matrix(const RobotModel& model, const Eigen::VectorXd& q) {
  Kinematics kin;
  update_positions(model, q, kin);
  Eigen::MatrixXd mass;
  mass_matrix(model, kin, mass);
  return mass;
}

Eigen::VectorXd bias_forces(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  Kinematics kin;
  update_positions(model, q, kin);
  update_velocities(model, qd, kin);
  Eigen::VectorXd bias;
  bias_forces(model, kin, bias);
  return bias;
}

Vec2 com_position(const RobotModel& model, const Kinematics& kin) {
  Vec2 c = Vec2::Zero();
  for (size_t l = 0; l < model.links.size(); ++l) c += model.links[l].mass * kin.com[l];
  return c / model.total_mass;
}

Vec2 com_position(const RobotModel& model, const Eigen::VectorXd& q) {
  Kinematics kin;
  update_positions(model, q, kin);
  return com_position(model, kin);
}

Vec2 linear_momentum(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  Kinematics kin;
  update_positions(model, q, kin);
  Jacobian2 jac;
  Vec2 p = Vec2::Zero();
  for (size_t l = 0; l < model.links.size(); ++l) {
    point_jacobian(model, kin, static_cast<int>(l), kin.com[l], jac);
    p += model.links[l].mass * (jac * qd);
  }
  return p;
}

Vec2 com_velocity(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  return linear_momentum(model, q, qd) / model.total_mass;
}

double kinetic_energy(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  return 0.5 * qd.dot(mass_matrix(model, q) * qd);
}

double potential_energy(const RobotModel& model, const Eigen::VectorXd& q) {
  Kinematics kin;
  update_positions(model, q, kin);
  double e = 0.0;
  for (size_t l = 0; l < model.links.size(); ++l) e += model.links[l].mass * model.gravity * kin.com[l].y();
  return e;
}

Vec2 foot_center_local(const Foot& foot) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : foot.points) c += p;
  return c / static_cast<double>(foot.points.size());
}

std::vector<Vec2> foot_centers_world(const RobotModel& model, const Eigen::VectorXd& q) {
  Kinematics kin;
  update_positions(model, q, kin);
  std::vector<Vec2> out;
  for (const auto& f : model.feet) out.push_back(world_point(kin, f.link, foot_center_local(f)));
  return out;
}

std::vector<Vec2> foot_positions(const RobotModel& model, const Eigen::VectorXd& q) {
  Kinematics kin;
  update_positions(model, q, kin);
  const Vec2 c = com_position(model, kin);
  std::vector<Vec2> out;
  for (const auto& f : model.feet) out.push_back(world_point(kin, f.link, foot_center_local(f)) - c);
  return out;
}

std::vector<Vec2> contact_points_world(const RobotModel& model, const Eigen::VectorXd& q) {
  Kinematics kin;
  update_positions(model, q, kin);
  std::vector<Vec2> out;
  for (const auto& f : model.feet)
    for (const auto& p : f.points) out.push_back(world_point(kin, f.link, p));
  return out;
}

double base_pitch(const RobotModel& model, const Eigen::VectorXd& q) {
  return model.floating_base ? q[2] : model.fixed_pose[2];
}

double base_height(const RobotModel& model, const Eigen::VectorXd& q) {
  return model.floating_base ? q[1] : model.fixed_pose[1];
}

}  // namespace gaitlab
