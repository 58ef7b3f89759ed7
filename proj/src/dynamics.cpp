#include "gaitlab/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace gaitlab {

namespace {

struct ContactScratch {
  int link = 0;
  Vec2 local = Vec2::Zero();
  Jacobian2 jac;
  double penetration = 0.0;
  double friction_coeff = 0.0;  // linearized tangential damping
  bool active = false;
  double normal_force = 0.0;
  double tangential_force = 0.0;
};

struct Workspace {
  Kinematics kin;
  Eigen::MatrixXd mass;
  Eigen::MatrixXd system;
  Eigen::VectorXd bias;
  Eigen::VectorXd rhs;
  Eigen::VectorXd base_rhs;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  std::vector<ContactScratch> contacts;
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

struct KickResult {
  Eigen::VectorXd v;
  Vec2 momentum_before = Vec2::Zero();  // (M v)_xz at the kick configuration
  Vec2 contact_force = Vec2::Zero();
};

// One semi-implicit kick of length h at configuration q starting from v.
// Spring forces and gravity are explicit; contact damping and friction are
// linearly implicit in the new velocity.
KickResult half_kick(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& gen_force, double h, bool contact, Workspace& ws) {
  update_positions(model, q, ws.kin);
  update_velocities(model, v, ws.kin);
  mass_matrix(model, ws.kin, ws.mass);
  bias_forces(model, ws.kin, ws.bias);

  KickResult out;
  ws.base_rhs.noalias() = ws.mass * v;
  if (model.floating_base) out.momentum_before = ws.base_rhs.head<2>();
  ws.base_rhs += h * (gen_force - ws.bias);

  const GroundParams& g = model.ground;
  const int npts = model.num_contact_points();
  ws.contacts.resize(npts);
  int any_active = 0;
  {
    int c = 0;
    for (const auto& foot : model.feet) {
      for (const auto& local : foot.points) {
        ContactScratch& cs = ws.contacts[c++];
        cs.link = foot.link;
        cs.local = local;
        cs.active = false;
        cs.normal_force = 0.0;
        cs.tangential_force = 0.0;
        if (!contact) continue;
        const Vec2 p = world_point(ws.kin, foot.link, local);
        if (p.y() >= 0.0) continue;
        point_jacobian(model, ws.kin, foot.link, p, cs.jac);
        const Vec2 vp = cs.jac * v;
        cs.penetration = -p.y();
        const double fn_est = g.stiffness * cs.penetration - g.damping * vp.y();
        if (fn_est <= 0.0) continue;
        cs.active = true;
        cs.friction_coeff = g.friction * fn_est / std::max(std::abs(vp.x()), g.slip_velocity);
        ++any_active;
      }
    }
  }

  if (any_active == 0) {
    ws.ldlt.compute(ws.mass);
    out.v = ws.ldlt.solve(ws.base_rhs);
    return out;
  }

  // Active-set pass: drop points whose implicit normal force would pull.
  for (int iter = 0; iter <= npts; ++iter) {
    ws.system = ws.mass;
    ws.rhs = ws.base_rhs;
    for (auto& cs : ws.contacts) {
      if (!cs.active) continue;
      const auto jx = cs.jac.row(0);
      const auto jz = cs.jac.row(1);
      ws.system.noalias() += (h * cs.friction_coeff) * jx.transpose() * jx;
      ws.system.noalias() += (h * g.damping) * jz.transpose() * jz;
      ws.rhs.noalias() += (h * g.stiffness * cs.penetration) * jz.transpose();
    }
    ws.ldlt.compute(ws.system);
    out.v = ws.ldlt.solve(ws.rhs);
    bool changed = false;
    for (auto& cs : ws.contacts) {
      if (!cs.active) continue;
      const double vz = cs.jac.row(1).dot(out.v);
      if (g.stiffness * cs.penetration - g.damping * vz < 0.0) {
        cs.active = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (auto& cs : ws.contacts) {
    if (!cs.active) continue;
    const Vec2 vp = cs.jac * out.v;
    cs.normal_force = g.stiffness * cs.penetration - g.damping * vp.y();
    cs.tangential_force = -cs.friction_coeff * vp.x();
    out.contact_force += Vec2(cs.tangential_force, cs.normal_force);
  }
  return out;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

PdCommand PdCommand::with_model_gains(const RobotModel& model, const Eigen::VectorXd& target) {
  PdCommand pd;
  pd.target = target;
  pd.kp.resize(model.num_joints());
  pd.kd.resize(model.num_joints());
  for (int j = 0; j < model.num_joints(); ++j) {
    pd.kp[j] = model.joints[j].kp;
    pd.kd[j] = model.joints[j].kd;
  }
  return pd;
}

PdCommand PdCommand::zero_gains(const RobotModel& model) {
  PdCommand pd;
  pd.target = Eigen::VectorXd::Zero(model.num_joints());
  pd.kp = Eigen::VectorXd::Zero(model.num_joints());
  pd.kd = Eigen::VectorXd::Zero(model.num_joints());
  return pd;
}

Eigen::VectorXd full_configuration(const RobotModel& model, double x, double z, double pitch,
                                   const Eigen::VectorXd& joints) {
  Eigen::VectorXd q(model.num_dofs());
  if (model.floating_base) {
    q[0] = x;
    q[1] = z;
    q[2] = pitch;
  }
  q.tail(model.num_joints()) = joints;
  return q;
}

SimState make_state(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  if (q.size() != model.num_dofs() || qd.size() != model.num_dofs())
    throw ContractError("state dimension does not match the model");
  SimState s;
  s.q = q;
  s.qd = qd;
  s.contacts.assign(model.num_contact_points(), {});
  s.feet.assign(model.feet.size(), {});
  const auto pts = contact_points_world(model, q);
  int c = 0;
  for (size_t f = 0; f < model.feet.size(); ++f)
    for (size_t k = 0; k < model.feet[f].points.size(); ++k, ++c)
      if (pts[c].y() <= 0.0) s.feet[f].in_contact = true;
  s.tau = Eigen::VectorXd::Zero(model.num_joints());
  s.joint_omega = Eigen::VectorXd::Zero(model.num_joints());
  return s;
}

SimState make_state(const RobotModel& model, const Eigen::VectorXd& q) {
  return make_state(model, q, Eigen::VectorXd::Zero(model.num_dofs()));
}

Eigen::VectorXd pd_torques(const RobotModel& model, const SimState& state, const PdCommand& pd) {
  const int nj = model.num_joints();
  if (pd.target.size() != nj || pd.kp.size() != nj || pd.kd.size() != nj)
    throw ContractError("PD command length does not match the actuated joint count");
  if (pd.target_velocity.size() != 0 && pd.target_velocity.size() != nj)
    throw ContractError("PD target velocity length does not match the actuated joint count");
  const int b = model.base_dofs();
  Eigen::VectorXd tau(nj);
  for (int j = 0; j < nj; ++j) {
    const double vel_err = state.qd[b + j] - (pd.target_velocity.size() ? pd.target_velocity[j] : 0.0);
    const double raw = pd.kp[j] * (pd.target[j] - state.q[b + j]) - pd.kd[j] * vel_err;
    const double lim = model.joints[j].torque_limit;
    tau[j] = std::clamp(raw, -lim, lim);
  }
  return tau;
}

Eigen::VectorXd impulse_velocity_change(const RobotModel& model, const Eigen::VectorXd& q, const Impulse& imp) {
  Kinematics kin;
  update_positions(model, q, kin);
  Eigen::MatrixXd mass;
  mass_matrix(model, kin, mass);
  Jacobian2 jac;
  point_jacobian(model, kin, imp.link, kin.com[imp.link], jac);
  Eigen::VectorXd gen = jac.transpose() * imp.linear;
  for (int dof : model.link_chain[imp.link]) gen[dof] += imp.angular;
  return mass.ldlt().solve(gen);
}

SimState step(const RobotModel& model, const SimState& state, const PdCommand& pd,
              std::span<const Impulse> impulses, const StepOptions& options) {
  const int n = model.num_dofs();
  const int nj = model.num_joints();
  if (state.q.size() != n || state.qd.size() != n) throw ContractError("state dimension does not match the model");
  const double dt = options.dt;
  Workspace& ws = workspace();

  SimState next;
  next.tau = pd_torques(model, state, pd);

  Eigen::VectorXd v = state.qd;
  for (const auto& imp : impulses) {
    if (imp.time >= state.t && imp.time < state.t + dt) v += impulse_velocity_change(model, state.q, imp);
  }

  Eigen::VectorXd gen_force = Eigen::VectorXd::Zero(n);
  gen_force.tail(nj) = next.tau;

  const KickResult k1 = half_kick(model, state.q, v, gen_force, 0.5 * dt, options.contact, ws);
  next.q = state.q + dt * k1.v;
  KickResult k2 = half_kick(model, next.q, k1.v, gen_force, 0.5 * dt, options.contact, ws);
  next.qd = std::move(k2.v);

  if (model.floating_base) {
    // Enforce the discrete linear-momentum balance exactly; the correction is
    // O(dt^2) and only touches the base translation rate.
    const Vec2 p_target = k1.momentum_before + 0.5 * dt * (k1.contact_force + k2.contact_force) +
                          dt * Vec2(0.0, -model.total_mass * model.gravity);
    const Vec2 p_now = (ws.mass * next.qd).head<2>();
    next.qd.head<2>() += (p_target - p_now) / model.total_mass;
  }

  next.t = state.t + dt;
  next.joint_omega = k1.v.tail(nj);
  next.contacts.resize(ws.contacts.size());
  for (size_t c = 0; c < ws.contacts.size(); ++c) {
    next.contacts[c].active = ws.contacts[c].active;
    next.contacts[c].normal_force = ws.contacts[c].normal_force;
    next.contacts[c].tangential_force = ws.contacts[c].tangential_force;
  }
  next.feet.resize(model.feet.size());
  int c = 0;
  for (size_t f = 0; f < model.feet.size(); ++f) {
    FootContact& fc = next.feet[f];
    const FootContact prev = f < state.feet.size() ? state.feet[f] : FootContact{};
    fc.normal_force = 0.0;
    for (size_t k = 0; k < model.feet[f].points.size(); ++k, ++c) fc.normal_force += next.contacts[c].normal_force;
    fc.in_contact = fc.normal_force > 0.0;
    fc.touchdown = false;
    fc.touchdown_air_time = 0.0;
    if (fc.in_contact) {
      if (!prev.in_contact) {
        fc.touchdown = true;
        fc.touchdown_air_time = prev.air_time;
      }
      fc.air_time = 0.0;
    } else {
      fc.air_time = prev.air_time + dt;
    }
  }

  if (!all_finite(next.q) || !all_finite(next.qd)) throw SimulationDiverged("simulation diverged (non-finite state)", state);
  return next;
}

double ground_base_height(const RobotModel& model, const Eigen::VectorXd& q, double clearance) {
  Eigen::VectorXd probe = q;
  probe[1] = 0.0;
  const auto pts = contact_points_world(model, probe);
  double lowest = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) lowest = i == 0 ? pts[i].y() : std::min(lowest, pts[i].y());
  return clearance - lowest;
}

}  // namespace gaitlab
