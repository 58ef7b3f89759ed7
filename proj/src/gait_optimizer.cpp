#include "gaitlab/gait_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gaitlab/bezier.hpp"
#include "gaitlab/cmaes.hpp"
#include "gaitlab/dynamics.hpp"
#include "gaitlab/kinematics.hpp"

namespace gaitlab {

namespace {

constexpr int kFree = 4;  // free Bezier coefficients per joint
constexpr double kPi = 3.14159265358979323846;

struct LegJoints {
  int hip = -1, knee = -1, ankle = -1, shoulder = -1, elbow = -1;
};

LegJoints side_joints(const RobotModel& model, Side side) {
  LegJoints j;
  j.hip = model.joint_with(JointRole::hip, side);
  j.knee = model.joint_with(JointRole::knee, side);
  j.ankle = model.joint_with(JointRole::ankle, side);
  j.shoulder = model.joint_with(JointRole::shoulder, side);
  j.elbow = model.joint_with(JointRole::elbow, side);
  return j;
}

int foot_on(const RobotModel& model, Side side) {
  for (size_t f = 0; f < model.feet.size(); ++f)
    if (model.feet[f].side == side) return static_cast<int>(f);
  return -1;
}

void require_biped(const RobotModel& model) {
  if (!model.floating_base) throw ValidationError("gait optimization needs a floating-base model");
  for (Side s : {Side::left, Side::right}) {
    const LegJoints j = side_joints(model, s);
    if (j.hip < 0 || j.knee < 0 || j.ankle < 0 || foot_on(model, s) < 0)
      throw ValidationError("gait optimization needs hip, knee, ankle and a foot on both sides");
  }
}

// Knee-bent two-link inverse kinematics in the torso frame (torso level).
// (dx, dz) is the ankle relative to the hip; returns hip and knee angles.
std::pair<double, double> leg_ik(double l1, double l2, double dx, double dz) {
  const double d2 = dx * dx + dz * dz;
  const double c = std::clamp((d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double knee = -std::acos(c);
  const double hip = std::atan2(dx, -dz) - std::atan2(l2 * std::sin(knee), l1 + l2 * std::cos(knee));
  return {hip, knee};
}

double initial_period(double v_star) { return std::clamp(1.1 - 0.2 * v_star, 0.6, 1.4); }

}  // namespace

void tracking_gains(const RobotModel& model, const GaitOptimizerOptions& opt, Eigen::VectorXd& kp,
                    Eigen::VectorXd& kd) {
  const int nj = model.num_joints();
  if (opt.track_kp.size() == nj && opt.track_kd.size() == nj) {
    kp = opt.track_kp;
    kd = opt.track_kd;
    return;
  }
  kp.resize(nj);
  kd.resize(nj);
  for (int j = 0; j < nj; ++j) {
    switch (model.joints[j].role) {
      case JointRole::hip: kp[j] = 2000.0; kd[j] = 40.0; break;
      case JointRole::knee: kp[j] = 2000.0; kd[j] = 25.0; break;
      case JointRole::ankle: kp[j] = 1200.0; kd[j] = 8.0; break;
      case JointRole::shoulder: kp[j] = 300.0; kd[j] = 6.0; break;
      case JointRole::elbow: kp[j] = 150.0; kd[j] = 3.0; break;
      default: kp[j] = 500.0; kd[j] = 10.0; break;
    }
  }
}

int decision_size(const RobotModel& model) { return kFree * model.num_joints() + 1; }

ReferenceGait gait_from_decision(const RobotModel& model, const Eigen::VectorXd& x, double command,
                                 const GaitOptimizerOptions& opt) {
  const int nj = model.num_joints();
  if (x.size() != decision_size(model)) throw ContractError("decision vector length mismatch");
  ReferenceGait g;
  g.command = command;
  g.mirror = mirror_map(model);
  g.coeffs.resize(nj, kBezierDegree + 1);
  for (int j = 0; j < nj; ++j) {
    const Joint& jt = model.joints[j];
    for (int k = 0; k < kFree; ++k) g.coeffs(j, k) = std::clamp(x[kFree * j + k], jt.lower, jt.upper);
  }
  // Matching value and slope with the mirrored next half-stride makes the
  // stride periodic and C1 by construction. alpha_1 of the mirror joint is
  // first pulled into the band where the tied alpha_4 stays inside the limits,
  // so the tie never needs clamping (alpha_1 = alpha_0 always qualifies).
  for (int j = 0; j < nj; ++j) {
    const Joint& jt = model.joints[j];
    const int m = g.mirror[j];
    const double a0 = g.coeffs(m, 0);
    const double lo = std::max(model.joints[m].lower, 2.0 * a0 - jt.upper);
    const double hi = std::min(model.joints[m].upper, 2.0 * a0 - jt.lower);
    if (lo <= hi) g.coeffs(m, 1) = std::clamp(g.coeffs(m, 1), lo, hi);
  }
  for (int j = 0; j < nj; ++j) {
    const Joint& jt = model.joints[j];
    const int m = g.mirror[j];
    g.coeffs(j, 4) = std::clamp(2.0 * g.coeffs(m, 0) - g.coeffs(m, 1), jt.lower, jt.upper);
    g.coeffs(j, 5) = g.coeffs(m, 0);
  }
  g.period = std::clamp(x[kFree * nj], opt.period_min, opt.period_max);
  sample_feet(model, g);
  return g;
}

Eigen::VectorXd decision_from_gait(const ReferenceGait& gait) {
  const int nj = gait.num_joints();
  Eigen::VectorXd x(kFree * nj + 1);
  for (int j = 0; j < nj; ++j)
    for (int k = 0; k < kFree; ++k) x[kFree * j + k] = gait.coeffs(j, k);
  x[kFree * nj] = gait.period;
  return x;
}

ReferenceGait initial_gait(const RobotModel& model, double v_star, const GaitOptimizerOptions& opt) {
  require_biped(model);
  const int nj = model.num_joints();
  const LegJoints left = side_joints(model, Side::left);
  const LegJoints right = side_joints(model, Side::right);
  const double l1 = model.joints[left.knee].origin.norm();
  const double l2 = model.joints[left.ankle].origin.norm();
  const double period = std::clamp(initial_period(v_star), opt.period_min, opt.period_max);
  const double step = v_star * period / 2.0;

  // Hip height above the ankles: the nominal crouch, lowered if needed so the
  // legs reach the step extremes with some knee bend left.
  const Eigen::VectorXd& nom = model.nominal_pose;
  const double h_nom = l1 * std::cos(nom[left.hip]) + l2 * std::cos(nom[left.hip] + nom[left.knee]);
  const double reach = 0.97 * (l1 + l2);
  const double h = std::min(h_nom, std::sqrt(std::max(reach * reach - 0.25 * step * step, 0.25 * reach * reach)));

  constexpr int kSamples = 41;
  Eigen::MatrixXd target(kSamples, nj);
  for (int i = 0; i < kSamples; ++i) {
    const double s = static_cast<double>(i) / (kSamples - 1);
    Eigen::VectorXd q = nom;
    // Left stance: the pelvis passes over the planted foot while the right
    // foot travels from one step behind to one step ahead.
    const double stance_dx = step / 2.0 - step * s;
    const double swing_dx = -step / 2.0 + step * s - step * std::sin(2.0 * kPi * s) / kPi;
    const double lift = opt.swing_lift * std::pow(std::sin(kPi * s), 2);
    const auto [hl, kl] = leg_ik(l1, l2, stance_dx, -h);
    const auto [hr, kr] = leg_ik(l1, l2, swing_dx, -h + lift);
    q[left.hip] = hl;
    q[left.knee] = kl;
    q[left.ankle] = -(hl + kl);
    q[right.hip] = hr;
    q[right.knee] = kr;
    q[right.ankle] = -(hr + kr);
    if (left.shoulder >= 0 && right.shoulder >= 0) {
      q[left.shoulder] = nom[left.shoulder] + 0.3 * (hr - hl);
      q[right.shoulder] = nom[right.shoulder] + 0.3 * (hl - hr);
    }
    for (int j = 0; j < nj; ++j) target(i, j) = q[j];
  }

  // Least-squares fit of the free coefficients, with the last two of each
  // joint tied to its mirror partner.
  const std::vector<int> mirror = mirror_map(model);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(kSamples * nj, kFree * nj);
  Eigen::VectorXd b(kSamples * nj);
  for (int i = 0; i < kSamples; ++i) {
    const double s = static_cast<double>(i) / (kSamples - 1);
    for (int j = 0; j < nj; ++j) {
      const int r = i * nj + j;
      const int m = mirror[j];
      for (int k = 0; k < kFree; ++k) a(r, kFree * j + k) += bernstein(kBezierDegree, k, s);
      const double b4 = bernstein(kBezierDegree, 4, s);
      const double b5 = bernstein(kBezierDegree, 5, s);
      a(r, kFree * m) += 2.0 * b4 + b5;
      a(r, kFree * m + 1) -= b4;
      b[r] = target(i, j);
    }
  }
  const Eigen::VectorXd u = a.colPivHouseholderQr().solve(b);
  Eigen::VectorXd x(decision_size(model));
  x.head(kFree * nj) = u;
  x[kFree * nj] = period;
  return gait_from_decision(model, x, v_star, opt);
}

GaitDiagnostics evaluate_gait(const RobotModel& model, const ReferenceGait& gait, const GaitOptimizerOptions& opt) {
  require_biped(model);
  const int nj = model.num_joints();
  const int nb = model.base_dofs();
  const double dt = 1e-3;
  GaitDiagnostics d;
  d.evaluations = 1;

  PdCommand pd;
  tracking_gains(model, opt, pd.kp, pd.kd);

  // Start on the trajectory with the stance (left) foot at rest on the ground.
  const Eigen::VectorXd q_j0 = gait.joints(0.0);
  const Eigen::VectorXd qd_j0 = gait.joint_rates(0.0) / gait.period;
  Eigen::VectorXd q = full_configuration(model, 0.0, 0.0, 0.0, q_j0);
  q[1] = ground_base_height(model, q, -0.0015);
  Eigen::VectorXd qd = Eigen::VectorXd::Zero(model.num_dofs());
  qd.tail(nj) = qd_j0;
  {
    Kinematics kin;
    update_positions(model, q, kin);
    const int lf = foot_on(model, Side::left);
    const Foot& foot = model.feet[lf];
    Jacobian2 jac;
    point_jacobian(model, kin, foot.link, world_point(kin, foot.link, foot_center_local(foot)), jac);
    const Vec2 v_foot = jac.rightCols(nj) * qd_j0;
    qd[0] = -v_foot.x();
    qd[1] = -v_foot.y();
  }
  SimState state = make_state(model, q, qd);
  const Eigen::VectorXd nominal = full_configuration(model, 0.0, 0.0, 0.0, model.nominal_pose);
  const double z_nominal = ground_base_height(model, nominal, 0.0);

  const int half = std::max(1, static_cast<int>(std::lround(gait.period / (2.0 * dt))));
  const int steps = 2 * half;
  const double com_x0 = com_position(model, state.q).x();
  const int feet[2] = {foot_on(model, Side::right), foot_on(model, Side::left)};  // swing foot per half

  auto snapshot = [&](const SimState& s, bool swap) {
    Eigen::VectorXd v(5 + 2 * nj);
    v << s.q[1], s.q[2], s.qd[0], s.qd[1], s.qd[2], Eigen::VectorXd::Zero(2 * nj);
    for (int j = 0; j < nj; ++j) {
      const int src = swap ? gait.mirror[j] : j;
      v[5 + j] = s.q[nb + src];
      v[5 + nj + j] = s.qd[nb + src];
    }
    return v;
  };
  Eigen::VectorXd scale(5 + 2 * nj);
  scale << 0.01, 0.05, 0.1, 0.1, 0.5, Eigen::VectorXd::Constant(nj, 0.05), Eigen::VectorXd::Constant(nj, 1.0);
  const Eigen::VectorXd s0 = snapshot(state, false);
  Eigen::VectorXd s_half;

  double work = 0.0;
  double clearance = std::numeric_limits<double>::infinity();
  std::vector<Impulse> none;
  for (int k = 0; k < steps; ++k) {
    const double phase = static_cast<double>(k) / steps;
    pd.target = gait.joints(phase);
    pd.target_velocity = gait.joint_rates(phase) / gait.period;
    try {
      state = step(model, state, pd, none);
    } catch (const SimulationDiverged&) {
      d.fell = true;
      d.fall_time = (k + 1) * dt;
      break;
    }
    work += state.tau.cwiseProduct(state.joint_omega).cwiseAbs().sum() * dt;
    const double s_local = 2.0 * phase - (k >= half ? 1.0 : 0.0);
    if (s_local >= 0.3 && s_local <= 0.7) {
      const Foot& foot = model.feet[feet[k >= half ? 1 : 0]];
      Kinematics kin;
      update_positions(model, state.q, kin);
      for (const auto& p : foot.points) clearance = std::min(clearance, world_point(kin, foot.link, p).y());
    }
    if (std::abs(state.q[2]) > opt.fall_pitch || state.q[1] < opt.fall_height_ratio * z_nominal) {
      d.fell = true;
      d.fall_time = (k + 1) * dt;
      break;
    }
    if (k + 1 == half) s_half = snapshot(state, true);
  }

  const double mg = model.total_mass * model.gravity;
  const double elapsed = d.fell ? d.fall_time : steps * dt;
  d.mean_speed = (com_position(model, state.q).x() - com_x0) / elapsed;
  const double distance = std::max(gait.command * gait.period, 0.1);
  d.work_per_distance = work / (mg * distance);
  d.clearance = std::isfinite(clearance) ? clearance : 0.0;
  if (!d.fell) {
    const Eigen::VectorXd s_end = snapshot(state, false);
    const double r_half = ((s_half - s0).cwiseQuotient(scale)).norm() / std::sqrt(double(scale.size()));
    const double r_end = ((s_end - s0).cwiseQuotient(scale)).norm() / std::sqrt(double(scale.size()));
    d.periodicity = std::max(r_half, r_end);
  } else {
    d.periodicity = std::numeric_limits<double>::infinity();
  }
  d.feasible = !d.fell && d.periodicity < opt.periodicity_limit;

  const double speed_err = (d.mean_speed - gait.command) / 0.1;
  const double clr_short = std::max(0.0, opt.min_clearance - d.clearance) / opt.min_clearance;
  double obj = d.work_per_distance + opt.speed_weight * speed_err * speed_err +
               opt.clearance_weight * clr_short * clr_short;
  if (d.fell) {
    obj += opt.fall_penalty * (2.0 - d.fall_time / (steps * dt));
  } else {
    obj += opt.periodicity_weight * d.periodicity * d.periodicity;
    if (!d.feasible) obj += opt.fall_penalty;
  }
  d.objective = obj;
  return d;
}

namespace {

bool better(const GaitDiagnostics& a, double ta, const GaitDiagnostics& b, double tb) {
  if (a.objective != b.objective) return a.objective < b.objective;
  return ta < tb;
}

}  // namespace

ReferenceGait optimize_gait(const RobotModel& model, double v_star, std::uint64_t seed, int budget,
                            const GaitOptimizerOptions& opt) {
  if (!(v_star >= 0.0 && v_star <= 1.0)) throw ContractError("command velocity must lie in [0, 1] m/s");
  if (budget < 1) throw ContractError("optimization budget must be at least 1");
  ReferenceGait start = initial_gait(model, v_star, opt);
  start.diagnostics = evaluate_gait(model, start, opt);

  ReferenceGait best = start;
  bool have_feasible = start.diagnostics.feasible;
  int evals = 1;

  const int nj = model.num_joints();
  Eigen::VectorXd scale = Eigen::VectorXd::Constant(decision_size(model), opt.coeff_sigma);
  scale[kFree * nj] = opt.period_sigma;
  SepCmaEs es(decision_from_gait(start), scale, 1.0, opt.population, seed);

  while (evals < budget) {
    const auto& pop = es.ask();
    std::vector<double> fitness(pop.size());
    bool complete = true;
    for (size_t i = 0; i < pop.size(); ++i) {
      if (evals >= budget) {
        complete = false;
        break;
      }
      ReferenceGait cand = gait_from_decision(model, pop[i], v_star, opt);
      cand.diagnostics = evaluate_gait(model, cand, opt);
      ++evals;
      fitness[i] = cand.diagnostics.objective;
      const bool take = cand.diagnostics.feasible
                            ? (!have_feasible || better(cand.diagnostics, cand.period, best.diagnostics, best.period))
                            : (!have_feasible && better(cand.diagnostics, cand.period, best.diagnostics, best.period));
      if (take) {
        have_feasible = have_feasible || cand.diagnostics.feasible;
        best = std::move(cand);
      }
    }
    if (!complete) break;
    es.tell(fitness);
  }
  best.diagnostics.evaluations = evals;
  if (!have_feasible)
    throw InfeasibleGaitError("no feasible gait found for v* = " + std::to_string(v_star) + " within " +
                                  std::to_string(budget) + " evaluations",
                              best);
  return best;
}

}  // namespace gaitlab
