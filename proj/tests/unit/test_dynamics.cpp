#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gaitlab/dynamics.hpp"
#include "gaitlab/kinematics.hpp"
#include "gaitlab/model.hpp"
#include "gaitlab/trajectory_dump.hpp"
#include "helpers.hpp"

using namespace gaitlab;
using nlohmann::json;

namespace {

json pendulum_doc(double m, double lc, double inertia) {
  return json::parse(R"({
    "model_schema": 1, "gravity": 9.81,
    "base": {"type": "fixed", "pose": [0.0, 1.5, 0.0]},
    "links": [
      {"name": "base", "mass": 1.0, "length": 0.1, "inertia": 0.01, "com": [0.0, 0.0]},
      {"name": "arm", "mass": 1.0, "length": 1.0, "inertia": 0.1, "com": [0.0, -0.5]}
    ],
    "joints": [
      {"name": "pivot", "parent": "base", "child": "arm", "origin": [0.0, 0.0],
       "lower": -3.0, "upper": 3.0, "velocity_limit": 50.0, "torque_limit": 100.0}
    ]
  })")
      .patch(json::array({{{"op", "replace"}, {"path", "/links/1/mass"}, {"value", m}},
                          {{"op", "replace"}, {"path", "/links/1/com"}, {"value", {0.0, -lc}}},
                          {{"op", "replace"}, {"path", "/links/1/inertia"}, {"value", inertia}}}));
}

// Link frames computed from scratch: origin and absolute angle per link.
struct Frames {
  std::vector<Vec2> origin;
  std::vector<double> angle;
};

Frames forward_frames(const RobotModel& m, const Eigen::VectorXd& q) {
  Frames f;
  f.origin.resize(m.links.size());
  f.angle.resize(m.links.size());
  f.origin[0] = Vec2(q[0], q[1]);
  f.angle[0] = q[2];
  for (int j = 0; j < m.num_joints(); ++j) {
    const Joint& jt = m.joints[j];
    f.angle[jt.child] = f.angle[jt.parent] + q[3 + j];
    f.origin[jt.child] = f.origin[jt.parent] + rotation(f.angle[jt.parent]) * jt.origin;
  }
  return f;
}

Vec2 oracle_com(const RobotModel& m, const Eigen::VectorXd& q) {
  const Frames f = forward_frames(m, q);
  Vec2 sum = Vec2::Zero();
  for (size_t l = 0; l < m.links.size(); ++l)
    sum += m.links[l].mass * (f.origin[l] + rotation(f.angle[l]) * m.links[l].com);
  return sum / m.total_mass;
}

// M = sum m Jc^T Jc + I Jw^T Jw with Jacobians from central differences.
Eigen::MatrixXd oracle_mass_matrix(const RobotModel& m, const Eigen::VectorXd& q) {
  const int n = m.num_dofs();
  const double h = 1e-6;
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n);
  for (size_t l = 0; l < m.links.size(); ++l) {
    Eigen::MatrixXd jc(2, n);
    Eigen::RowVectorXd jw(n);
    for (int k = 0; k < n; ++k) {
      Eigen::VectorXd qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      const Frames fp = forward_frames(m, qp), fm = forward_frames(m, qm);
      const Vec2 cp = fp.origin[l] + rotation(fp.angle[l]) * m.links[l].com;
      const Vec2 cm = fm.origin[l] + rotation(fm.angle[l]) * m.links[l].com;
      jc.col(k) = (cp - cm) / (2 * h);
      jw[k] = (fp.angle[l] - fm.angle[l]) / (2 * h);
    }
    mass += m.links[l].mass * jc.transpose() * jc + m.links[l].inertia * jw.transpose() * jw;
  }
  return mass;
}

Eigen::VectorXd random_pose(const RobotModel& m, std::mt19937_64& rng) {
  Eigen::VectorXd q(m.num_dofs());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  q[0] = u(rng) - 0.5;
  q[1] = 1.0 + u(rng);
  q[2] = 0.6 * (u(rng) - 0.5);
  for (int j = 0; j < m.num_joints(); ++j)
    q[3 + j] = m.joints[j].lower + u(rng) * (m.joints[j].upper - m.joints[j].lower);
  return q;
}

SimState airborne_state(const RobotModel& m, std::uint64_t seed, double vel_scale) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd q = full_configuration(m, 0.0, 2.0, 0.1, m.nominal_pose);
  return make_state(m, q, testutil::random_vector(rng, m.num_dofs(), vel_scale));
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("default biped matches its declared structure") {
    const RobotModel m = default_model();
    CHECK(m.links.size() == 11);
    CHECK(m.num_joints() == 10);
    CHECK(m.num_dofs() == 13);
    CHECK(m.feet.size() == 2);
    CHECK(m.total_mass == doctest::Approx(65.0).epsilon(1e-12));
    CHECK(m.torque_limits().maxCoeff() == 360.0);
    CHECK(m.torque_limits().minCoeff() == 80.0);
    CHECK(m.joints[m.find_joint("hip_l")].torque_limit == 360.0);
    CHECK(m.joints[m.find_joint("elbow_r")].torque_limit == 80.0);
    for (const auto& j : m.joints) {
      CHECK(j.kp == 150.0);
      CHECK(j.kd == 5.0);
      CHECK(m.joints[j.mirror].role == j.role);
    }
  }

  TEST_CASE("file and text loading agree") {
    const auto dir = testutil::scratch_dir("model_load");
    const auto path = dir / "robot.json";
    {
      std::ofstream f(path);
      f << default_model_text();
    }
    CHECK(load_model(path).hash == default_model().hash);
    CHECK(load_model_spec("default").hash == default_model().hash);
    CHECK_THROWS_AS(load_model(dir / "missing.json"), IoError);
    CHECK_THROWS_AS(parse_model("{not json"), ParseError);
  }

  TEST_CASE("invalid documents are rejected with the offending field") {
    const json base = json::parse(default_model_text());

    json zero_mass = base;
    zero_mass["links"][2]["mass"] = 0.0;
    CHECK_THROWS_AS(build_model(zero_mass), ValidationError);

    json missing = base;
    missing.erase("gravity");
    try {
      build_model(missing);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("gravity") != std::string::npos);
    }

    json inverted = base;
    inverted["joints"][1]["lower"] = 0.5;
    inverted["joints"][1]["upper"] = 0.5;
    CHECK_THROWS_AS(build_model(inverted), ValidationError);

    json bad_schema = base;
    bad_schema["model_schema"] = 7;
    CHECK_THROWS_AS(build_model(bad_schema), ParseError);

    json unknown_parent = base;
    unknown_parent["joints"][0]["parent"] = "nowhere";
    CHECK_THROWS_AS(build_model(unknown_parent), ParseError);
  }

  TEST_CASE("model hash tracks content") {
    json doc = json::parse(default_model_text());
    const std::string h0 = build_model(doc).hash;
    CHECK(build_model(doc).hash == h0);
    doc["links"][0]["mass"] = 37.7;
    CHECK(build_model(doc).hash != h0);
    CHECK(build_model(build_model(doc).to_json()).hash == build_model(doc).hash);
  }
}

TEST_SUITE("kinematics") {
  TEST_CASE("pendulum mass matrix is m lc^2 + I") {
    const double m = 2.0, lc = 0.5, inertia = 0.1;
    const RobotModel p = build_model(pendulum_doc(m, lc, inertia));
    CHECK(p.num_dofs() == 1);
    for (double th : {-1.0, 0.0, 0.7, 2.5}) {
      Eigen::VectorXd q(1);
      q << th;
      CHECK(mass_matrix(p, q)(0, 0) == doctest::Approx(m * lc * lc + inertia).epsilon(1e-12));
    }
  }

  TEST_CASE("mass matrix is symmetric positive definite and matches the Jacobian sum") {
    const RobotModel m = default_model();
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd q = random_pose(m, rng);
      const Eigen::MatrixXd mass = mass_matrix(m, q);
      CHECK((mass - mass.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mass);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
      CHECK((mass - oracle_mass_matrix(m, q)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("centre of mass is the mass-weighted link centre") {
    const RobotModel m = default_model();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd q = random_pose(m, rng);
      CHECK((com_position(m, q) - oracle_com(m, q)).norm() < 1e-12);
    }
  }

  TEST_CASE("straight-leg foot height by hand") {
    const RobotModel m = default_model();
    Eigen::VectorXd joints = Eigen::VectorXd::Zero(m.num_joints());
    const Eigen::VectorXd q = full_configuration(m, 0.3, 1.2, 0.0, joints);
    const auto feet = foot_centers_world(m, q);
    // Thigh 0.40 + shank 0.40 below the hip, then the foot-centre offset (0.06, -0.07).
    for (const Vec2& f : feet) {
      CHECK(f.x() == doctest::Approx(0.3 + 0.06).epsilon(1e-12));
      CHECK(f.y() == doctest::Approx(1.2 - 0.40 - 0.40 - 0.07).epsilon(1e-12));
    }

    // Bent leg: chain the rotations by hand.
    const double a = 0.4, b = -0.9, c = 0.3, pitch = -0.2;
    joints[m.find_joint("hip_l")] = a;
    joints[m.find_joint("knee_l")] = b;
    joints[m.find_joint("ankle_l")] = c;
    const Eigen::VectorXd qb = full_configuration(m, 0.0, 1.0, pitch, joints);
    const Vec2 knee = Vec2(0.0, 1.0) + rotation(pitch + a) * Vec2(0.0, -0.40);
    const Vec2 ankle = knee + rotation(pitch + a + b) * Vec2(0.0, -0.40);
    const Vec2 foot = ankle + rotation(pitch + a + b + c) * Vec2(0.06, -0.07);
    int left = 0;
    for (size_t i = 0; i < m.feet.size(); ++i)
      if (m.feet[i].side == Side::left) left = static_cast<int>(i);
    CHECK((foot_centers_world(m, qb)[left] - foot).norm() < 1e-12);
  }

  TEST_CASE("identical leg angles give identical CoM-relative feet") {
    const RobotModel m = default_model();
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd q = random_pose(m, rng);
      for (auto role : {JointRole::hip, JointRole::knee, JointRole::ankle})
        q[m.joint_dof(m.joint_with(role, Side::right))] = q[m.joint_dof(m.joint_with(role, Side::left))];
      const auto feet = foot_positions(m, q);
      CHECK((feet[0] - feet[1]).norm() < 1e-12);
    }
  }
}

TEST_SUITE("dynamics") {
  TEST_CASE("free fall follows the ballistic parabola") {
    const RobotModel m = default_model();
    SimState s = make_state(m, full_configuration(m, 0.0, 3.0, 0.0, m.nominal_pose));
    const Vec2 c0 = com_position(m, s.q);
    const PdCommand pd = PdCommand::zero_gains(m);
    StepOptions opt;
    opt.contact = false;
    for (int k = 0; k < 500; ++k) s = step(m, s, pd, {}, opt);
    const Vec2 c1 = com_position(m, s.q);
    CHECK(std::abs(c1.y() - (c0.y() - 0.5 * 9.81 * 0.25)) < 1e-3);
    CHECK(std::abs(c1.x() - c0.x()) < 1e-9);
  }

  TEST_CASE("torque-free flight conserves energy and horizontal momentum") {
    const RobotModel m = default_model();
    SimState s = airborne_state(m, 17, 1.0);
    const PdCommand pd = PdCommand::zero_gains(m);
    StepOptions opt;
    opt.contact = false;
    auto energy = [&](const SimState& st) { return kinetic_energy(m, st.q, st.qd) + potential_energy(m, st.q); };
    const double e0 = energy(s);
    const double px0 = linear_momentum(m, s.q, s.qd).x();
    double worst_e = 0.0, worst_p = 0.0;
    for (int k = 0; k < 1000; ++k) {
      s = step(m, s, pd, {}, opt);
      worst_e = std::max(worst_e, std::abs(energy(s) - e0));
      worst_p = std::max(worst_p, std::abs(linear_momentum(m, s.q, s.qd).x() - px0));
    }
    CHECK(worst_e / std::abs(e0) < 1e-3);
    CHECK(worst_p < 1e-10);
  }

  TEST_CASE("pendulum swing matches an RK4 reference") {
    const double mass = 2.0, lc = 0.5, inertia = 0.1;
    const RobotModel p = build_model(pendulum_doc(mass, lc, inertia));
    Eigen::VectorXd q(1), qd(1);
    q << 0.8;
    qd << 0.0;
    SimState s = make_state(p, q, qd);
    const PdCommand pd = PdCommand::zero_gains(p);
    for (int k = 0; k < 1000; ++k) s = step(p, s, pd, {});

    const double jeff = mass * lc * lc + inertia;
    auto acc = [&](double th) { return -mass * 9.81 * lc * std::sin(th) / jeff; };
    double th = 0.8, om = 0.0;
    const double h = 1e-4;
    for (int k = 0; k < 10000; ++k) {
      const double k1t = om, k1o = acc(th);
      const double k2t = om + 0.5 * h * k1o, k2o = acc(th + 0.5 * h * k1t);
      const double k3t = om + 0.5 * h * k2o, k3o = acc(th + 0.5 * h * k2t);
      const double k4t = om + h * k3o, k4o = acc(th + h * k3t);
      th += h / 6 * (k1t + 2 * k2t + 2 * k3t + k4t);
      om += h / 6 * (k1o + 2 * k2o + 2 * k3o + k4o);
    }
    CHECK(s.q[0] == doctest::Approx(th).epsilon(2e-3));
  }

  TEST_CASE("PD torques clamp exactly at the limits") {
    const RobotModel m = default_model();
    const SimState s = make_state(m, full_configuration(m, 0, 1, 0, m.nominal_pose));
    // 10x the limit in both directions.
    for (double sign : {1.0, -1.0}) {
      PdCommand pd = PdCommand::with_model_gains(m, m.nominal_pose);
      for (int j = 0; j < m.num_joints(); ++j) pd.target[j] += sign * 10.0 * m.joints[j].torque_limit / m.joints[j].kp;
      const Eigen::VectorXd tau = pd_torques(m, s, pd);
      for (int j = 0; j < m.num_joints(); ++j) CHECK(tau[j] == sign * m.joints[j].torque_limit);
    }
    PdCommand bad = PdCommand::with_model_gains(m, m.nominal_pose);
    bad.target.resize(3);
    CHECK_THROWS_AS(pd_torques(m, s, bad), ContractError);
  }

  TEST_CASE("applied torques never exceed the limits over long random runs") {
    const RobotModel m = testutil::stiff_model();
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd q = full_configuration(m, 0, 0, 0, m.nominal_pose);
    q[1] = ground_base_height(m, q, 0.0);
    SimState s = make_state(m, q);
    PdCommand pd = PdCommand::with_model_gains(m, m.nominal_pose);
    const Eigen::VectorXd lim = m.torque_limits();
    bool within = true;
    for (int k = 0; k < 100000; ++k) {
      if (k % 200 == 0)
        for (int j = 0; j < m.num_joints(); ++j)
          pd.target[j] = m.joints[j].lower + u(rng) * (m.joints[j].upper - m.joints[j].lower);
      s = step(m, s, pd, {});
      within = within && (s.tau.cwiseAbs() - lim).maxCoeff() <= 0.0;
    }
    CHECK(within);
  }

  TEST_CASE("identical inputs give bit-identical trajectories") {
    const RobotModel m = default_model();
    auto run = [&] {
      Eigen::VectorXd q = full_configuration(m, 0, 0, 0, m.nominal_pose);
      q[1] = ground_base_height(m, q, 0.01);
      SimState s = make_state(m, q);
      const PdCommand pd = PdCommand::with_model_gains(m, m.nominal_pose);
      for (int k = 0; k < 800; ++k) s = step(m, s, pd, {});
      return s;
    };
    const SimState a = run(), b = run();
    CHECK(a.q == b.q);
    CHECK(a.qd == b.qd);
    CHECK(a.tau == b.tau);
  }

  TEST_CASE("normal forces are non-negative and vanish off the ground") {
    const RobotModel m = testutil::stiff_model();
    Eigen::VectorXd q = full_configuration(m, 0, 0, 0, m.nominal_pose);
    q[1] = ground_base_height(m, q, 0.02);
    SimState s = make_state(m, q);
    const PdCommand pd = PdCommand::with_model_gains(m, m.nominal_pose);
    bool nonneg = true, zero_above = true, touched = false;
    double late_force = 0.0;
    for (int k = 0; k < 3000; ++k) {
      s = step(m, s, pd, {});
      const auto pts = contact_points_world(m, s.q);
      for (size_t c = 0; c < pts.size(); ++c) {
        nonneg = nonneg && s.contacts[c].normal_force >= 0.0;
        if (pts[c].y() > 0.0) zero_above = zero_above && s.contacts[c].normal_force == 0.0;
        touched = touched || s.contacts[c].normal_force > 0.0;
      }
      if (k >= 2000) late_force += (s.feet[0].normal_force + s.feet[1].normal_force) / 1000.0;
    }
    CHECK(nonneg);
    CHECK(zero_above);
    CHECK(touched);
    // Once settled the feet carry the body weight on average.
    CHECK(late_force == doctest::Approx(m.total_mass * m.gravity).epsilon(0.02));
  }

  TEST_CASE("swing timers count air time and reset at touchdown") {
    const RobotModel m = testutil::stiff_model();
    Eigen::VectorXd q = full_configuration(m, 0, 0, 0, m.nominal_pose);
    q[1] = ground_base_height(m, q, 0.03);
    SimState s = make_state(m, q);
    const PdCommand pd = PdCommand::with_model_gains(m, m.nominal_pose);
    int k = 0;
    double expected = 0.0;
    bool consistent = true;
    while (!s.feet[0].in_contact && k < 1000) {
      s = step(m, s, pd, {});
      ++k;
      if (!s.feet[0].in_contact) {
        expected += 1e-3;
        consistent = consistent && std::abs(s.feet[0].air_time - expected) < 1e-12;
      }
    }
    REQUIRE(s.feet[0].in_contact);
    CHECK(consistent);
    CHECK(s.feet[0].touchdown);
    CHECK(s.feet[0].touchdown_air_time == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.feet[0].air_time == 0.0);
    // About sqrt(2 h / g) for a 3 cm drop.
    CHECK(expected == doctest::Approx(std::sqrt(2 * 0.03 / 9.81)).epsilon(0.05));
  }

  TEST_CASE("non-finite states raise a divergence error with the prior state") {
    const RobotModel m = default_model();
    SimState s = make_state(m, full_configuration(m, 0, 1, 0, m.nominal_pose));
    s.qd[4] = std::numeric_limits<double>::quiet_NaN();
    try {
      step(m, s, PdCommand::zero_gains(m), {});
      FAIL("expected divergence");
    } catch (const SimulationDiverged& e) {
      CHECK(std::isnan(e.prior_state().qd[4]));
      CHECK(e.prior_state().q == s.q);
    }
    SimState short_state = s;
    short_state.q.resize(4);
    CHECK_THROWS_AS(step(m, short_state, PdCommand::zero_gains(m), {}), ContractError);
  }

  TEST_CASE("impulses change linear momentum by the impulse") {
    const RobotModel m = default_model();
    const SimState s = airborne_state(m, 31, 0.2);
    StepOptions opt;
    opt.contact = false;
    const PdCommand pd = PdCommand::zero_gains(m);
    const Vec2 p0 = linear_momentum(m, s.q, s.qd);
    const Vec2 gravity_dt(0.0, -m.total_mass * m.gravity * opt.dt);

    Impulse lin;
    lin.linear = Vec2(12.0, -4.0);
    const SimState a = step(m, s, pd, std::span<const Impulse>(&lin, 1), opt);
    CHECK((linear_momentum(m, a.q, a.qd) - p0 - lin.linear - gravity_dt).norm() < 1e-9);

    Impulse ang;
    ang.angular = 6.0;
    const SimState b = step(m, s, pd, std::span<const Impulse>(&ang, 1), opt);
    CHECK((linear_momentum(m, b.q, b.qd) - p0 - gravity_dt).norm() < 1e-9);
    const SimState c = step(m, s, pd, {}, opt);
    CHECK(b.qd[2] > c.qd[2]);

    Impulse late = lin;
    late.time = 0.5;  // outside this step
    const SimState d = step(m, s, pd, std::span<const Impulse>(&late, 1), opt);
    CHECK(d.qd == c.qd);
  }

  TEST_CASE("a rigid foot resting at static penetration stays put") {
    const json doc = json::parse(R"({
      "model_schema": 1, "gravity": 9.81, "base": {"type": "floating"},
      "links": [{"name": "block", "mass": 10.0, "length": 0.2, "inertia": 0.05, "com": [0.0, 0.0]}],
      "joints": [],
      "feet": [{"name": "sole", "link": "block", "points": [[-0.1, -0.05], [0.1, -0.05]]}]
    })");
    const RobotModel m = build_model(doc);
    const double penetration = m.total_mass * m.gravity / (2.0 * m.ground.stiffness);
    Eigen::VectorXd q(3);
    q << 0.0, 0.05 - penetration, 0.0;
    SimState s = make_state(m, q);
    const PdCommand pd = PdCommand::zero_gains(m);
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
      s = step(m, s, pd, {});
      worst = std::max(worst, std::abs(s.q[1] - q[1]));
    }
    CHECK(worst < 1e-4);
    CHECK(std::abs(s.q[2]) < 1e-9);
  }

  TEST_CASE("trajectory dump writes the documented columns") {
    const RobotModel m = default_model();
    CHECK(TrajectoryDump::header(m).rfind("t,q0,", 0) == 0);
    std::ostringstream out;
    TrajectoryDump dump(out, m);
    SimState s = make_state(m, full_configuration(m, 0, 1, 0, m.nominal_pose));
    for (int k = 0; k < 3; ++k) {
      s = step(m, s, PdCommand::zero_gains(m), {});
      dump.write(s);
    }
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    const std::string header = line;
    CHECK(header.find(",qd12,tau0,") != std::string::npos);
    CHECK(header.size() >= 6);
    CHECK(header.compare(header.size() - 6, 6, ",Fl,Fr") == 0);
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      CHECK(std::count(line.begin(), line.end(), ',') == 1 + 13 + 13 + 10 + 2 - 1);
    }
    CHECK(rows == 3);
  }
}
