#include <doctest.h>

#include <cmath>
#include <map>

#include "gaitlab/gait.hpp"
#include "gaitlab/rewards.hpp"
#include "helpers.hpp"

using namespace gaitlab;

namespace {

const RobotModel& biped() {
  static const RobotModel m = default_model();
  return m;
}

// Inputs standing still at the nominal pose with both feet loaded.
RewardInputs resting_inputs() {
  const RobotModel& m = biped();
  RewardInputs in;
  in.joint_pos = m.nominal_pose;
  in.joint_vel = Eigen::VectorXd::Zero(m.num_joints());
  in.tau = Eigen::VectorXd::Zero(m.num_joints());
  in.feet = {Vec2(0.05, -0.9), Vec2(0.05, -0.9)};
  in.foot_force = {300.0, 300.0};
  return in;
}

GaitQuery matching_reference(const RewardInputs& in) {
  GaitQuery ref;
  ref.joints = in.joint_pos;
  ref.feet = in.feet;
  ref.period = 1.0;
  return ref;
}

RewardBreakdown eval(const RewardInputs& in, const RewardConfig& cfg, const Command& cmd = {},
                     const Eigen::VectorXd& prev = Eigen::VectorXd::Zero(10),
                     const Eigen::VectorXd& act = Eigen::VectorXd::Zero(10)) {
  const GaitQuery ref = matching_reference(in);
  return evaluate(in, biped(), prev, act, cmd, &ref, cfg);
}

}  // namespace

TEST_SUITE("rewards") {
  TEST_CASE("imitation closed forms") {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(3), ref = Eigen::VectorXd::Zero(3);
    CHECK(imitation_joints(q, ref, 5.0) == 5.0);
    q[1] = std::sqrt(0.2);
    CHECK(imitation_joints(q, ref, 5.0) == doctest::Approx(5.0 / std::exp(1.0)).epsilon(1e-12));
    CHECK(imitation_joints(q, ref, 5.0) == doctest::Approx(1.83940).epsilon(1e-5));
    CHECK(imitation_joints(q, ref, 0.0) == 0.0);
    CHECK_THROWS_AS(imitation_joints(Eigen::VectorXd::Zero(2), ref, 5.0), ContractError);

    const std::vector<Vec2> x{Vec2(0.1, -0.8), Vec2(-0.2, -0.85)};
    CHECK(imitation_feet(x, x, 5.0) == 5.0);
    // 0.03 + 0.02 + 0.04 + 0.01 = 0.1 of L1 error.
    const std::vector<Vec2> y{Vec2(0.13, -0.82), Vec2(-0.24, -0.84)};
    CHECK(imitation_feet(x, y, 5.0) == doctest::Approx(5.0 / std::exp(1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(imitation_feet({Vec2::Zero()}, {Vec2::Zero()}, 5.0), ContractError);
  }

  TEST_CASE("exponential terms are bounded by their weight and fall with the error") {
    double last_t = 1e9, last_j = 1e9;
    for (int k = 0; k <= 50; ++k) {
      const double e = 0.05 * k;
      const double t = tracking(e, 1.5, 0.25);
      Eigen::VectorXd q = Eigen::VectorXd::Constant(1, e);
      const double j = imitation_joints(q, Eigen::VectorXd::Zero(1), 5.0);
      CHECK(t > 0.0);
      CHECK(t <= 1.5);
      CHECK(j > 0.0);
      CHECK(j <= 5.0);
      if (k > 0) {
        CHECK(t < last_t);
        CHECK(j < last_j);
      }
      last_t = t;
      last_j = j;
    }
  }

  TEST_CASE("presets reproduce the weight table") {
    for (const auto& name : preset_names()) {
      const RewardConfig cfg = preset(name);
      const auto column = testutil::weight_table_column(name);
      for (int i = 0; i < kNumTerms; ++i) {
        const Term t = static_cast<Term>(i);
        const auto it = column.find(t);
        CHECK_MESSAGE(cfg.weight(t) == (it == column.end() ? 0.0 : it->second), name << " " << term_name(t));
      }
      CHECK_NOTHROW(cfg.validate());
    }
    CHECK(preset("gait1").weight(Term::tracking_lin_vel) == 0.0);
    CHECK(preset("gait2").weight(Term::action_rate) == -3e-3);
    CHECK(preset("gait3").imitation_weight() == 0.0);
    CHECK(preset("gait1").needs_gait_library());
    CHECK(preset("gait2").needs_gait_library());
    CHECK_FALSE(preset("gait3").needs_gait_library());
    try {
      preset("gait4");
      FAIL("expected an error");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("gait1") != std::string::npos);
      CHECK(msg.find("gait3") != std::string::npos);
    }
  }

  TEST_CASE("evaluate closed forms") {
    const RewardConfig g2 = preset("gait2"), g3 = preset("gait3");
    RewardInputs in = resting_inputs();
    Command cmd;
    cmd.lin_x = 0.4;
    in.lin_vel = Vec2(0.4, 0.0);
    CHECK(eval(in, g2, cmd)[Term::tracking_lin_vel] == 1.5);
    // Yaw is fixed in the plane, so angular tracking always pays its weight.
    CHECK(eval(in, g2, cmd)[Term::tracking_ang_vel] == 1.5);
    in.lin_vel = Vec2(0.15, 0.0);
    CHECK(eval(in, g2, cmd)[Term::tracking_lin_vel] == doctest::Approx(1.5 / std::exp(1.0)).epsilon(1e-12));

    CHECK(eval(in, g2)[Term::no_fly] == 0.0);
    in.foot_force = {250.0, 0.05};
    CHECK(eval(in, g2)[Term::no_fly] == 0.1);
    CHECK(eval(in, g3)[Term::no_fly] == 0.4);
    in.foot_force = {0.0, 0.0};
    CHECK(eval(in, g3)[Term::no_fly] == 0.0);

    in = resting_inputs();
    in.tau = Eigen::VectorXd::Zero(10);
    in.tau[0] = 60.0;
    in.tau[3] = 80.0;  // |tau|^2 = 1e4
    CHECK(eval(in, g2)[Term::torques] == doctest::Approx(-0.08).epsilon(1e-12));

    in = resting_inputs();
    in.touchdowns = {0.45, 0.2};
    CHECK(eval(in, g2)[Term::feet_air_time] == doctest::Approx(3.0 * (0.15 - 0.1)).epsilon(1e-12));

    Eigen::VectorXd prev = Eigen::VectorXd::Zero(10), act = Eigen::VectorXd::Zero(10);
    act[2] = 2.0;
    CHECK(eval(resting_inputs(), g2, {}, prev, act)[Term::action_rate] == doctest::Approx(-3e-3 * 4.0));

    in = resting_inputs();
    in.joint_vel[0] = biped().joints[0].velocity_limit + 2.0;
    in.joint_pos[1] = biped().joints[1].upper + 0.1;
    in.joint_pos[2] = biped().joints[2].lower - 0.3;
    const RewardBreakdown lim = eval(in, g2);
    CHECK(lim[Term::dof_vel_limit] == doctest::Approx(-0.01 * 2.0));
    CHECK(lim[Term::dof_pos_limit] == doctest::Approx(-0.95 * 0.4));

    in = resting_inputs();
    in.fell = true;
    in.lin_vel = Vec2(0.0, -0.5);
    in.gravity_body = Vec2(-std::sin(0.3), -std::cos(0.3));
    const RewardBreakdown fall = eval(in, g2);
    CHECK(fall[Term::termination] == -30.0);
    CHECK(fall[Term::lin_vel_z] == doctest::Approx(-1.5 * 0.25));
    CHECK(fall[Term::orientation] == doctest::Approx(-std::pow(std::sin(0.3), 2)));
  }

  TEST_CASE("state-derived inputs") {
    const RobotModel& m = biped();
    Eigen::VectorXd q = full_configuration(m, 0.0, 1.0, 0.2, m.nominal_pose);
    const SimState s = make_state(m, q);
    const RewardInputs in = gather_inputs(m, s, false);
    CHECK(in.gravity_body.x() == doctest::Approx(-std::sin(0.2)));
    CHECK(in.gravity_body.norm() == doctest::Approx(1.0));
    CHECK(in.joint_pos == m.nominal_pose);
    CHECK(in.feet.size() == 2);
    CHECK(in.yaw_rate == 0.0);
  }

  TEST_CASE("penalties are never positive and totals equal the sum of terms") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& name : preset_names()) {
      const RewardConfig cfg = preset(name);
      for (int trial = 0; trial < 300; ++trial) {
        RewardInputs in = resting_inputs();
        in.joint_pos += 1.5 * testutil::random_vector(rng, 10, 1.0);
        in.joint_vel = testutil::random_vector(rng, 10, 15.0);
        in.tau = testutil::random_vector(rng, 10, 200.0);
        in.feet = {Vec2(n01(rng), n01(rng)), Vec2(n01(rng), n01(rng))};
        in.foot_force = {u(rng) < 0.5 ? 0.0 : 300 * u(rng), u(rng) < 0.5 ? 0.0 : 300 * u(rng)};
        if (u(rng) < 0.3) in.touchdowns = {u(rng)};
        in.lin_vel = Vec2(n01(rng), n01(rng));
        const double pitch = n01(rng);
        in.gravity_body = Vec2(-std::sin(pitch), -std::cos(pitch));
        in.fell = u(rng) < 0.2;
        Command cmd;
        cmd.lin_x = u(rng);
        const Eigen::VectorXd prev = testutil::random_vector(rng, 10, 1.0);
        const Eigen::VectorXd act = testutil::random_vector(rng, 10, 1.0);
        GaitQuery ref = matching_reference(resting_inputs());
        const RewardBreakdown b = evaluate(in, biped(), prev, act, cmd, &ref, cfg);
        const RewardBreakdown again = evaluate(in, biped(), prev, act, cmd, &ref, cfg);
        CHECK(b.values == again.values);
        CHECK(b.total == again.total);
        double sum = 0.0;
        for (int i = 0; i < kNumTerms; ++i) {
          sum += b.values[i];
          if (is_penalty(static_cast<Term>(i))) CHECK(b.values[i] <= 0.0);
          if (cfg.weights[i] == 0.0) CHECK(b.values[i] == 0.0);
        }
        CHECK(std::abs(sum - b.total) < 1e-12);
        if (name == "gait1")
          CHECK(b.total == b[Term::imitation_joints] + b[Term::imitation_feet]);
      }
    }
  }

  TEST_CASE("imitation needs a reference, other presets do not") {
    const RewardInputs in = resting_inputs();
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(evaluate(in, biped(), z, z, {}, nullptr, preset("gait2")), ContractError);
    CHECK_NOTHROW(evaluate(in, biped(), z, z, {}, nullptr, preset("gait3")));
    CHECK_THROWS_AS(evaluate(in, biped(), z, Eigen::VectorXd::Zero(3), {}, nullptr, preset("gait3")), ContractError);
  }

  TEST_CASE("config overrides are validated") {
    const nlohmann::json doc = {{"weights", {{"torques", -1e-5}}}, {"sigma_lin", 0.5}};
    const RewardConfig c = RewardConfig::from_json(doc, preset("gait2"));
    CHECK(c.weight(Term::torques) == -1e-5);
    CHECK(c.sigma_lin == 0.5);
    CHECK(c.weight(Term::no_fly) == 0.1);
    CHECK(RewardConfig::from_json(c.to_json(), RewardConfig{}).weights == c.weights);
    CHECK_THROWS_AS(RewardConfig::from_json({{"weights", {{"bogus", 1.0}}}}, c), ParseError);
    CHECK_THROWS_AS(RewardConfig::from_json({{"weights", {{"torques", 1.0}}}}, c), ValidationError);
    CHECK_THROWS_AS(RewardConfig::from_json({{"weights", {{"no_fly", -1.0}}}}, c), ValidationError);
    CHECK_THROWS_AS(RewardConfig::from_json({{"nonsense", 1}}, c), ParseError);
    for (int i = 0; i < kNumTerms; ++i) CHECK(term_from_name(term_name(static_cast<Term>(i))) == static_cast<Term>(i));
  }

  TEST_CASE("episode means are per-step averages") {
    EpisodeRewardMeans means;
    RewardBreakdown a, b;
    a.values[index(Term::no_fly)] = 0.1;
    b.values[index(Term::no_fly)] = 0.3;
    b.values[index(Term::torques)] = -0.2;
    means.add(a);
    means.add(b);
    CHECK(means.steps() == 2);
    CHECK(means.means()[index(Term::no_fly)] == doctest::Approx(0.2));
    CHECK(means.means()[index(Term::torques)] == doctest::Approx(-0.1));
    means.reset();
    CHECK(means.steps() == 0);
    CHECK(means.means()[index(Term::no_fly)] == 0.0);
  }
}
