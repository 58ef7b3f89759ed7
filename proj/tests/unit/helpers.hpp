#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>

#include "gaitlab/env.hpp"
#include "gaitlab/eval.hpp"
#include "gaitlab/gait_optimizer.hpp"
#include "gaitlab/model.hpp"
#include "gaitlab/rewards.hpp"

namespace testutil {

using namespace gaitlab;

/// Default biped with joint gains high enough to stand passively. Damping is
/// kept per role so that the explicit PD stays stable on the light links.
inline RobotModel stiff_model() {
  auto doc = nlohmann::json::parse(default_model_text());
  for (auto& j : doc["joints"]) {
    const std::string role = j["role"];
    const double kp = role == "ankle" ? 1200.0 : role == "shoulder" ? 300.0 : role == "elbow" ? 150.0 : 2000.0;
    const double kd = role == "hip" ? 40.0 : role == "knee" ? 25.0 : role == "ankle" ? 8.0 : role == "shoulder" ? 6.0 : 3.0;
    j["kp"] = kp;
    j["kd"] = kd;
  }
  return build_model(doc);
}

/// Library of unoptimized template gaits on the full grid (cheap to build).
inline GaitLibrary template_library(const RobotModel& m) {
  GaitLibrary lib;
  lib.model_hash = m.hash;
  for (const auto& j : m.joints) lib.joint_names.push_back(j.name);
  for (int i = 0; i <= 10; ++i) lib.gaits.push_back(initial_gait(m, 0.1 * i));
  return lib;
}

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("gaitlab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> N(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = N(rng);
  return v;
}

/// Always outputs zeros: holds the nominal pose.
struct ZeroPolicy : Policy {
  Eigen::VectorXd act(const Eigen::VectorXd&) const override { return Eigen::VectorXd::Zero(10); }
};

inline EvalSetup stiff_setup(const std::string& preset_name = "gait3") {
  EvalSetup s;
  s.model = std::make_shared<RobotModel>(stiff_model());
  s.rewards = preset(preset_name);
  s.episode = evaluation_episode(EpisodeConfig{});
  return s;
}

// One column of the published weight table, transcribed independently of the implementation.
inline std::map<Term, double> weight_table_column(const std::string& name) {
  if (name == "gait1") return {{Term::imitation_joints, 5.0}, {Term::imitation_feet, 5.0}};
  std::map<Term, double> c = {
      {Term::imitation_joints, 5.0}, {Term::imitation_feet, 0.0}, {Term::tracking_lin_vel, 1.5},
      {Term::tracking_ang_vel, 1.5}, {Term::no_fly, 0.1},         {Term::feet_air_time, 3.0},
      {Term::action_rate, -3e-3},    {Term::dof_vel_limit, -0.01}, {Term::termination, -30.0},
      {Term::dof_pos_limit, -0.95},  {Term::orientation, -1.0},    {Term::lin_vel_z, -1.5},
      {Term::torques, -8e-6}};
  if (name == "gait3") {
    c[Term::imitation_joints] = 0.0;
    c[Term::tracking_lin_vel] = 0.4;
    c[Term::tracking_ang_vel] = 0.3;
    c[Term::no_fly] = 0.4;
    c[Term::action_rate] = -5e-4;
  }
  return c;
}

}  // namespace testutil
