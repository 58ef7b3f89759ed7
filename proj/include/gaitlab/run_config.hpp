#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "gaitlab/env.hpp"
#include "gaitlab/gait.hpp"
#include "gaitlab/model.hpp"
#include "gaitlab/policy.hpp"
#include "gaitlab/ppo.hpp"
#include "gaitlab/rewards.hpp"

namespace gaitlab {

inline constexpr int kRunConfigSchemaVersion = 1;

/// One training run: inputs, hyperparameters, seed and output directory.
struct RunConfig {
  std::string model = "default";  // "default" or a model file path
  std::string library;            // gait library path, empty for none
  std::string preset = "gait2";
  nlohmann::json reward_overrides = nlohmann::json::object();
  PpoConfig ppo;
  EpisodeConfig episode;
  NetworkShape network;
  std::uint64_t seed = 1;
  int iterations = 1500;
  int checkpoint_every = 100;
  std::string out = "runs/gait2";

  /// Preset weights with overrides applied; t_max follows the episode.
  RewardConfig rewards() const;
  void validate() const;
  nlohmann::json to_json() const;
  /// Overlays `doc` on `base`; unknown keys are errors.
  static RunConfig from_json(const nlohmann::json& doc, const RunConfig& base);
  /// Hash of everything that affects results (the output directory excluded).
  std::string hash() const;
};

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});

/// Resolved inputs of a run. Checks file existence and preset/library consistency.
struct RunInputs {
  std::shared_ptr<const RobotModel> model;
  std::shared_ptr<const GaitLibrary> library;  // null without a library
  RewardConfig rewards;
};
RunInputs resolve_inputs(const RunConfig& cfg);

}  // namespace gaitlab
