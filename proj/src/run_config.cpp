#include "gaitlab/run_config.hpp"

#include "gaitlab/errors.hpp"
#include "gaitlab/hash.hpp"
#include "gaitlab/io.hpp"

namespace gaitlab {

using nlohmann::json;

namespace {

std::string string_at(const json& v, const std::string& path) {
  if (!v.is_string()) throw ParseError(path, "expected a string");
  return v.get<std::string>();
}

int int_at(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError(path, "expected an integer");
  return v.get<int>();
}

}  // namespace

RewardConfig RunConfig::rewards() const {
  RewardConfig r = RewardConfig::from_json(reward_overrides, gaitlab::preset(preset));
  r.t_max = episode.t_max;
  return r;
}

void RunConfig::validate() const {
  if (model.empty()) throw ConfigError("model must name a file or 'default'");
  rewards().validate();
  ppo.validate();
  episode.validate();
  if (network.obs_size != obs::kSize) throw ConfigError("network.obs_size must be 38");
  if (network.hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (int h : network.hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
}

json RunConfig::to_json() const {
  return {{"run_schema", kRunConfigSchemaVersion},
          {"model", model},
          {"library", library},
          {"preset", preset},
          {"reward_overrides", reward_overrides},
          {"ppo", ppo.to_json()},
          {"episode", episode.to_json()},
          {"network", network.to_json()},
          {"seed", seed},
          {"iterations", iterations},
          {"checkpoint_every", checkpoint_every},
          {"out", out}};
}

RunConfig RunConfig::from_json(const json& doc, const RunConfig& base) {
  if (!doc.is_object()) throw ParseError("config", "expected an object");
  RunConfig c = base;
  for (const auto& [key, v] : doc.items()) {
    if (key == "run_schema") {
      if (int_at(v, key) != kRunConfigSchemaVersion) throw ParseError(key, "unsupported run config schema");
    } else if (key == "model") {
      c.model = string_at(v, key);
    } else if (key == "library") {
      c.library = v.is_null() ? std::string() : string_at(v, key);
    } else if (key == "preset") {
      c.preset = string_at(v, key);
    } else if (key == "reward_overrides") {
      if (!v.is_object()) throw ParseError(key, "expected an object");
      c.reward_overrides = v;
    } else if (key == "ppo") {
      c.ppo = PpoConfig::from_json(v, c.ppo);
    } else if (key == "episode") {
      c.episode = EpisodeConfig::from_json(v, c.episode);
    } else if (key == "network") {
      try {
        json merged = c.network.to_json();
        if (!v.is_object()) throw ParseError(key, "expected an object");
        for (const auto& [k, x] : v.items()) {
          if (!merged.contains(k)) throw ParseError("network." + k, "unknown key");
          merged[k] = x;
        }
        c.network = NetworkShape::from_json(merged);
      } catch (const json::exception& e) {
        throw ParseError(key, e.what());
      }
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) throw ParseError(key, "expected a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "iterations") {
      c.iterations = int_at(v, key);
    } else if (key == "checkpoint_every") {
      c.checkpoint_every = int_at(v, key);
    } else if (key == "out") {
      c.out = string_at(v, key);
    } else {
      throw ParseError(key, "unknown key");
    }
  }
  return c;
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("out");
  return content_hash(j.dump());
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return RunConfig::from_json(doc, base);
}

RunInputs resolve_inputs(const RunConfig& cfg) {
  cfg.validate();
  RunInputs in;
  in.rewards = cfg.rewards();
  if (in.rewards.needs_gait_library() && cfg.library.empty())
    throw ConfigError("preset '" + cfg.preset + "' has imitation terms and needs a gait library (--library)");
  auto model = std::make_shared<RobotModel>(load_model_spec(cfg.model));
  if (!cfg.library.empty()) in.library = std::make_shared<GaitLibrary>(load_library(cfg.library, *model));
  if (in.rewards.needs_gait_library() && in.library->empty())
    throw ConfigError("gait library '" + cfg.library + "' has no gaits");
  in.model = std::move(model);
  return in;
}

}  // namespace gaitlab
