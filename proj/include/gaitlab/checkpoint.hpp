#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>

#include "gaitlab/policy.hpp"

namespace gaitlab {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Policy parameters plus the metadata needed to evaluate them standalone
/// (network shape, run config, robot model, gait library, hashes).
struct Checkpoint {
  nlohmann::json meta;
  Eigen::VectorXf params;

  NetworkShape shape() const { return NetworkShape::from_json(meta.at("network")); }
  ActorCritic<float> policy() const;
  /// Hash of the file contents as written.
  std::string hash;
};

/// Binary layout: magic "GAITCKPT", u32 schema, u64 metadata length, metadata
/// JSON, u64 parameter count, float32 parameters, u64 FNV-1a of all preceding
/// bytes. Little-endian.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gaitlab
