#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "gaitlab/model.hpp"

namespace gaitlab {

inline constexpr int kGaitSchemaVersion = 1;
inline constexpr int kBezierDegree = 5;
/// Foot reference samples per stride, phase 0 and 1 included.
inline constexpr int kFootSamples = 101;

/// Diagnostics of the stride rollout that produced a gait.
struct GaitDiagnostics {
  double objective = 0.0;
  bool feasible = false;
  bool fell = false;
  double fall_time = 0.0;     // s into the stride, 0 when upright
  double mean_speed = 0.0;    // CoM displacement over the stride / T
  double work_per_distance = 0.0;  // J / (kg g m), the cost-of-transport integrand
  double periodicity = 0.0;   // scaled mismatch of the mirrored state
  double clearance = 0.0;     // min swing-foot height in mid swing (m)
  int evaluations = 0;
};

/// One periodic reference gait. Joint trajectories are degree-5 Bezier curves
/// over the first half-stride (phase 0..0.5, left stance); the second half is
/// the same curves with left and right swapped.
struct ReferenceGait {
  double command = 0.0;  // m/s
  double period = 0.0;   // stride period T (s), two steps
  Eigen::MatrixXd coeffs;       // joints x (degree + 1)
  std::vector<int> mirror;      // joint -> joint on the other side
  Eigen::MatrixXd foot_samples; // kFootSamples x (2 * feet), CoM-relative (x, z) per foot
  GaitDiagnostics diagnostics;

  int num_joints() const { return static_cast<int>(coeffs.rows()); }
  /// Phase in [0, 1]; values outside wrap.
  Eigen::VectorXd joints(double phase) const;
  /// d q* / d phase.
  Eigen::VectorXd joint_rates(double phase) const;
  /// CoM-relative foot positions, linearly interpolated between samples.
  std::vector<Vec2> feet(double phase) const;
};

/// Largest joint position or rate mismatch between the stride end and start,
/// and across the half-stride swap.
double periodicity_residual(const ReferenceGait& gait);

struct GaitLibrary {
  std::string model_hash;
  std::vector<std::string> joint_names;
  std::vector<ReferenceGait> gaits;  // strictly increasing command
  std::vector<double> gaps;          // grid commands with no feasible gait

  bool empty() const { return gaits.empty(); }
  std::vector<double> grid() const;
};

struct GaitQuery {
  Eigen::VectorXd joints;   // q*
  std::vector<Vec2> feet;   // x*
  double period = 0.0;      // T_gait
};

/// Blend of the two grid gaits bracketing `command` (clamped to the grid).
GaitQuery query(const GaitLibrary& lib, double command, double phase);
/// Blended stride period only.
double query_period(const GaitLibrary& lib, double command);

/// Recomputes `foot_samples` from the joint curves with the torso level.
void sample_feet(const RobotModel& model, ReferenceGait& gait);

/// Joint mirror map from the model's role/side annotations.
std::vector<int> mirror_map(const RobotModel& model);

/// Checks the library's structural invariants, throwing ValidationError.
void validate_library(const GaitLibrary& lib);

nlohmann::json library_to_json(const GaitLibrary& lib);
GaitLibrary library_from_json(const nlohmann::json& doc);

void save_library(const GaitLibrary& lib, const std::filesystem::path& path);
/// Loads and checks that the library was built for `model`.
GaitLibrary load_library(const std::filesystem::path& path, const RobotModel& model);
GaitLibrary load_library(const std::filesystem::path& path);

bool operator==(const ReferenceGait& a, const ReferenceGait& b);
bool operator==(const GaitLibrary& a, const GaitLibrary& b);

}  // namespace gaitlab
