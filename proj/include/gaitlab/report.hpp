#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gaitlab/eval.hpp"
#include "gaitlab/trainer.hpp"

namespace gaitlab {

inline constexpr int kReportSchemaVersion = 1;

/// Everything one `eval` run measured, plus where it came from.
struct EvalReport {
  std::string checkpoint_hash;
  std::string config_hash;
  std::string model_hash;
  std::string preset;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::optional<VelocityResponse> velocity;
  PushGrid push_grid;
  std::vector<PushSummary> push;
  std::optional<CotResult> cot;
  std::string cot_failure;
  std::vector<TransferRow> transfer;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& doc);
};

/// Transfer rows compare against perturbed physics in the same simulator,
/// not a second engine; the report says so.
inline constexpr const char* kTransferNote =
    "transfer rows re-run the suites in this simulator with perturbed friction, mass, PD gains and "
    "sensor noise; no second physics engine is involved";

void save_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

/// t,vx_command,vx_measured
std::string velocity_csv(const VelocityResponse& v);
/// preset,regime,samples,rate (one row per preset and regime)
std::string recovery_csv(const std::vector<EvalReport>& reports);
/// perturbation rows with the headline metrics
std::string transfer_csv(const EvalReport& r);
/// One column per report, one row per headline metric.
std::string comparison_csv(const std::vector<EvalReport>& reports);

/// Writes report.json and the CSV files next to it.
void write_report_files(const EvalReport& r, const std::filesystem::path& dir);

/// iteration,mean_episode_length,episodes,fall_rate,mean_step_reward,kl,surrogate,value_loss,entropy,learning_rate,clip_fraction
std::string train_log_header();
std::string train_log_row(const IterationLog& log);
/// iteration,<term>...
std::string reward_means_header(const std::vector<std::string>& terms);
std::string reward_means_row(const IterationLog& log);

/// Long-format merge of per-run reward_means.csv files: preset,iteration,term,value.
std::string merge_reward_means(const std::vector<std::pair<std::string, std::filesystem::path>>& runs);

}  // namespace gaitlab
