#include "gaitlab/gait.hpp"

#include <algorithm>
#include <cmath>

#include "gaitlab/bezier.hpp"
#include "gaitlab/dynamics.hpp"
#include "gaitlab/io.hpp"
#include "gaitlab/kinematics.hpp"

namespace gaitlab {

using nlohmann::json;

namespace {

double wrap_phase(double phase) {
  if (phase >= 0.0 && phase <= 1.0) return phase;
  double p = std::fmod(phase, 1.0);
  if (p < 0.0) p += 1.0;
  return p;
}

// Half-stride coordinate s in [0, 1] and whether legs are swapped.
std::pair<double, bool> half_stride(double phase) {
  const double p = wrap_phase(phase);
  if (p <= 0.5) return {2.0 * p, false};
  return {2.0 * p - 1.0, true};
}

std::span<const double> row_span(const Eigen::MatrixXd& m, int r, std::vector<double>& buf) {
  buf.resize(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) buf[c] = m(r, c);
  return buf;
}

}  // namespace

Eigen::VectorXd ReferenceGait::joints(double phase) const {
  const auto [s, swapped] = half_stride(phase);
  const int nj = num_joints();
  Eigen::VectorXd q(nj);
  std::vector<double> buf;
  for (int j = 0; j < nj; ++j) {
    const int src = swapped ? mirror[j] : j;
    q[j] = bezier(row_span(coeffs, src, buf), s);
  }
  return q;
}

Eigen::VectorXd ReferenceGait::joint_rates(double phase) const {
  const auto [s, swapped] = half_stride(phase);
  const int nj = num_joints();
  Eigen::VectorXd qd(nj);
  std::vector<double> buf;
  for (int j = 0; j < nj; ++j) {
    const int src = swapped ? mirror[j] : j;
    qd[j] = 2.0 * bezier_derivative(row_span(coeffs, src, buf), s);
  }
  return qd;
}

double periodicity_residual(const ReferenceGait& gait) {
  double r = (gait.joints(1.0) - gait.joints(0.0)).cwiseAbs().maxCoeff();
  r = std::max(r, (gait.joint_rates(1.0) - gait.joint_rates(0.0)).cwiseAbs().maxCoeff());
  // Just before and after the swap at phase 0.5.
  const auto a = gait.joints(0.5), b = gait.joints(std::nextafter(0.5, 1.0));
  const auto da = gait.joint_rates(0.5), db = gait.joint_rates(std::nextafter(0.5, 1.0));
  r = std::max(r, (a - b).cwiseAbs().maxCoeff());
  return std::max(r, (da - db).cwiseAbs().maxCoeff());
}

std::vector<Vec2> ReferenceGait::feet(double phase) const {
  const double p = wrap_phase(phase);
  const int nf = static_cast<int>(foot_samples.cols() / 2);
  std::vector<Vec2> out(nf, Vec2::Zero());
  if (foot_samples.rows() == 0) return out;
  const double u = p * (foot_samples.rows() - 1);
  const int i = std::min(static_cast<int>(u), static_cast<int>(foot_samples.rows()) - 2);
  const double w = u - i;
  for (int f = 0; f < nf; ++f) {
    const Vec2 a(foot_samples(i, 2 * f), foot_samples(i, 2 * f + 1));
    const Vec2 b(foot_samples(i + 1, 2 * f), foot_samples(i + 1, 2 * f + 1));
    out[f] = w == 0.0 ? a : (1.0 - w) * a + w * b;
  }
  return out;
}

std::vector<double> GaitLibrary::grid() const {
  std::vector<double> g;
  for (const auto& gait : gaits) g.push_back(gait.command);
  return g;
}

namespace {

// Index of the lower bracketing gait and the blend weight of the upper one.
std::pair<size_t, double> bracket(const GaitLibrary& lib, double command) {
  if (lib.gaits.empty()) throw Error("gait library is empty");
  const auto& g = lib.gaits;
  if (g.size() == 1 || command <= g.front().command) return {0, 0.0};
  if (command >= g.back().command) return {g.size() - 1, 0.0};
  size_t k = 0;
  while (k + 1 < g.size() && g[k + 1].command <= command) ++k;
  if (g[k].command == command) return {k, 0.0};
  return {k, (command - g[k].command) / (g[k + 1].command - g[k].command)};
}

}  // namespace

GaitQuery query(const GaitLibrary& lib, double command, double phase) {
  const auto [k, w] = bracket(lib, command);
  const ReferenceGait& a = lib.gaits[k];
  GaitQuery out;
  out.joints = a.joints(phase);
  out.feet = a.feet(phase);
  out.period = a.period;
  if (w == 0.0) return out;
  const ReferenceGait& b = lib.gaits[k + 1];
  out.joints = (1.0 - w) * out.joints + w * b.joints(phase);
  const auto fb = b.feet(phase);
  for (size_t f = 0; f < out.feet.size(); ++f) out.feet[f] = (1.0 - w) * out.feet[f] + w * fb[f];
  out.period = (1.0 - w) * a.period + w * b.period;
  return out;
}

double query_period(const GaitLibrary& lib, double command) {
  const auto [k, w] = bracket(lib, command);
  if (w == 0.0) return lib.gaits[k].period;
  return (1.0 - w) * lib.gaits[k].period + w * lib.gaits[k + 1].period;
}

std::vector<int> mirror_map(const RobotModel& model) {
  std::vector<int> m;
  for (const auto& j : model.joints) m.push_back(j.mirror);
  return m;
}

void sample_feet(const RobotModel& model, ReferenceGait& gait) {
  const int nf = static_cast<int>(model.feet.size());
  gait.foot_samples.resize(kFootSamples, 2 * nf);
  for (int i = 0; i < kFootSamples; ++i) {
    const double phase = static_cast<double>(i) / (kFootSamples - 1);
    Eigen::VectorXd q = model.floating_base ? full_configuration(model, 0.0, 0.0, 0.0, gait.joints(phase))
                                            : gait.joints(phase);
    const auto feet = foot_positions(model, q);
    for (int f = 0; f < nf; ++f) {
      gait.foot_samples(i, 2 * f) = feet[f].x();
      gait.foot_samples(i, 2 * f + 1) = feet[f].y();
    }
  }
}

void validate_library(const GaitLibrary& lib) {
  int nj = -1;
  for (size_t k = 0; k < lib.gaits.size(); ++k) {
    const ReferenceGait& g = lib.gaits[k];
    if (k > 0 && !(g.command > lib.gaits[k - 1].command))
      throw ValidationError("gait grid must be strictly increasing");
    if (!(g.period > 0.0)) throw ValidationError("gait period must be positive");
    if (g.coeffs.cols() != kBezierDegree + 1) throw ValidationError("gait coefficients must be degree 5");
    if (nj < 0) nj = g.num_joints();
    if (g.num_joints() != nj) throw ValidationError("all gaits must share the joint count");
    if (static_cast<int>(g.mirror.size()) != nj) throw ValidationError("mirror map length mismatch");
    for (int m : g.mirror)
      if (m < 0 || m >= nj) throw ValidationError("mirror map entry out of range");
    if (g.foot_samples.rows() < 2 || g.foot_samples.cols() % 2 != 0)
      throw ValidationError("foot samples malformed");
  }
  if (!lib.joint_names.empty() && nj >= 0 && static_cast<int>(lib.joint_names.size()) != nj)
    throw ValidationError("joint name list does not match the gaits");
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array of rows");
  const size_t rows = j.size();
  size_t cols = rows ? j[0].size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError(path, "ragged matrix");
    for (size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ParseError(path, "expected numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

const json& need(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing required key");
  return *it;
}

double num(const json& obj, const char* key, const std::string& path) {
  const json& v = need(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key, "expected a number");
  return v.get<double>();
}

}  // namespace

json library_to_json(const GaitLibrary& lib) {
  json doc;
  doc["gait_schema"] = kGaitSchemaVersion;
  doc["model_hash"] = lib.model_hash;
  doc["joint_names"] = lib.joint_names;
  doc["grid"] = lib.grid();
  doc["gaps"] = lib.gaps;
  json gaits = json::array();
  for (const auto& g : lib.gaits) {
    json e;
    e["command"] = g.command;
    e["period"] = g.period;
    e["mirror"] = g.mirror;
    e["coeffs"] = matrix_json(g.coeffs);
    e["foot_samples"] = matrix_json(g.foot_samples);
    const GaitDiagnostics& d = g.diagnostics;
    e["diagnostics"] = {{"objective", d.objective},
                        {"feasible", d.feasible},
                        {"fell", d.fell},
                        {"fall_time", d.fall_time},
                        {"mean_speed", d.mean_speed},
                        {"work_per_distance", d.work_per_distance},
                        {"periodicity", d.periodicity},
                        {"clearance", d.clearance},
                        {"evaluations", d.evaluations}};
    gaits.push_back(std::move(e));
  }
  doc["gaits"] = std::move(gaits);
  return doc;
}

GaitLibrary library_from_json(const json& doc) {
  const std::string root = "library";
  const json& schema = need(doc, "gait_schema", root);
  if (!schema.is_number_integer() || schema.get<int>() != kGaitSchemaVersion)
    throw ParseError(root + ".gait_schema", "unsupported schema version");
  GaitLibrary lib;
  const json& hash = need(doc, "model_hash", root);
  if (!hash.is_string()) throw ParseError(root + ".model_hash", "expected a string");
  lib.model_hash = hash.get<std::string>();
  if (doc.contains("joint_names")) lib.joint_names = doc["joint_names"].get<std::vector<std::string>>();
  if (doc.contains("gaps")) lib.gaps = doc["gaps"].get<std::vector<double>>();
  const json& gaits = need(doc, "gaits", root);
  if (!gaits.is_array()) throw ParseError(root + ".gaits", "expected an array");
  for (size_t k = 0; k < gaits.size(); ++k) {
    const std::string path = root + ".gaits[" + std::to_string(k) + "]";
    const json& e = gaits[k];
    ReferenceGait g;
    g.command = num(e, "command", path);
    g.period = num(e, "period", path);
    try {
      g.mirror = need(e, "mirror", path).get<std::vector<int>>();
    } catch (const json::exception&) {
      throw ParseError(path + ".mirror", "expected integers");
    }
    g.coeffs = matrix_from(need(e, "coeffs", path), path + ".coeffs");
    g.foot_samples = matrix_from(need(e, "foot_samples", path), path + ".foot_samples");
    if (e.contains("diagnostics")) {
      const json& d = e["diagnostics"];
      const std::string dp = path + ".diagnostics";
      g.diagnostics.objective = num(d, "objective", dp);
      g.diagnostics.feasible = need(d, "feasible", dp).get<bool>();
      g.diagnostics.fell = need(d, "fell", dp).get<bool>();
      g.diagnostics.fall_time = num(d, "fall_time", dp);
      g.diagnostics.mean_speed = num(d, "mean_speed", dp);
      g.diagnostics.work_per_distance = num(d, "work_per_distance", dp);
      g.diagnostics.periodicity = num(d, "periodicity", dp);
      g.diagnostics.clearance = num(d, "clearance", dp);
      g.diagnostics.evaluations = static_cast<int>(num(d, "evaluations", dp));
    }
    lib.gaits.push_back(std::move(g));
  }
  const json& grid = need(doc, "grid", root);
  if (!grid.is_array() || grid.size() != lib.gaits.size()) throw ParseError(root + ".grid", "grid does not match gaits");
  for (size_t k = 0; k < grid.size(); ++k)
    if (!grid[k].is_number() || grid[k].get<double>() != lib.gaits[k].command)
      throw ParseError(root + ".grid", "grid does not match gaits");
  validate_library(lib);
  return lib;
}

void save_library(const GaitLibrary& lib, const std::filesystem::path& path) {
  validate_library(lib);
  write_file_atomic(path, library_to_json(lib).dump(1) + "\n");
}

GaitLibrary load_library(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("", "gait library '" + path.string() + "' is corrupt: " + e.what());
  }
  try {
    return library_from_json(doc);
  } catch (const json::exception& e) {
    throw ParseError("", "gait library '" + path.string() + "' is malformed: " + e.what());
  }
}

GaitLibrary load_library(const std::filesystem::path& path, const RobotModel& model) {
  GaitLibrary lib = load_library(path);
  if (lib.model_hash != model.hash)
    throw IncompatibleModelError("gait library '" + path.string() + "' was built for model " + lib.model_hash +
                                 ", not " + model.hash);
  for (const auto& g : lib.gaits)
    if (g.num_joints() != model.num_joints())
      throw IncompatibleModelError("gait library joint count does not match the model");
  return lib;
}

namespace {
bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}
}  // namespace

bool operator==(const ReferenceGait& a, const ReferenceGait& b) {
  const auto& x = a.diagnostics;
  const auto& y = b.diagnostics;
  return a.command == b.command && a.period == b.period && same(a.coeffs, b.coeffs) && a.mirror == b.mirror &&
         same(a.foot_samples, b.foot_samples) && x.objective == y.objective && x.feasible == y.feasible &&
         x.fell == y.fell && x.fall_time == y.fall_time && x.mean_speed == y.mean_speed &&
         x.work_per_distance == y.work_per_distance && x.periodicity == y.periodicity &&
         x.clearance == y.clearance && x.evaluations == y.evaluations;
}

bool operator==(const GaitLibrary& a, const GaitLibrary& b) {
  return a.model_hash == b.model_hash && a.joint_names == b.joint_names && a.gaits == b.gaits && a.gaps == b.gaps;
}

}  // namespace gaitlab
