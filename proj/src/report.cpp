#include "gaitlab/report.hpp"

#include <cstdio>
#include <sstream>

#include "gaitlab/errors.hpp"
#include "gaitlab/io.hpp"

namespace gaitlab {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json velocity_json(const VelocityResponse& v) {
  return {{"t", v.t},
          {"command", v.command},
          {"measured", v.measured},
          {"rise_time", v.rise_time},
          {"steady_mean", v.steady_mean},
          {"steady_deviation", v.steady_deviation},
          {"zero_mean", v.zero_mean},
          {"fell", v.fell},
          {"fall_time", v.fall_time},
          {"tracking_failure", v.tracking_failure}};
}

VelocityResponse velocity_from(const json& j) {
  VelocityResponse v;
  v.t = j.at("t").get<std::vector<double>>();
  v.command = j.at("command").get<std::vector<double>>();
  v.measured = j.at("measured").get<std::vector<double>>();
  v.rise_time = j.at("rise_time").get<double>();
  v.steady_mean = j.at("steady_mean").get<double>();
  v.steady_deviation = j.at("steady_deviation").get<double>();
  v.zero_mean = j.at("zero_mean").get<double>();
  v.fell = j.at("fell").get<bool>();
  v.fall_time = j.at("fall_time").get<double>();
  v.tracking_failure = j.at("tracking_failure").get<bool>();
  if (v.t.size() != v.command.size() || v.t.size() != v.measured.size())
    throw ParseError("velocity", "series lengths differ");
  return v;
}

json push_json(const PushSummary& p) {
  json trials = json::array();
  for (const auto& t : p.trials)
    trials.push_back({{"linear", t.linear},
                      {"angular", t.angular},
                      {"phase", t.phase},
                      {"time", t.time},
                      {"recovered", t.recovered},
                      {"time_to_fall", t.time_to_fall},
                      {"fell_before_push", t.fell_before_push}});
  return {{"regime", to_string(p.regime)}, {"samples", p.samples}, {"rate", p.rate}, {"trials", trials}};
}

PushSummary push_from(const json& j) {
  PushSummary p;
  p.regime = push_regime_from(j.at("regime").get<std::string>());
  p.samples = j.at("samples").get<int>();
  p.rate = j.at("rate").get<double>();
  for (const auto& t : j.at("trials")) {
    PushTrial x;
    x.regime = p.regime;
    x.linear = t.at("linear").get<double>();
    x.angular = t.at("angular").get<double>();
    x.phase = t.at("phase").get<double>();
    x.time = t.at("time").get<double>();
    x.recovered = t.at("recovered").get<bool>();
    x.time_to_fall = t.at("time_to_fall").get<double>();
    x.fell_before_push = t.at("fell_before_push").get<bool>();
    p.trials.push_back(x);
  }
  return p;
}

json cot_json(const CotResult& c) {
  return {{"c_et", c.c_et},
          {"c_mt", c.c_mt},
          {"segment_c_et", c.segment_c_et},
          {"segment_c_mt", c.segment_c_mt},
          {"mean_speed", c.mean_speed},
          {"complete", c.complete},
          {"failure", c.failure},
          {"human_c_et", kHumanCet},
          {"human_c_mt", kHumanCmt}};
}

CotResult cot_from(const json& j) {
  CotResult c;
  c.c_et = j.at("c_et").get<double>();
  c.c_mt = j.at("c_mt").get<double>();
  c.segment_c_et = j.at("segment_c_et").get<std::vector<double>>();
  c.segment_c_mt = j.at("segment_c_mt").get<std::vector<double>>();
  c.mean_speed = j.at("mean_speed").get<double>();
  c.complete = j.at("complete").get<bool>();
  c.failure = j.at("failure").get<std::string>();
  return c;
}

PushGrid grid_from(const json& j) {
  PushGrid g;
  g.linear = {j.at("linear").at(0).get<double>(), j.at("linear").at(1).get<double>()};
  g.angular = {j.at("angular").at(0).get<double>(), j.at("angular").at(1).get<double>()};
  g.settle = j.at("settle").get<double>();
  g.window = j.at("window").get<double>();
  g.upright_pitch = j.at("upright_pitch").get<double>();
  g.upright_height = j.at("upright_height").get<double>();
  return g;
}

double rate_of(const std::vector<PushSummary>& push, PushRegime r) {
  for (const auto& p : push)
    if (p.regime == r) return p.rate;
  return -1.0;
}

}  // namespace

json EvalReport::to_json() const {
  json j = {{"report_schema", kReportSchemaVersion},
            {"checkpoint_hash", checkpoint_hash},
            {"config_hash", config_hash},
            {"model_hash", model_hash},
            {"preset", preset},
            {"seed", seed},
            {"warnings", warnings},
            {"push_grid", push_grid.to_json()},
            {"transfer_note", kTransferNote}};
  j["velocity"] = velocity ? velocity_json(*velocity) : json(nullptr);
  j["push"] = json::array();
  for (const auto& p : push) j["push"].push_back(push_json(p));
  j["cot"] = cot ? cot_json(*cot) : json(nullptr);
  j["cot_failure"] = cot_failure;
  j["transfer"] = json::array();
  for (const auto& row : transfer) {
    json r = {{"perturbation", row.perturbation.to_json()}, {"velocity", velocity_json(row.velocity)}};
    r["push"] = json::array();
    for (const auto& p : row.push) r["push"].push_back(push_json(p));
    r["cot"] = row.cot ? cot_json(*row.cot) : json(nullptr);
    r["cot_failure"] = row.cot_failure;
    j["transfer"].push_back(r);
  }
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  try {
    if (!j.is_object()) throw ParseError("report", "expected an object");
    if (j.at("report_schema").get<int>() != kReportSchemaVersion)
      throw ParseError("report_schema", "unsupported report schema version");
    EvalReport r;
    r.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.model_hash = j.at("model_hash").get<std::string>();
    r.preset = j.at("preset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.push_grid = grid_from(j.at("push_grid"));
    if (!j.at("velocity").is_null()) r.velocity = velocity_from(j.at("velocity"));
    for (const auto& p : j.at("push")) r.push.push_back(push_from(p));
    if (!j.at("cot").is_null()) r.cot = cot_from(j.at("cot"));
    r.cot_failure = j.at("cot_failure").get<std::string>();
    for (const auto& row : j.at("transfer")) {
      TransferRow t;
      t.perturbation = Perturbation::from_json(row.at("perturbation"));
      t.velocity = velocity_from(row.at("velocity"));
      for (const auto& p : row.at("push")) t.push.push_back(push_from(p));
      if (!row.at("cot").is_null()) t.cot = cot_from(row.at("cot"));
      t.cot_failure = row.at("cot_failure").get<std::string>();
      r.transfer.push_back(std::move(t));
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError("report", e.what());
  }
}

void save_report(const EvalReport& r, const std::filesystem::path& path) {
  write_file_atomic(path, r.to_json().dump(2) + "\n");
}

EvalReport load_report(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return EvalReport::from_json(j);
}

std::string velocity_csv(const VelocityResponse& v) {
  std::ostringstream os;
  os << "t,vx_command,vx_measured\n";
  for (size_t i = 0; i < v.t.size(); ++i) os << num(v.t[i]) << ',' << num(v.command[i]) << ',' << num(v.measured[i]) << '\n';
  return os.str();
}

std::string recovery_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "preset,regime,samples,rate\n";
  for (const auto& r : reports)
    for (const auto& p : r.push) os << r.preset << ',' << to_string(p.regime) << ',' << p.samples << ',' << num(p.rate) << '\n';
  return os.str();
}

std::string transfer_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "perturbation,friction,mass_scale,gain_scale,noise_scale,steady_mean,rise_time,fell,"
        "linear_rate,angular_rate,combined_rate,c_et,c_mt,cot_complete\n";
  for (const auto& row : r.transfer) {
    const Perturbation& p = row.perturbation;
    os << p.name << ',' << (p.friction ? num(*p.friction) : std::string("nominal")) << ',' << num(p.mass_scale) << ','
       << num(p.gain_scale) << ',' << num(p.noise_scale) << ',' << num(row.velocity.steady_mean) << ','
       << num(row.velocity.rise_time) << ',' << (row.velocity.fell ? 1 : 0) << ','
       << num(rate_of(row.push, PushRegime::linear)) << ',' << num(rate_of(row.push, PushRegime::angular)) << ','
       << num(rate_of(row.push, PushRegime::combined)) << ',' << (row.cot ? num(row.cot->c_et) : "") << ','
       << (row.cot ? num(row.cot->c_mt) : "") << ',' << (row.cot && row.cot->complete ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string comparison_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "metric";
  for (const auto& r : reports) os << ',' << r.preset;
  os << '\n';
  auto row = [&](const std::string& name, auto get) {
    os << name;
    for (const auto& r : reports) os << ',' << get(r);
    os << '\n';
  };
  auto vel = [](const EvalReport& r, auto f) { return r.velocity ? num(f(*r.velocity)) : std::string(); };
  row("steady_mean", [&](const EvalReport& r) { return vel(r, [](const VelocityResponse& v) { return v.steady_mean; }); });
  row("steady_deviation",
      [&](const EvalReport& r) { return vel(r, [](const VelocityResponse& v) { return v.steady_deviation; }); });
  row("rise_time", [&](const EvalReport& r) { return vel(r, [](const VelocityResponse& v) { return v.rise_time; }); });
  row("velocity_fell", [&](const EvalReport& r) {
    return vel(r, [](const VelocityResponse& v) { return v.fell ? 1.0 : 0.0; });
  });
  for (PushRegime g : kAllRegimes)
    row("push_" + to_string(g), [&](const EvalReport& r) {
      const double x = rate_of(r.push, g);
      return x < 0.0 ? std::string() : num(x);
    });
  row("c_et", [](const EvalReport& r) { return r.cot ? num(r.cot->c_et) : std::string(); });
  row("c_mt", [](const EvalReport& r) { return r.cot ? num(r.cot->c_mt) : std::string(); });
  return os.str();
}

void write_report_files(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_report(r, dir / "report.json");
  if (r.velocity) write_file_atomic(dir / "velocity.csv", velocity_csv(*r.velocity));
  if (!r.push.empty()) write_file_atomic(dir / "recovery.csv", recovery_csv({r}));
  if (!r.transfer.empty()) write_file_atomic(dir / "transfer.csv", transfer_csv(r));
}

std::string train_log_header() {
  return "iteration,mean_episode_length,episodes,fall_rate,mean_step_reward,kl,surrogate,value_loss,entropy,"
         "learning_rate,clip_fraction\n";
}

std::string train_log_row(const IterationLog& l) {
  std::ostringstream os;
  os << l.iteration << ',' << num(l.mean_episode_length) << ',' << l.episodes << ',' << num(l.fall_rate) << ','
     << num(l.mean_step_reward) << ',' << num(l.kl) << ',' << num(l.surrogate) << ',' << num(l.value_loss) << ','
     << num(l.entropy) << ',' << num(l.learning_rate) << ',' << num(l.clip_fraction) << '\n';
  return os.str();
}

std::string reward_means_header(const std::vector<std::string>& terms) {
  std::string s = "iteration";
  for (const auto& t : terms) s += "," + t;
  return s + "\n";
}

std::string reward_means_row(const IterationLog& l) {
  std::string s = std::to_string(l.iteration);
  for (double v : l.term_means) s += "," + num(v);
  return s + "\n";
}

std::string merge_reward_means(const std::vector<std::pair<std::string, std::filesystem::path>>& runs) {
  std::ostringstream os;
  os << "preset,iteration,term,value\n";
  for (const auto& [preset, path] : runs) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string(), "empty reward means file");
    std::vector<std::string> header;
    {
      std::istringstream h(line);
      std::string cell;
      while (std::getline(h, cell, ',')) header.push_back(cell);
    }
    if (header.empty() || header[0] != "iteration") throw ParseError(path.string(), "missing iteration column");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream r(line);
      std::vector<std::string> cells;
      std::string cell;
      while (std::getline(r, cell, ',')) cells.push_back(cell);
      if (cells.size() != header.size()) throw ParseError(path.string(), "row width differs from the header");
      for (size_t c = 1; c < cells.size(); ++c) os << preset << ',' << cells[0] << ',' << header[c] << ',' << cells[c] << '\n';
    }
  }
  return os.str();
}

}  // namespace gaitlab
