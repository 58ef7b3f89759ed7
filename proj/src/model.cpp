#include "gaitlab/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gaitlab/hash.hpp"

namespace gaitlab {

namespace detail {
extern const char* const kDefaultModelJson;
}

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing required key");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, path);
}

std::string text(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

Vec2 vec2(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ParseError(path + "." + key, "expected [x, z]");
  return {v[0].get<double>(), v[1].get<double>()};
}

JointRole parse_role(const std::string& s, const std::string& path) {
  if (s == "none") return JointRole::none;
  if (s == "hip") return JointRole::hip;
  if (s == "knee") return JointRole::knee;
  if (s == "ankle") return JointRole::ankle;
  if (s == "shoulder") return JointRole::shoulder;
  if (s == "elbow") return JointRole::elbow;
  throw ParseError(path, "unknown joint role '" + s + "'");
}

Side parse_side(const std::string& s, const std::string& path) {
  if (s == "none") return Side::none;
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw ParseError(path, "unknown side '" + s + "'");
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

void validate(const RobotModel& m) {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (!(m.gravity > 0.0)) fail("gravity must be positive");
  if (m.links.empty()) fail("model has no links");
  for (const auto& l : m.links) {
    if (!(l.mass > 0.0)) fail("link '" + l.name + "' mass must be > 0");
    if (!(l.inertia > 0.0)) fail("link '" + l.name + "' inertia must be > 0");
    if (!(l.length > 0.0)) fail("link '" + l.name + "' length must be > 0");
  }
  for (const auto& j : m.joints) {
    if (!(j.lower < j.upper)) fail("joint '" + j.name + "' requires lower < upper");
    if (!(j.torque_limit > 0.0)) fail("joint '" + j.name + "' torque limit must be > 0");
    if (!(j.velocity_limit > 0.0)) fail("joint '" + j.name + "' velocity limit must be > 0");
    if (j.kp < 0.0 || j.kd < 0.0) fail("joint '" + j.name + "' gains must be >= 0");
    const Joint& mj = m.joints[j.mirror];
    if (mj.lower != j.lower || mj.upper != j.upper)
      fail("mirrored joints '" + j.name + "' and '" + mj.name + "' must share limits");
  }
  for (const auto& f : m.feet)
    if (f.points.empty()) fail("foot '" + f.name + "' has no contact points");
  for (int j = 0; j < m.num_joints(); ++j) {
    double q = m.nominal_pose[j];
    if (q < m.joints[j].lower || q > m.joints[j].upper)
      fail("nominal pose of '" + m.joints[j].name + "' outside limits");
  }
}

void derive_topology(RobotModel& m) {
  const int nl = static_cast<int>(m.links.size());
  m.link_joint.assign(nl, -1);
  for (int j = 0; j < m.num_joints(); ++j) {
    const Joint& jt = m.joints[j];
    if (m.link_joint[jt.child] != -1)
      throw ValidationError("link '" + m.links[jt.child].name + "' has two parent joints");
    if (jt.parent >= jt.child)
      throw ValidationError("joint '" + jt.name + "': parent link must be listed before child");
    m.link_joint[jt.child] = j;
  }
  for (int l = 1; l < nl; ++l)
    if (m.link_joint[l] == -1)
      throw ValidationError("link '" + m.links[l].name + "' is not attached to the tree");
  if (m.link_joint[0] != -1) throw ValidationError("the first link must be the base");

  m.link_chain.assign(nl, {});
  m.dof_pivot_link.assign(m.num_dofs(), -1);
  if (m.floating_base) {
    m.link_chain[0] = {2};
    m.dof_pivot_link[2] = 0;
  }
  for (int l = 1; l < nl; ++l) {
    const Joint& jt = m.joints[m.link_joint[l]];
    m.link_chain[l] = m.link_chain[jt.parent];
    int dof = m.joint_dof(m.link_joint[l]);
    m.link_chain[l].push_back(dof);
    m.dof_pivot_link[dof] = l;
  }

  // Mirror pairs from (role, side).
  for (int j = 0; j < m.num_joints(); ++j) {
    Joint& jt = m.joints[j];
    jt.mirror = j;
    if (jt.side == Side::none || jt.role == JointRole::none) continue;
    Side other = jt.side == Side::left ? Side::right : Side::left;
    int k = m.joint_with(jt.role, other);
    if (k >= 0) jt.mirror = k;
  }

  m.total_mass = 0.0;
  for (const auto& l : m.links) m.total_mass += l.mass;
}

}  // namespace

int RobotModel::num_contact_points() const {
  int n = 0;
  for (const auto& f : feet) n += static_cast<int>(f.points.size());
  return n;
}

int RobotModel::find_link(const std::string& n) const {
  for (size_t i = 0; i < links.size(); ++i)
    if (links[i].name == n) return static_cast<int>(i);
  return -1;
}

int RobotModel::find_joint(const std::string& n) const {
  for (size_t i = 0; i < joints.size(); ++i)
    if (joints[i].name == n) return static_cast<int>(i);
  return -1;
}

int RobotModel::joint_with(JointRole role, Side side) const {
  for (size_t i = 0; i < joints.size(); ++i)
    if (joints[i].role == role && joints[i].side == side) return static_cast<int>(i);
  return -1;
}

Eigen::VectorXd RobotModel::torque_limits() const {
  Eigen::VectorXd v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = joints[j].torque_limit;
  return v;
}
Eigen::VectorXd RobotModel::lower_limits() const {
  Eigen::VectorXd v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = joints[j].lower;
  return v;
}
Eigen::VectorXd RobotModel::upper_limits() const {
  Eigen::VectorXd v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = joints[j].upper;
  return v;
}
Eigen::VectorXd RobotModel::velocity_limits() const {
  Eigen::VectorXd v(num_joints());
  for (int j = 0; j < num_joints(); ++j) v[j] = joints[j].velocity_limit;
  return v;
}

std::string to_string(JointRole r) {
  switch (r) {
    case JointRole::hip: return "hip";
    case JointRole::knee: return "knee";
    case JointRole::ankle: return "ankle";
    case JointRole::shoulder: return "shoulder";
    case JointRole::elbow: return "elbow";
    default: return "none";
  }
}

std::string to_string(Side s) {
  switch (s) {
    case Side::left: return "left";
    case Side::right: return "right";
    default: return "none";
  }
}

json RobotModel::to_json() const {
  json doc;
  doc["model_schema"] = kModelSchemaVersion;
  doc["name"] = name;
  doc["gravity"] = gravity;
  if (floating_base) {
    doc["base"] = {{"type", "floating"}};
  } else {
    doc["base"] = {{"type", "fixed"}, {"pose", {fixed_pose[0], fixed_pose[1], fixed_pose[2]}}};
  }
  doc["ground"] = {{"stiffness", ground.stiffness},
                   {"damping", ground.damping},
                   {"friction", ground.friction},
                   {"slip_velocity", ground.slip_velocity}};
  json links_j = json::array();
  for (const auto& l : links)
    links_j.push_back({{"name", l.name},
                       {"mass", l.mass},
                       {"length", l.length},
                       {"inertia", l.inertia},
                       {"com", vec_json(l.com)}});
  doc["links"] = links_j;
  json joints_j = json::array();
  for (const auto& j : joints)
    joints_j.push_back({{"name", j.name},
                        {"parent", links[j.parent].name},
                        {"child", links[j.child].name},
                        {"origin", vec_json(j.origin)},
                        {"lower", j.lower},
                        {"upper", j.upper},
                        {"velocity_limit", j.velocity_limit},
                        {"torque_limit", j.torque_limit},
                        {"kp", j.kp},
                        {"kd", j.kd},
                        {"role", to_string(j.role)},
                        {"side", to_string(j.side)}});
  doc["joints"] = joints_j;
  json feet_j = json::array();
  for (const auto& f : feet) {
    json pts = json::array();
    for (const auto& p : f.points) pts.push_back(vec_json(p));
    feet_j.push_back({{"name", f.name}, {"side", to_string(f.side)}, {"link", links[f.link].name}, {"points", pts}});
  }
  doc["feet"] = feet_j;
  json pose = json::object();
  for (int j = 0; j < num_joints(); ++j) pose[joints[j].name] = nominal_pose[j];
  doc["nominal_pose"] = pose;
  return doc;
}

RobotModel build_model(const json& doc) {
  const std::string root = "model";
  if (!doc.is_object()) throw ParseError(root, "expected an object");
  const json& schema = require(doc, "model_schema", root);
  if (!schema.is_number_integer() || schema.get<int>() != kModelSchemaVersion)
    throw ParseError(root + ".model_schema", "unsupported schema version (expected 1)");

  RobotModel m;
  m.name = doc.contains("name") ? text(doc, "name", root) : "unnamed";
  m.gravity = number(doc, "gravity", root);

  const json& base = require(doc, "base", root);
  std::string base_type = text(base, "type", root + ".base");
  if (base_type == "floating") {
    m.floating_base = true;
  } else if (base_type == "fixed") {
    m.floating_base = false;
    const json& pose = require(base, "pose", root + ".base");
    if (!pose.is_array() || pose.size() != 3) throw ParseError(root + ".base.pose", "expected [x, z, pitch]");
    for (int i = 0; i < 3; ++i) {
      if (!pose[i].is_number()) throw ParseError(root + ".base.pose", "expected numbers");
      m.fixed_pose[i] = pose[i].get<double>();
    }
  } else {
    throw ParseError(root + ".base.type", "expected 'floating' or 'fixed'");
  }

  double kp_default = 0.0, kd_default = 0.0;
  if (doc.contains("pd")) {
    kp_default = number(doc["pd"], "kp", root + ".pd");
    kd_default = number(doc["pd"], "kd", root + ".pd");
  }
  if (doc.contains("ground")) {
    const json& g = doc["ground"];
    const std::string gp = root + ".ground";
    m.ground.stiffness = number_or(g, "stiffness", gp, m.ground.stiffness);
    m.ground.damping = number_or(g, "damping", gp, m.ground.damping);
    m.ground.friction = number_or(g, "friction", gp, m.ground.friction);
    m.ground.slip_velocity = number_or(g, "slip_velocity", gp, m.ground.slip_velocity);
  }

  const json& links = require(doc, "links", root);
  if (!links.is_array()) throw ParseError(root + ".links", "expected an array");
  for (size_t i = 0; i < links.size(); ++i) {
    const std::string p = root + ".links[" + std::to_string(i) + "]";
    Link l;
    l.name = text(links[i], "name", p);
    l.mass = number(links[i], "mass", p);
    l.length = number(links[i], "length", p);
    l.inertia = number(links[i], "inertia", p);
    l.com = vec2(links[i], "com", p);
    if (m.find_link(l.name) >= 0) throw ParseError(p + ".name", "duplicate link '" + l.name + "'");
    m.links.push_back(l);
  }

  const json& joints = require(doc, "joints", root);
  if (!joints.is_array()) throw ParseError(root + ".joints", "expected an array");
  for (size_t i = 0; i < joints.size(); ++i) {
    const std::string p = root + ".joints[" + std::to_string(i) + "]";
    const json& jj = joints[i];
    Joint j;
    j.name = text(jj, "name", p);
    j.parent = m.find_link(text(jj, "parent", p));
    if (j.parent < 0) throw ParseError(p + ".parent", "unknown link");
    j.child = m.find_link(text(jj, "child", p));
    if (j.child < 0) throw ParseError(p + ".child", "unknown link");
    j.origin = vec2(jj, "origin", p);
    j.lower = number(jj, "lower", p);
    j.upper = number(jj, "upper", p);
    j.velocity_limit = number(jj, "velocity_limit", p);
    j.torque_limit = number(jj, "torque_limit", p);
    j.kp = number_or(jj, "kp", p, kp_default);
    j.kd = number_or(jj, "kd", p, kd_default);
    j.role = jj.contains("role") ? parse_role(text(jj, "role", p), p + ".role") : JointRole::none;
    j.side = jj.contains("side") ? parse_side(text(jj, "side", p), p + ".side") : Side::none;
    if (m.find_joint(j.name) >= 0) throw ParseError(p + ".name", "duplicate joint '" + j.name + "'");
    m.joints.push_back(j);
  }

  if (doc.contains("feet")) {
    const json& feet = doc["feet"];
    if (!feet.is_array()) throw ParseError(root + ".feet", "expected an array");
    for (size_t i = 0; i < feet.size(); ++i) {
      const std::string p = root + ".feet[" + std::to_string(i) + "]";
      Foot f;
      f.name = text(feet[i], "name", p);
      f.side = feet[i].contains("side") ? parse_side(text(feet[i], "side", p), p + ".side") : Side::none;
      f.link = m.find_link(text(feet[i], "link", p));
      if (f.link < 0) throw ParseError(p + ".link", "unknown link");
      const json& pts = require(feet[i], "points", p);
      if (!pts.is_array()) throw ParseError(p + ".points", "expected an array");
      for (const auto& pt : pts) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
          throw ParseError(p + ".points", "expected [x, z] pairs");
        f.points.emplace_back(pt[0].get<double>(), pt[1].get<double>());
      }
      m.feet.push_back(f);
    }
  }

  m.nominal_pose = Eigen::VectorXd::Zero(m.num_joints());
  if (doc.contains("nominal_pose")) {
    const json& pose = doc["nominal_pose"];
    if (!pose.is_object()) throw ParseError(root + ".nominal_pose", "expected an object");
    for (auto it = pose.begin(); it != pose.end(); ++it) {
      int j = m.find_joint(it.key());
      if (j < 0) throw ParseError(root + ".nominal_pose." + it.key(), "unknown joint");
      if (!it.value().is_number()) throw ParseError(root + ".nominal_pose." + it.key(), "expected a number");
      m.nominal_pose[j] = it.value().get<double>();
    }
  }

  derive_topology(m);
  validate(m);
  m.hash = content_hash(m.to_json().dump());
  return m;
}

RobotModel parse_model(const std::string& text_doc) {
  json doc;
  try {
    doc = json::parse(text_doc);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("model document is not valid JSON: ") + e.what());
  }
  return build_model(doc);
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

RobotModel load_model_spec(const std::string& spec) {
  if (spec == "default") return default_model();
  return load_model(spec);
}

const std::string& default_model_text() {
  static const std::string text_doc(detail::kDefaultModelJson);
  return text_doc;
}

RobotModel default_model() {
  static const RobotModel model = parse_model(default_model_text());
  return model;
}

}  // namespace gaitlab
