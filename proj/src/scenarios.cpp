#include "gmprop/scenarios.hpp"

#include <yaml-cpp/yaml.h>

#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gmprop/error.hpp"
#include "gmprop/propagation.hpp"

namespace gmprop {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kSiderealDay = 86164.0905;
constexpr double kEarthMoonMu = 1.0 / (81.30059 + 1.0);
constexpr double kEarthMoonDistance = 384400.0;
constexpr double kMoonGm = 4902.800066;
/// refine_period(butterfly, x0, 21.1 days, 0.3) = 4.8015504023093545.
constexpr double kButterflyPeriod = 0x1.334c9a0f00eaap+2;

Mat6 geo_covariance() {
  Vec6 sd;
  sd << 10.0, 10.0, 1.0, 3e-3, 3e-3, 1e-5;
  return sd.array().square().matrix().asDiagonal();
}

Scenario geo() {
  Scenario s;
  s.name = "geo";
  s.model = DynamicsModel::two_body(kEarthMu);
  const double n = 2.0 * std::numbers::pi / kSiderealDay;
  const double a = std::cbrt(kEarthMu / (n * n));
  s.x0 << a, 0.0, 0.0, 0.0, a * n, 0.0;
  s.P0 = geo_covariance();
  s.tf = kSiderealDay;
  s.units = "km, km/s, s";
  s.mc = {10000, 1};
  return s;
}

Scenario molniya() {
  Scenario s;
  s.name = "molniya";
  s.model = DynamicsModel::two_body(kEarthMu);
  OrbitalElements el;
  el.a = 26555.4;
  el.e = 0.72;
  el.i = 63.5 * kDeg;
  el.raan = 0.0;
  el.argp = 270.0 * kDeg;
  el.nu = 0.0;
  s.x0 = elements_to_state(el, kEarthMu);
  s.P0 = geo_covariance();
  s.tf = 2.0 * std::numbers::pi * std::sqrt(el.a * el.a * el.a / kEarthMu);
  s.units = "km, km/s, s; raan 0 deg, start at periapsis";
  s.mc = {10000, 2};
  return s;
}

Scenario butterfly() {
  Scenario s;
  s.name = "butterfly";
  const double tu = std::sqrt(std::pow(kEarthMoonDistance, 3) / (kEarthMu + kMoonGm));
  s.model = DynamicsModel::cr3bp(kEarthMoonMu, kEarthMoonDistance, tu);
  s.x0 << 0.924, 1.47e-28, 0.148, -2.71e-16, -0.147, -2.42e-14;
  Vec6 d;
  d << 1.0, 0.0, 1.0, 0.0, 0.0, 0.0;
  s.P0 = Mat6(1e-8 * d.asDiagonal()) + 1e-10 * Mat6::Identity();
  s.tf = kButterflyPeriod;
  s.units = "nondimensional Earth-Moon rotating frame";
  s.mc = {10000, 3};
  return s;
}

// ---- YAML helpers ----

std::vector<double> read_list(const YAML::Node& node, const std::string& path, std::size_t expected) {
  if (!node.IsSequence()) throw ConfigError(path, "expected a list");
  if (expected != 0 && node.size() != expected) {
    throw ConfigError(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(node.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    try {
      out.push_back(node[i].as<double>());
    } catch (const YAML::Exception&) {
      throw ConfigError(path + "[" + std::to_string(i) + "]", "not a number");
    }
  }
  return out;
}

template <typename T>
T read_scalar(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "invalid value");
  }
}

Mat6 read_covariance(const YAML::Node& node) {
  if (!node.IsMap()) throw ConfigError("P0", "expected a map with 'full' or 'diag'/'identity'");
  Mat6 p = Mat6::Zero();
  if (node["full"]) {
    const auto& rows = node["full"];
    if (!rows.IsSequence() || rows.size() != 6) throw ConfigError("P0.full", "expected 6 rows");
    for (int i = 0; i < 6; ++i) {
      const auto row = read_list(rows[i], "P0.full[" + std::to_string(i) + "]", 6);
      for (int j = 0; j < 6; ++j) p(i, j) = row[j];
    }
    return p;
  }
  if (!node["diag"] && !node["identity"]) throw ConfigError("P0", "expected 'full', 'diag' or 'identity'");
  if (node["diag"]) {
    const auto d = read_list(node["diag"], "P0.diag", 6);
    for (int i = 0; i < 6; ++i) p(i, i) = d[i];
  }
  if (node["identity"]) p += read_scalar<double>(node["identity"], "P0.identity") * Mat6::Identity();
  return p;
}

void emit_list(YAML::Emitter& out, const double* data, int n) {
  out << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < n; ++i) out << data[i];
  out << YAML::EndSeq;
}

double return_distance(const DynamicsModel& model, const Vec6& x0, double t) {
  const double times[] = {t};
  return (propagate_states(model, x0, 0.0, times).back() - x0).norm();
}

}  // namespace

void Scenario::validate() const {
  model.validate();
  if (!x0.allFinite()) throw ConfigError("x0", "non-finite entries");
  if (!(tf > t0)) throw ConfigError("span", "tf must exceed t0");
  if (mc.N < 2) throw ConfigError("mc.N", "must be at least 2");
  if (!P0.isApprox(P0.transpose(), 1e-12)) throw ConfigError("P0", "not symmetric");
  Eigen::LLT<Mat6> llt(P0);
  if (llt.info() != Eigen::Success) throw ConfigError("P0", "not positive definite");
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.name == b.name && a.model.kind == b.model.kind && a.model.mu == b.model.mu &&
         a.model.length_unit == b.model.length_unit && a.model.time_unit == b.model.time_unit &&
         (a.x0.array() == b.x0.array()).all() && (a.P0.array() == b.P0.array()).all() && a.t0 == b.t0 &&
         a.tf == b.tf && a.units == b.units && a.mc == b.mc;
}

const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names = {"geo", "molniya", "butterfly"};
  return names;
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "geo") return geo();
  if (name == "molniya") return molniya();
  if (name == "butterfly") return butterfly();
  throw ConfigError("builtin", "unknown scenario '" + name + "' (valid: geo, molniya, butterfly)");
}

Vec6 elements_to_state(const OrbitalElements& el, double mu) {
  const double p = el.a * (1.0 - el.e * el.e);
  const double r = p / (1.0 + el.e * std::cos(el.nu));
  const Eigen::Vector3d r_pf(r * std::cos(el.nu), r * std::sin(el.nu), 0.0);
  const Eigen::Vector3d v_pf(-std::sqrt(mu / p) * std::sin(el.nu), std::sqrt(mu / p) * (el.e + std::cos(el.nu)), 0.0);
  const Eigen::Matrix3d rot = (Eigen::AngleAxisd(el.raan, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(el.i, Eigen::Vector3d::UnitX()) *
                               Eigen::AngleAxisd(el.argp, Eigen::Vector3d::UnitZ()))
                                  .toRotationMatrix();
  Vec6 x;
  x << rot * r_pf, rot * v_pf;
  return x;
}

OrbitalElements state_to_elements(const Vec6& x, double mu) {
  const Eigen::Vector3d r = x.head<3>();
  const Eigen::Vector3d v = x.tail<3>();
  const Eigen::Vector3d h = r.cross(v);
  const Eigen::Vector3d node = Eigen::Vector3d::UnitZ().cross(h);
  const Eigen::Vector3d ev = v.cross(h) / mu - r.normalized();
  OrbitalElements el;
  el.e = ev.norm();
  el.a = 1.0 / (2.0 / r.norm() - v.squaredNorm() / mu);
  el.i = std::acos(std::clamp(h.z() / h.norm(), -1.0, 1.0));
  el.raan = std::atan2(node.y(), node.x());
  if (el.raan < 0.0) el.raan += 2.0 * std::numbers::pi;
  el.argp = std::atan2(node.cross(ev).dot(h) / h.norm(), node.dot(ev));
  if (el.argp < 0.0) el.argp += 2.0 * std::numbers::pi;
  el.nu = std::atan2(ev.cross(r).dot(h) / h.norm(), ev.dot(r));
  if (el.nu < 0.0) el.nu += 2.0 * std::numbers::pi;
  return el;
}

double refine_period(const DynamicsModel& model, const Vec6& x0, double guess, double half_width) {
  const int samples = 400;
  std::vector<double> times;
  for (int k = 0; k <= samples; ++k) times.push_back(guess - half_width + 2.0 * half_width * k / samples);
  const auto xs = propagate_states(model, x0, 0.0, times);
  std::size_t best = 0;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    if ((xs[k] - x0).norm() < (xs[best] - x0).norm()) best = k;
  }
  const double step = 2.0 * half_width / samples;
  const double lo = times[best] - step;
  const double hi = times[best] + step;
  const auto res = boost::math::tools::brent_find_minima([&](double t) { return return_distance(model, x0, t); }, lo,
                                                         hi, 40);
  return res.first;
}

std::string scenario_to_yaml(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(s.model.kind);
  out << YAML::Key << "mu" << YAML::Value << s.model.mu;
  out << YAML::Key << "length_unit" << YAML::Value << s.model.length_unit;
  out << YAML::Key << "time_unit" << YAML::Value << s.model.time_unit;
  out << YAML::EndMap;
  out << YAML::Key << "x0" << YAML::Value;
  emit_list(out, s.x0.data(), 6);
  out << YAML::Key << "P0" << YAML::Value << YAML::BeginMap << YAML::Key << "full" << YAML::Value << YAML::BeginSeq;
  for (int i = 0; i < 6; ++i) {
    const Vec6 row = s.P0.row(i).transpose();
    emit_list(out, row.data(), 6);
  }
  out << YAML::EndSeq << YAML::EndMap;
  const double span[] = {s.t0, s.tf};
  out << YAML::Key << "span" << YAML::Value;
  emit_list(out, span, 2);
  out << YAML::Key << "mc" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "N" << YAML::Value << static_cast<long long>(s.mc.N);
  out << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(s.mc.seed);
  out << YAML::EndMap;
  out << YAML::Key << "units" << YAML::Value << s.units;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

Scenario scenario_from_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("YAML parse error: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("", "scenario file must be a map");

  const bool has_base = static_cast<bool>(root["builtin"]);
  Scenario s;
  if (has_base) {
    s = builtin_scenario(read_scalar<std::string>(root["builtin"], "builtin"));
  } else {
    for (const char* key : {"model", "x0", "P0", "span"}) {
      if (!root[key]) throw ConfigError(key, "required for a custom scenario");
    }
    s.name = "custom";
  }

  if (root["name"]) s.name = read_scalar<std::string>(root["name"], "name");
  if (const auto m = root["model"]) {
    if (!m.IsMap()) throw ConfigError("model", "expected a map");
    if (m["kind"]) s.model.kind = model_kind_from_string(read_scalar<std::string>(m["kind"], "model.kind"));
    if (m["mu"]) {
      s.model.mu = read_scalar<double>(m["mu"], "model.mu");
    } else if (!has_base) {
      throw ConfigError("model.mu", "required for a custom scenario");
    }
    if (m["length_unit"]) s.model.length_unit = read_scalar<double>(m["length_unit"], "model.length_unit");
    if (m["time_unit"]) s.model.time_unit = read_scalar<double>(m["time_unit"], "model.time_unit");
  }
  if (root["x0"]) {
    const auto v = read_list(root["x0"], "x0", 6);
    for (int i = 0; i < 6; ++i) s.x0(i) = v[i];
  }
  if (root["P0"]) s.P0 = read_covariance(root["P0"]);
  if (root["span"]) {
    const auto v = read_list(root["span"], "span", 2);
    s.t0 = v[0];
    s.tf = v[1];
  }
  if (const auto mc = root["mc"]) {
    if (!mc.IsMap()) throw ConfigError("mc", "expected a map");
    if (mc["N"]) s.mc.N = read_scalar<long long>(mc["N"], "mc.N");
    if (mc["seed"]) s.mc.seed = read_scalar<unsigned long long>(mc["seed"], "mc.seed");
  }
  if (root["units"]) s.units = read_scalar<std::string>(root["units"], "units");
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string(), "cannot open scenario file");
  std::stringstream ss;
  ss << is.rdbuf();
  return scenario_from_yaml(ss.str());
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << scenario_to_yaml(s);
}

}  // namespace gmprop
