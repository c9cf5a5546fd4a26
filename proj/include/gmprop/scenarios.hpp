/**
 * @file scenarios.hpp
 * @brief Built-in test orbits and the YAML scenario format.
 *
 * Config schema (all keys optional when `builtin` is given, in which case
 * they override the built-in values):
 *
 *     builtin: geo | molniya | butterfly
 *     name: string
 *     model: {kind: two_body | cr3bp, mu: double, length_unit: km, time_unit: s}
 *     x0: [6 doubles]
 *     P0: {full: 6x6 nested list} or {diag: [6 doubles], identity: double}
 *     span: [t0, tf]
 *     mc: {N: int, seed: int}
 *     units: string
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gmprop/dynamics.hpp"

namespace gmprop {

struct McSettings {
  Eigen::Index N = 10000;
  std::uint64_t seed = 1;

  bool operator==(const McSettings&) const = default;
};

struct Scenario {
  std::string name;
  DynamicsModel model;
  Vec6 x0 = Vec6::Zero();
  Mat6 P0 = Mat6::Identity();
  double t0 = 0.0;
  double tf = 0.0;
  std::string units;
  McSettings mc;

  /// Throws ConfigError if P0 is not SPD, tf <= t0, or the model is invalid.
  void validate() const;
};

[[nodiscard]] bool operator==(const Scenario& a, const Scenario& b);

[[nodiscard]] const std::vector<std::string>& builtin_scenario_names();
[[nodiscard]] Scenario builtin_scenario(const std::string& name);

struct OrbitalElements {
  double a = 0.0;      ///< semi-major axis
  double e = 0.0;
  double i = 0.0;      ///< radians
  double raan = 0.0;   ///< radians
  double argp = 0.0;   ///< radians
  double nu = 0.0;     ///< true anomaly, radians
};

[[nodiscard]] Vec6 elements_to_state(const OrbitalElements& el, double mu);
/// Valid for non-circular, inclined orbits.
[[nodiscard]] OrbitalElements state_to_elements(const Vec6& x, double mu);

/// Epoch near `guess` minimizing the full-state return distance ||x(t) - x0||.
[[nodiscard]] double refine_period(const DynamicsModel& model, const Vec6& x0, double guess, double half_width);

[[nodiscard]] std::string scenario_to_yaml(const Scenario& s);
[[nodiscard]] Scenario scenario_from_yaml(const std::string& text);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& s);

}  // namespace gmprop
