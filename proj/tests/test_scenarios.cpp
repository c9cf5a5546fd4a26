#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gmprop/error.hpp"
#include "gmprop/propagation.hpp"
#include "gmprop/scenarios.hpp"

using namespace gmprop;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)); }

}  // namespace

TEST_CASE("geo") {
  const auto s = builtin_scenario("geo");
  CHECK(s.P0(0, 0) == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(s.P0(2, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.P0(3, 3) == doctest::Approx(9e-6).epsilon(1e-15));
  CHECK(s.P0(5, 5) == doctest::Approx(1e-10).epsilon(1e-15));
  CHECK(s.tf == 86164.0905);
  const auto el = state_to_elements(s.x0, s.model.mu);
  CHECK(2.0 * std::numbers::pi * std::sqrt(std::pow(el.a, 3) / s.model.mu) == doctest::Approx(86164.0905).epsilon(1e-14));
  const double times[] = {s.tf};
  const Vec6 back = propagate_states(s.model, s.x0, 0.0, times).back();
  CHECK((back - s.x0).head<3>().norm() <= 1e-4);
}

TEST_CASE("molniya elements round trip") {
  const auto s = builtin_scenario("molniya");
  const auto el = state_to_elements(s.x0, s.model.mu);
  CHECK(std::abs(el.e - 0.72) <= 1e-10);
  CHECK(std::abs(el.a - 26555.4) <= 1e-10 * 26555.4);
  CHECK(angle_gap(el.i, 63.5 * std::numbers::pi / 180.0) <= 1e-10);
  CHECK(angle_gap(el.argp, 270.0 * std::numbers::pi / 180.0) <= 1e-10);
  CHECK(angle_gap(el.raan, 0.0) <= 1e-10);
  CHECK(angle_gap(el.nu, 0.0) <= 1e-10);
  CHECK(s.tf / 3600.0 == doctest::Approx(12.0).epsilon(0.01));
  CHECK((s.P0.array() == builtin_scenario("geo").P0.array()).all());

  OrbitalElements gen{12000.0, 0.3, 0.7, 1.1, 2.2, 0.4};
  const auto rt = state_to_elements(elements_to_state(gen, kEarthMu), kEarthMu);
  CHECK(rt.a == doctest::Approx(gen.a).epsilon(1e-12));
  CHECK(rt.e == doctest::Approx(gen.e).epsilon(1e-12));
  CHECK(angle_gap(rt.raan, gen.raan) <= 1e-12);
  CHECK(angle_gap(rt.argp, gen.argp) <= 1e-12);
  CHECK(angle_gap(rt.nu, gen.nu) <= 1e-12);
}

TEST_CASE("butterfly") {
  const auto s = builtin_scenario("butterfly");
  CHECK(s.model.kind == ModelKind::CR3BP);
  CHECK(s.model.mu == 1.0 / 82.30059);
  CHECK(s.x0(0) == 0.924);
  CHECK(s.x0(1) == 1.47e-28);
  CHECK(s.x0(2) == 0.148);
  CHECK(s.x0(4) == -0.147);
  CHECK(s.P0(0, 0) == doctest::Approx(1.01e-8).epsilon(1e-15));
  CHECK(s.P0(1, 1) == doctest::Approx(1e-10).epsilon(1e-15));
  CHECK(s.tf * s.model.time_unit / 86400.0 == doctest::Approx(21.1).epsilon(0.02));

  // The pinned span is the return-distance minimum of the published state; the defect is pinned too.
  const double refined = refine_period(s.model, s.x0, 21.1 * 86400.0 / s.model.time_unit, 0.3);
  CHECK(std::abs(refined - s.tf) <= 1e-6);
  const double times[] = {s.tf};
  const double defect = (propagate_states(s.model, s.x0, 0.0, times).back() - s.x0).norm();
  CHECK(defect == doctest::Approx(0.3198).epsilon(1e-3));
}

TEST_CASE("unknown builtin lists the valid names") {
  try {
    (void)builtin_scenario("leo");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("butterfly") != std::string::npos);
  }
}

TEST_CASE("yaml round trip and golden files") {
  for (const auto& name : builtin_scenario_names()) {
    CAPTURE(name);
    const auto s = builtin_scenario(name);
    const auto text = scenario_to_yaml(s);
    CHECK(scenario_from_yaml(text) == s);
    CHECK(read_file(std::filesystem::path(GMPROP_TEST_DIR) / "golden" / (name + ".yaml")) == text);
  }
}

TEST_CASE("yaml overrides and schema errors") {
  const auto s = scenario_from_yaml("builtin: geo\nmc:\n  N: 1000\n");
  auto expected = builtin_scenario("geo");
  expected.mc.N = 1000;
  CHECK(s == expected);

  const auto custom = scenario_from_yaml(
      "model: {kind: two_body, mu: 398600.4418}\n"
      "x0: [7000, 0, 0, 0, 7.5, 0]\n"
      "P0: {diag: [1, 1, 1, 1e-6, 1e-6, 1e-6], identity: 1e-9}\n"
      "span: [0, 3600]\n");
  CHECK(custom.P0(0, 0) == 1.0 + 1e-9);
  CHECK(custom.tf == 3600.0);

  try {
    (void)scenario_from_yaml("model: {kind: two_body, mu: 1}\nx0: [1, 0, 0, 0, 1, 0]\nspan: [0, 1]\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path() == "P0");
  }
  try {
    (void)scenario_from_yaml("builtin: geo\nx0: [1, 2]\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path() == "x0");
  }
  CHECK_THROWS_AS((void)scenario_from_yaml("builtin: geo\nP0: {diag: [1, 1, 1, 1, 1, -1]}\n"), ConfigError);
  CHECK_THROWS_AS((void)scenario_from_yaml("builtin: geo\nspan: [5, 1]\n"), ConfigError);
  CHECK_THROWS_AS((void)scenario_from_yaml("[1, 2"), ConfigError);
}
