#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gmprop/error.hpp"
#include "gmprop/integrator.hpp"

using namespace gmprop;

TEST_CASE("harmonic oscillator against the closed form") {
  const OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(2);
    dy << y(1), -y(0);
  };
  std::vector<double> times;
  for (int i = 0; i <= 20; ++i) times.push_back(0.5 * i);
  const auto ys = integrate_ode(rhs, Eigen::Vector2d(1.0, 0.0), 0.0, times);
  REQUIRE(ys.size() == times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(ys[i](0) == doctest::Approx(std::cos(times[i])).epsilon(1e-11).scale(1.0));
    CHECK(ys[i](1) == doctest::Approx(-std::sin(times[i])).epsilon(1e-11).scale(1.0));
  }
}

TEST_CASE("output at t0 returns the initial state") {
  const OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; };
  const std::vector<double> times = {1.0, 1.0, 2.0};
  const auto ys = integrate_ode(rhs, Eigen::VectorXd::Ones(1), 1.0, times);
  CHECK(ys[0](0) == 1.0);
  CHECK(ys[1](0) == 1.0);
  CHECK(ys[2](0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("time-dependent right-hand side") {
  // y = sin(t) solves y' = cos(t) - y + sin(t).
  const OdeRhs rhs = [](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(1);
    dy(0) = std::cos(t) - y(0) + std::sin(t);
  };
  const std::vector<double> times = {3.0};
  const auto ys = integrate_ode(rhs, Eigen::VectorXd::Zero(1), 0.0, times);
  CHECK(ys[0](0) == doctest::Approx(std::sin(3.0)).epsilon(1e-12).scale(1.0));
}

TEST_CASE("invalid output times") {
  const OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = y; };
  const std::vector<double> before = {-1.0};
  CHECK_THROWS_AS((void)integrate_ode(rhs, Eigen::VectorXd::Ones(1), 0.0, before), Error);
  const std::vector<double> unsorted = {2.0, 1.0};
  CHECK_THROWS_AS((void)integrate_ode(rhs, Eigen::VectorXd::Ones(1), 0.0, unsorted), Error);
}

TEST_CASE("singularity is reported with the last good epoch") {
  // y' = -1/(2y) from y(0)=1: y = sqrt(1 - t) collapses at t = 1.
  const OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    if (y(0) <= 1e-6) throw SingularityError("origin");
    dy.resize(1);
    dy(0) = -0.5 / y(0);
  };
  const std::vector<double> times = {2.0};
  try {
    (void)integrate_ode(rhs, Eigen::VectorXd::Ones(1), 0.0, times);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.last_good_epoch() > 0.9);
    CHECK(e.last_good_epoch() < 1.0);
  }
}
