/**
 * @file integrator.hpp
 * @brief Adaptive embedded Runge-Kutta-Fehlberg 7(8) integrator with exact output epochs.
 */
#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gmprop {

struct IntegratorOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  int max_steps = 2'000'000;
  /// Leading components that take part in step-size control; -1 means all.
  Eigen::Index error_components = -1;
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

/**
 * Integrates dy/dt = rhs(t, y) from t0 and returns y at every requested time.
 *
 * Output times must be sorted ascending and not precede t0. Steps are clipped
 * so that every output time is hit exactly; the eighth-order solution is
 * propagated (local extrapolation). Throws IntegrationError with the last
 * accepted epoch when the step size collapses, the step budget runs out, or
 * the right-hand side hits a singularity.
 *
 * The Fehlberg error estimate vanishes identically for pure quadratures
 * (rhs independent of y), so those are not step-size controlled.
 */
[[nodiscard]] std::vector<Eigen::VectorXd> integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0,
                                                         std::span<const double> output_times,
                                                         const IntegratorOptions& opts = {});

}  // namespace gmprop
