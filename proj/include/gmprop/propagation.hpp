/**
 * @file propagation.hpp
 * @brief Joint state/STM/STT integration, flow-map composition and mixand moment propagation.
 */
#pragma once

#include <span>
#include <string>
#include <vector>

#include "gmprop/dynamics.hpp"
#include "gmprop/integrator.hpp"
#include "gmprop/tensorlab.hpp"

namespace gmprop {

/// One weighted Gaussian component.
struct Mixand {
  double w = 1.0;
  Vector m;
  Matrix P;
  /// Dotted path from the root, e.g. "0.2.1"; depth = number of components.
  std::string lineage = "0";

  [[nodiscard]] int depth() const;
};

/// Flow expansion about one trajectory at a single epoch.
struct Checkpoint {
  double t = 0.0;
  Vec6 x;
  Mat6 phi;      ///< Phi(t, t0)
  Tensor3 psi;   ///< Psi(t, t0); empty for first-order expansions
};

struct FlowExpansion {
  double t0 = 0.0;
  int order = 1;
  std::vector<Checkpoint> checkpoints;

  [[nodiscard]] const Checkpoint& back() const { return checkpoints.back(); }
};

/// Size of the packed extended state for a given expansion order (0, 1 or 2).
[[nodiscard]] Eigen::Index extended_state_size(int order);

/**
 * Integrates the state together with its first (and for order 2 second)
 * variational equations and records the expansion at each checkpoint time.
 * Checkpoint times must be strictly increasing and not precede t0. Step-size
 * control acts on the state and STM only.
 */
[[nodiscard]] FlowExpansion integrate_flow(const DynamicsModel& model, const Vector& x0, double t0,
                                           std::span<const double> checkpoint_times, int order,
                                           const IntegratorOptions& opts = {});

/// State-only propagation to each output time.
[[nodiscard]] std::vector<Vec6> propagate_states(const DynamicsModel& model, const Vector& x0, double t0,
                                                 std::span<const double> times, const IntegratorOptions& opts = {});

/// Phi(tf,ts) = Phi(tf,t0) Phi(ts,t0)^-1 via an LU solve.
[[nodiscard]] Matrix stm_between(const Matrix& phi_f0, const Matrix& phi_s0);

/// Psi(tf,ts) from the t0-referenced expansions by two passes of per-slice solves.
[[nodiscard]] Tensor3 stt_between(const Matrix& phi_f0, const Tensor3& psi_f0, const Matrix& phi_s0,
                                  const Tensor3& psi_s0, const Matrix& phi_fs);

/// Psi(tf,t0) from (Phi,Psi)(tf,ts) and (Phi,Psi)(ts,t0).
[[nodiscard]] Tensor3 stt_compose(const Matrix& phi_fs, const Tensor3& psi_fs, const Matrix& phi_s0,
                                  const Tensor3& psi_s0);

/// First-order Taylor update of the STM for a reference shifted by dm.
[[nodiscard]] Matrix stm_shift_reference(const Matrix& phi, const Tensor3& psi, const Vector& dm);

/// m' = x_f, P' = Phi P Phi^T. Throws IndefiniteCovarianceError if P' is not SPD.
[[nodiscard]] Mixand propagate_moments_first(const Mixand& mix, const Vector& x_f, const Matrix& phi);

/// Second-order Taylor moments: mean correction 1/2 Psi:P and the Gaussian fourth-moment covariance term.
[[nodiscard]] Mixand propagate_moments_second(const Mixand& mix, const Vector& x_f, const Matrix& phi,
                                              const Tensor3& psi);

/// Throws IndefiniteCovarianceError when the smallest eigenvalue is negative beyond eigensolver roundoff
/// (16 n eps lambda_max) or the matrix is not finite.
void require_spd(const Matrix& p, const std::string& what);

}  // namespace gmprop
