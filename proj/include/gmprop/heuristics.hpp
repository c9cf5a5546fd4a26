/**
 * @file heuristics.hpp
 * @brief Split-direction heuristics and unscented statistical linearization.
 *
 * Each heuristic maximizes a nonlinearity objective over deviations of unit
 * 2-norm or unit Mahalanobis norm. The reported value is always in norm units
 * (square root of the quadratic objectives), so that a weighted criterion can
 * be compared against a Mahalanobis-distance tolerance.
 */
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmprop/tensorlab.hpp"

namespace gmprop {

enum class HeuristicKind {
  MAXVAR,
  FOS,
  SOS,
  SOLC,
  SADL,
  USFOS,
  USSOLC,
  SAFOS,
  SASOS,
  WUSSOS,
  WUSSOLC,
  WUSSADL_S,
  WUSSADL_D,
  WSASOS,
};

[[nodiscard]] std::string to_string(HeuristicKind kind);
[[nodiscard]] HeuristicKind heuristic_kind_from_string(std::string_view name);
[[nodiscard]] const std::vector<HeuristicKind>& all_heuristic_kinds();

[[nodiscard]] bool needs_stt(HeuristicKind kind);
[[nodiscard]] bool needs_whitening(HeuristicKind kind);
[[nodiscard]] bool needs_sigma_points(HeuristicKind kind);
/// Constraint is the Mahalanobis norm of the input covariance.
[[nodiscard]] bool is_uncertainty_scaled(HeuristicKind kind);

struct HeuristicSpec {
  HeuristicKind kind = HeuristicKind::WUSSOLC;
  double ut_alpha = 0.5;
  double ut_beta = 2.0;
  double ut_kappa = 0.0;
  PowerIterationOptions power;

  void validate() const;
};

/// Unscented transform weights and sigma-point offsets for an n-dimensional input.
struct SigmaPoints {
  std::vector<Vector> points;  ///< 2n+1 points, centre first
  std::vector<double> wm;
  std::vector<double> wc;
};

[[nodiscard]] SigmaPoints sigma_points(const Vector& m, const Matrix& P, const HeuristicSpec& spec);

struct StatisticalLinearization {
  Matrix G;  ///< P_xz^T P_x^-1
  Vector b;  ///< m_z - G m
  Vector m_z;
  Matrix P_xz;
  Matrix P_z;
};

/// Fit from already-mapped sigma points (same order as sigma_points()).
[[nodiscard]] StatisticalLinearization statistical_linearization(const SigmaPoints& sp, const std::vector<Vector>& mapped,
                                                                 const Vector& m, const Matrix& P);

using VectorMap = std::function<Vector(const Vector&)>;

[[nodiscard]] StatisticalLinearization statistical_linearization(const VectorMap& map, const Vector& m, const Matrix& P,
                                                                 const HeuristicSpec& spec);

/// W = L^-1 with L L^T = Phi P0 Phi^T.
[[nodiscard]] Matrix whitening_from_parent(const Matrix& P0, const Matrix& phi);

/// Everything a heuristic may need about one mixand at one epoch.
struct SplitContext {
  Matrix P;         ///< input covariance P_x
  Matrix G;         ///< Jacobian (STM)
  Tensor3 G2;       ///< second-order tensor (STT)
  Matrix W;         ///< output whitening
  std::optional<StatisticalLinearization> sl;
};

struct SplitDirection {
  Vector direction;  ///< unit 2-norm, sign-canonicalized
  Vector delta;      ///< maximizer satisfying the heuristic's own constraint
  double value = 0.0;
  bool tie = false;  ///< top eigenvalue repeated
};

/// Maximizes the heuristic objective. Throws ConfigError naming a missing context field.
[[nodiscard]] SplitDirection split_direction(const HeuristicSpec& spec, const SplitContext& ctx);

/// Objective value of an arbitrary deviation, in the same units as SplitDirection::value.
[[nodiscard]] double heuristic_objective(const HeuristicSpec& spec, const SplitContext& ctx, const Vector& delta);

}  // namespace gmprop
