/**
 * @file dynamics.hpp
 * @brief Autonomous vector fields with analytic first and second state partials.
 *
 * Supported models: ideal two-body motion (dimensional, km and s), the
 * circular restricted three-body problem in the rotating frame
 * (nondimensional, primaries at (-mu,0,0) and (1-mu,0,0), unit rotation rate)
 * and a constant linear field used for verification.
 */
#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>

#include "gmprop/tensorlab.hpp"

namespace gmprop {

inline constexpr int kStateDim = 6;
/// Earth gravitational parameter [km^3/s^2].
inline constexpr double kEarthMu = 398600.4418;

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat3 = Eigen::Matrix3d;

enum class ModelKind { TwoBody, CR3BP, Linear };

[[nodiscard]] std::string to_string(ModelKind kind);
[[nodiscard]] ModelKind model_kind_from_string(const std::string& name);

struct DynamicsModel {
  ModelKind kind = ModelKind::TwoBody;
  /// Two-body: km^3/s^2. CR3BP: mass ratio of the smaller primary.
  double mu = kEarthMu;
  /// Reporting scales: kilometres and seconds per state unit.
  double length_unit = 1.0;
  double time_unit = 1.0;
  /// Only used by ModelKind::Linear.
  Mat6 linear = Mat6::Zero();

  [[nodiscard]] static DynamicsModel two_body(double mu = kEarthMu);
  [[nodiscard]] static DynamicsModel cr3bp(double mu, double length_unit = 1.0, double time_unit = 1.0);
  [[nodiscard]] static DynamicsModel linear_field(const Mat6& a);

  /// Throws ConfigError on invalid parameters.
  void validate() const;
  [[nodiscard]] bool has_second_partials() const { return kind != ModelKind::Linear; }
};

/**
 * Fixed-size jet used inside the integrators.
 *
 * Second partials of every supported field vanish except for the
 * acceleration rows differentiated twice by position, so only those three
 * 3x3 blocks are stored.
 */
struct Jet6 {
  Vec6 f;
  Mat6 df;
  std::array<Mat3, 3> accel_hessian;
};

void eval_field(const DynamicsModel& model, const Vec6& x, Vec6& f);
void eval_jet6(const DynamicsModel& model, const Vec6& x, int order, Jet6& jet);

struct FieldJet {
  Vector f;
  Matrix df;      ///< empty when order < 1
  Tensor3 d2f;    ///< empty when order < 2
};

/// Field value and state partials up to the requested order (0, 1 or 2).
[[nodiscard]] FieldJet eval_jet(const DynamicsModel& model, const Vector& x, int order);

/// CR3BP Jacobi constant C = 2U - v^2.
[[nodiscard]] double jacobi_constant(const DynamicsModel& model, const Vector& x);

}  // namespace gmprop
