#include "gmprop/dynamics.hpp"

#include <cmath>

#include "gmprop/error.hpp"

namespace gmprop {

namespace {

constexpr double kMinRadius = 1e-10;

// Acceleration of a point mass with parameter gm at relative position rho,
// plus its first and second partials with respect to rho.
void point_mass(const Eigen::Vector3d& rho, double gm, int order, const char* body, Eigen::Vector3d& a, Mat3& da,
                std::array<Mat3, 3>& d2a) {
  const double r2 = rho.squaredNorm();
  const double r = std::sqrt(r2);
  if (!(r > kMinRadius)) throw SingularityError(body);
  const double r3 = r2 * r;
  a.noalias() -= gm / r3 * rho;
  if (order < 1) return;
  const double r5 = r3 * r2;
  da.noalias() -= gm * (Mat3::Identity() / r3 - 3.0 * rho * rho.transpose() / r5);
  if (order < 2) return;
  const double r7 = r5 * r2;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = j; k < 3; ++k) {
        double v = -15.0 * gm * rho(i) * rho(j) * rho(k) / r7;
        double d = 0.0;
        if (i == j) d += rho(k);
        if (i == k) d += rho(j);
        if (j == k) d += rho(i);
        v += 3.0 * gm * d / r5;
        d2a[i](j, k) += v;
        if (k != j) d2a[i](k, j) += v;
      }
    }
  }
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::TwoBody:
      return "two_body";
    case ModelKind::CR3BP:
      return "cr3bp";
    case ModelKind::Linear:
      return "linear";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "two_body") return ModelKind::TwoBody;
  if (name == "cr3bp") return ModelKind::CR3BP;
  if (name == "linear") return ModelKind::Linear;
  throw ConfigError("model.kind", "unknown model kind '" + name + "' (expected two_body, cr3bp or linear)");
}

DynamicsModel DynamicsModel::two_body(double mu) {
  DynamicsModel m;
  m.kind = ModelKind::TwoBody;
  m.mu = mu;
  m.validate();
  return m;
}

DynamicsModel DynamicsModel::cr3bp(double mu, double length_unit, double time_unit) {
  DynamicsModel m;
  m.kind = ModelKind::CR3BP;
  m.mu = mu;
  m.length_unit = length_unit;
  m.time_unit = time_unit;
  m.validate();
  return m;
}

DynamicsModel DynamicsModel::linear_field(const Mat6& a) {
  DynamicsModel m;
  m.kind = ModelKind::Linear;
  m.mu = 1.0;
  m.linear = a;
  return m;
}

void DynamicsModel::validate() const {
  if (kind == ModelKind::Linear) return;
  if (!(mu > 0.0)) throw ConfigError("model.mu", "gravitational parameter must be positive");
  if (kind == ModelKind::CR3BP && !(mu < 0.5)) throw ConfigError("model.mu", "CR3BP mass ratio must be below 1/2");
  if (!(length_unit > 0.0) || !(time_unit > 0.0)) throw ConfigError("model", "unit scales must be positive");
}

void eval_jet6(const DynamicsModel& model, const Vec6& x, int order, Jet6& jet) {
  if (model.kind == ModelKind::Linear) {
    jet.f.noalias() = model.linear * x;
    if (order >= 1) jet.df = model.linear;
    if (order >= 2)
      for (auto& h : jet.accel_hessian) h.setZero();
    return;
  }

  const Eigen::Vector3d r = x.head<3>();
  const Eigen::Vector3d v = x.tail<3>();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Mat3 da = Mat3::Zero();
  if (order >= 2)
    for (auto& h : jet.accel_hessian) h.setZero();

  Mat3 dadv = Mat3::Zero();
  if (model.kind == ModelKind::TwoBody) {
    point_mass(r, model.mu, order, "central body", a, da, jet.accel_hessian);
  } else {
    const double mu = model.mu;
    point_mass(r - Eigen::Vector3d(-mu, 0.0, 0.0), 1.0 - mu, order, "primary 1 (larger primary)", a, da,
               jet.accel_hessian);
    point_mass(r - Eigen::Vector3d(1.0 - mu, 0.0, 0.0), mu, order, "primary 2 (smaller primary)", a, da,
               jet.accel_hessian);
    a(0) += r(0) + 2.0 * v(1);
    a(1) += r(1) - 2.0 * v(0);
    da(0, 0) += 1.0;
    da(1, 1) += 1.0;
    dadv(0, 1) = 2.0;
    dadv(1, 0) = -2.0;
  }

  jet.f.head<3>() = v;
  jet.f.tail<3>() = a;
  if (order >= 1) {
    jet.df.setZero();
    jet.df.topRightCorner<3, 3>().setIdentity();
    jet.df.bottomLeftCorner<3, 3>() = da;
    jet.df.bottomRightCorner<3, 3>() = dadv;
  }
}

void eval_field(const DynamicsModel& model, const Vec6& x, Vec6& f) {
  Jet6 jet;
  eval_jet6(model, x, 0, jet);
  f = jet.f;
}

FieldJet eval_jet(const DynamicsModel& model, const Vector& x, int order) {
  if (x.size() != kStateDim) throw DimensionError("eval_jet: state must have 6 components");
  if (order < 0 || order > 2) throw DimensionError("eval_jet: order must be 0, 1 or 2");
  Jet6 jet;
  eval_jet6(model, Vec6(x), order, jet);
  FieldJet out;
  out.f = jet.f;
  if (order >= 1) out.df = jet.df;
  if (order >= 2) {
    out.d2f = Tensor3(kStateDim);
    for (int i = 0; i < 3; ++i) out.d2f.slice(3 + i).topLeftCorner<3, 3>() = jet.accel_hessian[i];
  }
  return out;
}

double jacobi_constant(const DynamicsModel& model, const Vector& x) {
  if (model.kind != ModelKind::CR3BP) throw Error("jacobi_constant: only defined for the CR3BP");
  const double mu = model.mu;
  const double r1 = std::sqrt((x(0) + mu) * (x(0) + mu) + x(1) * x(1) + x(2) * x(2));
  const double r2 = std::sqrt((x(0) - 1.0 + mu) * (x(0) - 1.0 + mu) + x(1) * x(1) + x(2) * x(2));
  const double u = 0.5 * (x(0) * x(0) + x(1) * x(1)) + (1.0 - mu) / r1 + mu / r2;
  return 2.0 * u - x.tail<3>().squaredNorm();
}

}  // namespace gmprop
