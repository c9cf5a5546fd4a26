#include "gmprop/heuristics.hpp"

#include <array>
#include <cmath>

#include "gmprop/error.hpp"

namespace gmprop {

namespace {

struct KindName {
  HeuristicKind kind;
  const char* name;
};

constexpr std::array<KindName, 14> kKindNames = {{
    {HeuristicKind::MAXVAR, "MAXVAR"},
    {HeuristicKind::FOS, "FOS"},
    {HeuristicKind::SOS, "SOS"},
    {HeuristicKind::SOLC, "SOLC"},
    {HeuristicKind::SADL, "SADL"},
    {HeuristicKind::USFOS, "USFOS"},
    {HeuristicKind::USSOLC, "USSOLC"},
    {HeuristicKind::SAFOS, "SAFOS"},
    {HeuristicKind::SASOS, "SASOS"},
    {HeuristicKind::WUSSOS, "WUSSOS"},
    {HeuristicKind::WUSSOLC, "WUSSOLC"},
    {HeuristicKind::WUSSADL_S, "WUSSADL_S"},
    {HeuristicKind::WUSSADL_D, "WUSSADL_D"},
    {HeuristicKind::WSASOS, "WSASOS"},
}};

constexpr double kTieTol = 1e-10;

const Matrix& require_matrix(const Matrix& m, const char* field, HeuristicKind kind) {
  if (m.size() == 0) throw ConfigError(std::string("SplitContext.") + field, to_string(kind) + " requires it");
  return m;
}

const Tensor3& require_stt(const SplitContext& ctx, HeuristicKind kind) {
  if (ctx.G2.dim() == 0) throw ConfigError("SplitContext.G2", to_string(kind) + " requires it");
  return ctx.G2;
}

const StatisticalLinearization& require_sl(const SplitContext& ctx, HeuristicKind kind) {
  if (!ctx.sl) throw ConfigError("SplitContext.sl", to_string(kind) + " requires it");
  return *ctx.sl;
}

Matrix input_factor(const SplitContext& ctx, HeuristicKind kind) {
  return cholesky_lower(symmetric_part(require_matrix(ctx.P, "P", kind)));
}

SplitDirection finish(Vector delta, double value, bool tie) {
  SplitDirection out;
  const double nrm = delta.norm();
  out.direction = delta / nrm;
  const Vector before = out.direction;
  canonicalize_sign(out.direction);
  out.delta = before.dot(out.direction) < 0.0 ? Vector(-delta) : delta;
  out.value = value;
  out.tie = tie;
  return out;
}

bool is_tie(double top, double second) { return top <= 0.0 || second >= top * (1.0 - kTieTol); }

/// max ||A d|| subject to ||d|| = 1, or ||d||_{P^-1} = 1 when a factor L is supplied.
SplitDirection maximize_linear_norm(const Matrix& a, const Matrix* l) {
  const Matrix b = l ? Matrix(a * *l) : a;
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullV);
  const Vector s = svd.singularValues();
  const bool tie = s.size() > 1 ? is_tie(s(0), s(1)) : false;
  const Vector v = svd.matrixV().col(0);
  return finish(l ? Vector(*l * v) : v, s(0), tie);
}

/// max sqrt(d^T Q d) subject to ||d|| = 1, or ||d||_{P^-1} = 1 when a factor L is supplied.
SplitDirection maximize_quadratic(const Matrix& q, const Matrix* l) {
  const Matrix b = l ? Matrix(l->transpose() * q * *l) : q;
  const auto es = symmetric_eig(b);
  const bool tie = es.values.size() > 1 ? is_tie(es.values(0), es.values(1)) : false;
  const Vector v = es.vectors.col(0);
  return finish(l ? Vector(*l * v) : v, std::sqrt(std::max(es.values(0), 0.0)), tie);
}

SplitDirection maximize_quartic(const Tensor3& t, const Matrix* l, const PowerIterationOptions& opts) {
  const Tensor3 s = l ? congruence(t, *l) : t;
  const auto pair = maximize_symmetric_form(SymmetricTensor::quartic_norm_form(s), opts);
  return finish(l ? Vector(*l * pair.vector) : pair.vector, std::sqrt(std::max(pair.value, 0.0)), false);
}

/// sum_i T_i^T S T_i: Gram matrix of the single contraction d -> (T d) R with R R^T = S.
Matrix single_contraction_gram(const Tensor3& t, const Matrix* s) {
  const Eigen::Index n = t.slice(0).cols();
  Matrix q = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < t.dim(); ++i) {
    q += s ? Matrix(t.slice(i).transpose() * *s * t.slice(i)) : Matrix(t.slice(i).transpose() * t.slice(i));
  }
  return symmetric_part(q);
}

/// Sphere average of (a.u)^2 ||G u||^2 over u = L s, s uniform on the unit sphere, as a quadratic form in delta.
Matrix safos_form(const Matrix& g, const Matrix& l) {
  const double n = static_cast<double>(l.rows());
  const Matrix b = symmetric_part(l.transpose() * g.transpose() * g * l);
  const Matrix m = b.trace() * Matrix::Identity(b.rows(), b.cols()) + 2.0 * b;
  return symmetric_part(l * m * l.transpose()) / (n * (n + 2.0));
}

/// Sphere average of (a.u)^2 ||T u u||^2 over u = L s, as a quadratic form in delta.
Matrix sasos_form(const Tensor3& t, const Matrix& l) {
  const Eigen::Index dim = l.rows();
  const double n = static_cast<double>(dim);
  Matrix m = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < t.dim(); ++i) {
    const Matrix a = symmetric_part(l.transpose() * t.slice(i) * l);
    const double tr = a.trace();
    const Matrix a2 = a * a;
    m += (tr * tr + 2.0 * a2.trace()) * Matrix::Identity(dim, dim) + 4.0 * tr * a + 8.0 * a2;
  }
  return symmetric_part(l * m * l.transpose()) / (n * (n + 2.0) * (n + 4.0));
}

Matrix sadl_difference(const SplitContext& ctx, HeuristicKind kind) {
  const auto& sl = require_sl(ctx, kind);
  return sl.G - require_matrix(ctx.G, "G", kind);
}

}  // namespace

std::string to_string(HeuristicKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "UNKNOWN";
}

HeuristicKind heuristic_kind_from_string(std::string_view name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  std::string valid;
  for (const auto& kn : kKindNames) valid += std::string(valid.empty() ? "" : ", ") + kn.name;
  throw ConfigError("heuristic", "unknown heuristic '" + std::string(name) + "' (valid: " + valid + ")");
}

const std::vector<HeuristicKind>& all_heuristic_kinds() {
  static const std::vector<HeuristicKind> kinds = [] {
    std::vector<HeuristicKind> out;
    for (const auto& kn : kKindNames) out.push_back(kn.kind);
    return out;
  }();
  return kinds;
}

bool needs_stt(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::SOS:
    case HeuristicKind::SOLC:
    case HeuristicKind::USSOLC:
    case HeuristicKind::SASOS:
    case HeuristicKind::WUSSOS:
    case HeuristicKind::WUSSOLC:
    case HeuristicKind::WSASOS:
      return true;
    default:
      return false;
  }
}

bool needs_whitening(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::WUSSOS:
    case HeuristicKind::WUSSOLC:
    case HeuristicKind::WUSSADL_S:
    case HeuristicKind::WUSSADL_D:
    case HeuristicKind::WSASOS:
      return true;
    default:
      return false;
  }
}

bool needs_sigma_points(HeuristicKind kind) {
  return kind == HeuristicKind::SADL || kind == HeuristicKind::WUSSADL_S || kind == HeuristicKind::WUSSADL_D;
}

bool is_uncertainty_scaled(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::MAXVAR:
    case HeuristicKind::USFOS:
    case HeuristicKind::USSOLC:
    case HeuristicKind::WUSSOS:
    case HeuristicKind::WUSSOLC:
    case HeuristicKind::WUSSADL_S:
    case HeuristicKind::WUSSADL_D:
      return true;
    default:
      return false;
  }
}

void HeuristicSpec::validate() const {
  if (!(ut_alpha > 0.0)) throw ConfigError("heuristic.ut_alpha", "must be positive");
  if (!std::isfinite(ut_beta)) throw ConfigError("heuristic.ut_beta", "must be finite");
  if (!std::isfinite(ut_kappa)) throw ConfigError("heuristic.ut_kappa", "must be finite");
  if (power.max_iter < 1) throw ConfigError("heuristic.power.max_iter", "must be at least 1");
}

SigmaPoints sigma_points(const Vector& m, const Matrix& P, const HeuristicSpec& spec) {
  const Eigen::Index n = m.size();
  if (P.rows() != n || P.cols() != n) throw DimensionError("sigma_points: covariance does not match mean");
  const double nd = static_cast<double>(n);
  const double lambda = spec.ut_alpha * spec.ut_alpha * (nd + spec.ut_kappa) - nd;
  const double c = nd + lambda;
  if (!(c > 0.0)) throw ConfigError("heuristic.ut_alpha", "sigma-point spread n + lambda must be positive");
  const Matrix l = std::sqrt(c) * cholesky_lower(symmetric_part(P));

  SigmaPoints sp;
  sp.points.reserve(2 * n + 1);
  sp.points.push_back(m);
  for (Eigen::Index i = 0; i < n; ++i) sp.points.push_back(m + l.col(i));
  for (Eigen::Index i = 0; i < n; ++i) sp.points.push_back(m - l.col(i));
  sp.wm.assign(2 * n + 1, 0.5 / c);
  sp.wc.assign(2 * n + 1, 0.5 / c);
  sp.wm[0] = lambda / c;
  sp.wc[0] = lambda / c + 1.0 - spec.ut_alpha * spec.ut_alpha + spec.ut_beta;
  return sp;
}

StatisticalLinearization statistical_linearization(const SigmaPoints& sp, const std::vector<Vector>& mapped,
                                                   const Vector& m, const Matrix& P) {
  if (mapped.size() != sp.points.size() || mapped.empty()) {
    throw DimensionError("statistical_linearization: mapped point count does not match sigma points");
  }
  const Eigen::Index nz = mapped.front().size();
  StatisticalLinearization out;
  out.m_z = Vector::Zero(nz);
  for (std::size_t i = 0; i < mapped.size(); ++i) out.m_z += sp.wm[i] * mapped[i];
  out.P_xz = Matrix::Zero(m.size(), nz);
  out.P_z = Matrix::Zero(nz, nz);
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    const Vector dz = mapped[i] - out.m_z;
    out.P_xz += sp.wc[i] * (sp.points[i] - m) * dz.transpose();
    out.P_z += sp.wc[i] * dz * dz.transpose();
  }
  out.P_z = symmetric_part(out.P_z);
  const Matrix l = cholesky_lower(symmetric_part(P));
  // G = P_xz^T P^-1
  const Matrix pinv_pxz = l.transpose().triangularView<Eigen::Upper>().solve(l.triangularView<Eigen::Lower>().solve(out.P_xz));
  out.G = pinv_pxz.transpose();
  out.b = out.m_z - out.G * m;
  return out;
}

StatisticalLinearization statistical_linearization(const VectorMap& map, const Vector& m, const Matrix& P,
                                                   const HeuristicSpec& spec) {
  const auto sp = sigma_points(m, P, spec);
  std::vector<Vector> mapped;
  mapped.reserve(sp.points.size());
  for (const auto& x : sp.points) mapped.push_back(map(x));
  return statistical_linearization(sp, mapped, m, P);
}

Matrix whitening_from_parent(const Matrix& P0, const Matrix& phi) {
  if (phi.cols() != P0.rows()) throw DimensionError("whitening_from_parent: dimension mismatch");
  // Cholesky factor of Phi P0 Phi^T from a QR of (Phi L0)^T, without forming the product.
  const Matrix b = phi * cholesky_lower(P0);
  Eigen::HouseholderQR<Matrix> qr(b.transpose());
  Matrix l = qr.matrixQR().topRows(b.rows()).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
  for (Eigen::Index j = 0; j < l.cols(); ++j) {
    if (!(std::abs(l(j, j)) > 0.0) || !std::isfinite(l(j, j)))
      throw NotPositiveDefiniteError("whitening_from_parent: mapped covariance is singular", static_cast<int>(j));
    if (l(j, j) < 0.0) l.col(j) = -l.col(j);
  }
  return l.triangularView<Eigen::Lower>().solve(Matrix::Identity(l.rows(), l.cols()));
}

SplitDirection split_direction(const HeuristicSpec& spec, const SplitContext& ctx) {
  const auto kind = spec.kind;
  switch (kind) {
    case HeuristicKind::MAXVAR: {
      const auto es = symmetric_eig(require_matrix(ctx.P, "P", kind));
      const double top = std::max(es.values(0), 0.0);
      const bool tie = es.values.size() > 1 ? is_tie(es.values(0), es.values(1)) : false;
      return finish(std::sqrt(top) * es.vectors.col(0), std::sqrt(top), tie);
    }
    case HeuristicKind::FOS:
      return maximize_linear_norm(require_matrix(ctx.G, "G", kind), nullptr);
    case HeuristicKind::USFOS: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_linear_norm(require_matrix(ctx.G, "G", kind), &l);
    }
    case HeuristicKind::SADL:
      return maximize_linear_norm(sadl_difference(ctx, kind), nullptr);
    case HeuristicKind::WUSSADL_S:
    case HeuristicKind::WUSSADL_D: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_linear_norm(require_matrix(ctx.W, "W", kind) * sadl_difference(ctx, kind), &l);
    }
    case HeuristicKind::SOS:
      return maximize_quartic(require_stt(ctx, kind), nullptr, spec.power);
    case HeuristicKind::WUSSOS: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_quartic(left_multiply(require_matrix(ctx.W, "W", kind), require_stt(ctx, kind)), &l, spec.power);
    }
    case HeuristicKind::SOLC:
      return maximize_quadratic(single_contraction_gram(require_stt(ctx, kind), nullptr), nullptr);
    case HeuristicKind::USSOLC: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_quadratic(single_contraction_gram(require_stt(ctx, kind), nullptr), &l);
    }
    case HeuristicKind::WUSSOLC: {
      const Matrix l = input_factor(ctx, kind);
      const Tensor3 t = left_multiply(require_matrix(ctx.W, "W", kind), require_stt(ctx, kind));
      return maximize_quadratic(single_contraction_gram(t, &ctx.P), &l);
    }
    case HeuristicKind::SAFOS: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_quadratic(safos_form(require_matrix(ctx.G, "G", kind), l), nullptr);
    }
    case HeuristicKind::SASOS: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_quadratic(sasos_form(require_stt(ctx, kind), l), nullptr);
    }
    case HeuristicKind::WSASOS: {
      const Matrix l = input_factor(ctx, kind);
      return maximize_quadratic(sasos_form(left_multiply(require_matrix(ctx.W, "W", kind), require_stt(ctx, kind)), l),
                                nullptr);
    }
  }
  throw ConfigError("heuristic", "unhandled heuristic kind");
}

double heuristic_objective(const HeuristicSpec& spec, const SplitContext& ctx, const Vector& delta) {
  const auto kind = spec.kind;
  double scale = delta.norm();
  if (is_uncertainty_scaled(kind)) {
    const Matrix l = input_factor(ctx, kind);
    scale = l.triangularView<Eigen::Lower>().solve(delta).norm();
  }
  if (!(scale > 0.0)) throw DimensionError("heuristic_objective: zero deviation");
  const Vector d = delta / scale;

  switch (kind) {
    case HeuristicKind::MAXVAR:
      return d.norm();
    case HeuristicKind::FOS:
    case HeuristicKind::USFOS:
      return (require_matrix(ctx.G, "G", kind) * d).norm();
    case HeuristicKind::SADL:
      return (sadl_difference(ctx, kind) * d).norm();
    case HeuristicKind::WUSSADL_S:
    case HeuristicKind::WUSSADL_D:
      return (require_matrix(ctx.W, "W", kind) * sadl_difference(ctx, kind) * d).norm();
    case HeuristicKind::SOS:
      return contract2(require_stt(ctx, kind), d).norm();
    case HeuristicKind::WUSSOS:
      return (require_matrix(ctx.W, "W", kind) * contract2(require_stt(ctx, kind), d)).norm();
    case HeuristicKind::SOLC:
    case HeuristicKind::USSOLC:
      return contract1(require_stt(ctx, kind), d).norm();
    case HeuristicKind::WUSSOLC: {
      const Matrix l = input_factor(ctx, kind);
      return (require_matrix(ctx.W, "W", kind) * contract1(require_stt(ctx, kind), d) * l).norm();
    }
    case HeuristicKind::SAFOS: {
      const Matrix q = safos_form(require_matrix(ctx.G, "G", kind), input_factor(ctx, kind));
      return std::sqrt(std::max(d.dot(q * d), 0.0));
    }
    case HeuristicKind::SASOS: {
      const Matrix q = sasos_form(require_stt(ctx, kind), input_factor(ctx, kind));
      return std::sqrt(std::max(d.dot(q * d), 0.0));
    }
    case HeuristicKind::WSASOS: {
      const Matrix q =
          sasos_form(left_multiply(require_matrix(ctx.W, "W", kind), require_stt(ctx, kind)), input_factor(ctx, kind));
      return std::sqrt(std::max(d.dot(q * d), 0.0));
    }
  }
  throw ConfigError("heuristic", "unhandled heuristic kind");
}

}  // namespace gmprop
