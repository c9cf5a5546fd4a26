#include "gmprop/tensorlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gmprop/error.hpp"

namespace gmprop {

Tensor3::Tensor3(Eigen::Index n) : slices_(static_cast<std::size_t>(n), Matrix::Zero(n, n)) {}

void Tensor3::set_zero() {
  for (auto& s : slices_) s.setZero();
}

void Tensor3::symmetrize_trailing() {
  for (auto& s : slices_) s = symmetric_part(s);
}

bool Tensor3::is_trailing_symmetric(double tol) const {
  for (const auto& s : slices_) {
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

bool Tensor3::all_finite() const {
  return std::all_of(slices_.begin(), slices_.end(), [](const Matrix& s) { return s.allFinite(); });
}

double Tensor3::norm() const {
  double acc = 0.0;
  for (const auto& s : slices_) acc += s.squaredNorm();
  return std::sqrt(acc);
}

Tensor3& Tensor3::operator+=(const Tensor3& rhs) {
  if (rhs.dim() != dim()) throw DimensionError("Tensor3 addition dimension mismatch");
  for (Eigen::Index i = 0; i < dim(); ++i) slices_[i] += rhs.slices_[i];
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& rhs) {
  if (rhs.dim() != dim()) throw DimensionError("Tensor3 subtraction dimension mismatch");
  for (Eigen::Index i = 0; i < dim(); ++i) slices_[i] -= rhs.slices_[i];
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  for (auto& m : slices_) m *= s;
  return *this;
}

Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

Vector contract2(const Tensor3& t, const Vector& v) {
  const auto n = t.dim();
  if (v.size() != n) throw DimensionError("contract2: vector dimension does not match tensor");
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = v.dot(t.slice(i) * v);
  return out;
}

Matrix contract1(const Tensor3& t, const Vector& v) {
  const auto n = t.dim();
  if (v.size() != n) throw DimensionError("contract1: vector dimension does not match tensor");
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = (t.slice(i) * v).transpose();
  return out;
}

Tensor3 left_multiply(const Matrix& a, const Tensor3& t) {
  const auto n = t.dim();
  if (a.rows() != n || a.cols() != n) throw DimensionError("left_multiply: matrix dimension mismatch");
  Tensor3 out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix& s = out.slice(i);
    for (Eigen::Index l = 0; l < n; ++l) {
      const double ail = a(i, l);
      if (ail != 0.0) s.noalias() += ail * t.slice(l);
    }
  }
  return out;
}

Tensor3 congruence(const Tensor3& t, const Matrix& b) {
  const auto n = t.dim();
  if (b.rows() != n || b.cols() != n) throw DimensionError("congruence: matrix dimension mismatch");
  Tensor3 out(n);
  for (Eigen::Index i = 0; i < n; ++i) out.slice(i).noalias() = b.transpose() * t.slice(i) * b;
  return out;
}

Matrix cholesky_lower(const Matrix& p) {
  const auto n = p.rows();
  if (p.cols() != n) throw DimensionError("cholesky_lower: matrix is not square");
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = p(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefiniteError("matrix is not symmetric positive definite", static_cast<int>(j));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = p(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Matrix whitening_factor(const Matrix& p) {
  const Matrix l = cholesky_lower(p);
  return l.triangularView<Eigen::Lower>().solve(Matrix::Identity(p.rows(), p.cols()));
}

LuSolver::LuSolver(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("LuSolver: matrix is not square");
  if (!a.allFinite()) throw SingularMatrixError("LuSolver: matrix has non-finite entries");
  lu_.compute(a);
  const double eps = std::numeric_limits<double>::epsilon();
  const Vector pivots = lu_.matrixLU().diagonal().cwiseAbs();
  if (a.rows() > 0 && (!(pivots.minCoeff() > static_cast<double>(a.rows()) * eps * pivots.maxCoeff()) ||
                       !(lu_.rcond() > static_cast<double>(a.rows()) * eps))) {
    throw SingularMatrixError("LuSolver: matrix is singular to working precision");
  }
}

Vector LuSolver::solve(const Vector& b) const { return lu_.solve(b); }
Matrix LuSolver::solve(const Matrix& b) const { return lu_.solve(b); }

Tensor3 solve_tensor_system(const Matrix& a, const Tensor3& b, int axis) {
  const auto n = b.dim();
  if (a.rows() != n || a.cols() != n) throw DimensionError("solve_tensor_system: matrix dimension mismatch");
  if (axis != 1 && axis != 2) throw DimensionError("solve_tensor_system: axis must be 1 or 2");
  const LuSolver lu(a.transpose());
  Tensor3 x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (axis == 1) {
      x.slice(i) = lu.solve(b.slice(i));
    } else {
      x.slice(i) = lu.solve(Matrix(b.slice(i).transpose())).transpose();
    }
  }
  return x;
}

namespace {

std::size_t int_pow(Eigen::Index base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

// Contracts the last index of a row-major n^p array with x.
std::vector<double> contract_last(const std::vector<double>& a, Eigen::Index n, const Vector& x) {
  const std::size_t rows = a.size() / static_cast<std::size_t>(n);
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a.data() + r * static_cast<std::size_t>(n);
    double s = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) s += row[b] * x(b);
    out[r] = s;
  }
  return out;
}

}  // namespace

SymmetricTensor::SymmetricTensor(int order, Eigen::Index dim)
    : order_(order), dim_(dim), entries_(int_pow(dim, order), 0.0) {
  if (order < 2) throw DimensionError("SymmetricTensor: order must be at least 2");
}

SymmetricTensor SymmetricTensor::symmetrized(int order, Eigen::Index dim, std::vector<double> entries) {
  SymmetricTensor t(order, dim);
  if (entries.size() != t.entries_.size()) throw DimensionError("SymmetricTensor: entry count mismatch");
  std::vector<int> perm(static_cast<std::size_t>(order));
  std::vector<std::size_t> digits(static_cast<std::size_t>(order));
  std::vector<std::size_t> strides(static_cast<std::size_t>(order));
  for (int p = order - 1, s = 1; p >= 0; --p, s *= static_cast<int>(dim)) strides[p] = static_cast<std::size_t>(s);
  const auto n = static_cast<std::size_t>(dim);
  for (std::size_t flat = 0; flat < entries.size(); ++flat) {
    std::size_t rem = flat;
    for (int p = order - 1; p >= 0; --p) {
      digits[p] = rem % n;
      rem /= n;
    }
    std::iota(perm.begin(), perm.end(), 0);
    double acc = 0.0;
    int count = 0;
    do {
      std::size_t idx = 0;
      for (int p = 0; p < order; ++p) idx += digits[perm[p]] * strides[p];
      acc += entries[idx];
      ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    t.entries_[flat] = acc / count;
  }
  return t;
}

SymmetricTensor SymmetricTensor::outer_power(const Vector& u, int order) {
  SymmetricTensor t(order, u.size());
  const auto n = static_cast<std::size_t>(u.size());
  for (std::size_t flat = 0; flat < t.entries_.size(); ++flat) {
    std::size_t rem = flat;
    double v = 1.0;
    for (int p = 0; p < order; ++p) {
      v *= u(static_cast<Eigen::Index>(rem % n));
      rem /= n;
    }
    t.entries_[flat] = v;
  }
  return t;
}

SymmetricTensor SymmetricTensor::quartic_norm_form(const Tensor3& t) {
  const auto n = t.dim();
  std::vector<double> e(int_pow(n, 4), 0.0);
  std::size_t flat = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index m = 0; m < n; ++m, ++flat) {
          double s = 0.0;
          for (Eigen::Index i = 0; i < n; ++i) s += t(i, j, k) * t(i, l, m);
          e[flat] = s;
        }
  return symmetrized(4, n, std::move(e));
}

SymmetricTensor SymmetricTensor::from_tensor3(const Tensor3& t) {
  const auto n = t.dim();
  std::vector<double> e(int_pow(n, 3));
  std::size_t flat = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) e[flat++] = t(i, j, k);
  return symmetrized(3, n, std::move(e));
}

double SymmetricTensor::at(const std::vector<Eigen::Index>& index) const {
  if (static_cast<int>(index.size()) != order_) throw DimensionError("SymmetricTensor::at: wrong index count");
  std::size_t flat = 0;
  for (auto i : index) flat = flat * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
  return entries_[flat];
}

double SymmetricTensor::form(const Vector& x) const { return x.dot(gradient_form(x)); }

Vector SymmetricTensor::gradient_form(const Vector& x) const {
  if (x.size() != dim_) throw DimensionError("SymmetricTensor: vector dimension mismatch");
  std::vector<double> cur = contract_last(entries_, dim_, x);
  for (int p = order_ - 1; p > 1; --p) cur = contract_last(cur, dim_, x);
  return Eigen::Map<const Vector>(cur.data(), dim_);
}

Matrix SymmetricTensor::hessian_form(const Vector& x) const {
  if (x.size() != dim_) throw DimensionError("SymmetricTensor: vector dimension mismatch");
  std::vector<double> cur = entries_;
  for (int p = order_; p > 2; --p) cur = contract_last(cur, dim_, x);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cur.data(), dim_,
                                                                                                 dim_);
}

Matrix SymmetricTensor::unfolding() const {
  const auto rows = static_cast<Eigen::Index>(dim_ * dim_);
  const auto cols = static_cast<Eigen::Index>(int_pow(dim_, order_ - 2));
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(entries_.data(), rows,
                                                                                                 cols);
}

double shift_parameter_conservative(const SymmetricTensor& t) {
  double s = 0.0;
  for (double v : t.entries()) s += std::abs(v);
  return (t.order() - 1) * s;
}

double shift_parameter_fast(const SymmetricTensor& t) {
  const Matrix u = t.unfolding();
  if (u.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(u);
  return (t.order() - 1) * svd.singularValues()(0);
}

TensorEigenpair shifted_power_iteration(const SymmetricTensor& t, double shift, const Vector& x0,
                                        const PowerIterationOptions& opts) {
  if (x0.size() != t.dim()) throw DimensionError("shifted_power_iteration: start vector dimension mismatch");
  Vector x = x0.normalized();
  for (int it = 1; it <= opts.max_iter; ++it) {
    Vector y = t.gradient_form(x) + shift * x;
    const double ny = y.norm();
    if (!(ny > 0.0) || !std::isfinite(ny)) {
      throw ConvergenceError("shifted_power_iteration: iterate collapsed to zero", x, 0.0);
    }
    y /= ny;
    const double change = (y - x).norm();
    x = std::move(y);
    if (change < opts.tol) return {t.form(x), x, it};
  }
  const double lambda = t.form(x);
  const double residual = (t.gradient_form(x) - lambda * x).norm();
  throw ConvergenceError("shifted_power_iteration: max_iter exceeded", x, residual);
}

TensorEigenpair maximize_symmetric_form(const SymmetricTensor& t, const PowerIterationOptions& opts) {
  const auto n = t.dim();
  const double shift = shift_parameter_fast(t);
  if (shift == 0.0) return {0.0, Vector::Ones(n).normalized(), 0};

  std::vector<Vector> starts;
  starts.push_back(Vector::Ones(n).normalized());
  for (Eigen::Index i = 0; i < n; ++i) starts.push_back(Vector::Unit(n, i));
  {
    Eigen::JacobiSVD<Matrix> svd(t.unfolding(), Eigen::ComputeThinU);
    const Vector u0 = svd.matrixU().col(0);
    const Matrix m = symmetric_part(Eigen::Map<const Matrix>(u0.data(), n, n));
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    Eigen::Index top = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&top);
    starts.push_back(es.eigenvectors().col(top));
  }
  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> normal;
  for (int s = 0; s < 8; ++s) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    starts.push_back(v.normalized());
  }

  TensorEigenpair best;
  bool have = false;
  Vector last_failure;
  double last_residual = 0.0;
  for (const auto& x0 : starts) {
    try {
      TensorEigenpair r = shifted_power_iteration(t, shift, x0, opts);
      if (!have || r.value > best.value + 1e-14 * std::abs(best.value)) {
        best = std::move(r);
        have = true;
      }
    } catch (const ConvergenceError& e) {
      last_failure = e.last_iterate();
      last_residual = e.residual();
    }
  }
  if (!have) throw ConvergenceError("maximize_symmetric_form: no start converged", last_failure, last_residual);
  if (t.order() % 2 == 0) canonicalize_sign(best.vector);
  return best;
}

void canonicalize_sign(Eigen::Ref<Vector> v, double tol) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > tol) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

SymmetricEigen symmetric_eig(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("symmetric_eig: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric_part(a));
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric_eig: eigensolver failed", Vector(), 0.0);
  const auto n = a.rows();
  SymmetricEigen out{es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
  for (Eigen::Index j = 0; j < n; ++j) canonicalize_sign(out.vectors.col(j));
  return out;
}

SymmetricEigen generalized_sym_eig(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw DimensionError("generalized_sym_eig: matrices must be square and equal size");
  }
  (void)cholesky_lower(symmetric_part(a));
  (void)cholesky_lower(symmetric_part(b));
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(symmetric_part(a), symmetric_part(b));
  if (es.info() != Eigen::Success) throw ConvergenceError("generalized_sym_eig: eigensolver failed", Vector(), 0.0);
  const auto n = a.rows();
  SymmetricEigen out{es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
  for (Eigen::Index j = 0; j < n; ++j) canonicalize_sign(out.vectors.col(j));
  return out;
}

}  // namespace gmprop
