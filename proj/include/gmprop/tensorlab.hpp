/**
 * @file tensorlab.hpp
 * @brief Small dense linear algebra and tensor kernels.
 *
 * Everything here is a pure function of its inputs. Dimensions are small
 * (n <= 12), so dense storage and direct factorizations are used throughout.
 */
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace gmprop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/**
 * Rank-3 array T[i][j][k] stored as n slices of n x n matrices.
 *
 * Second partial-derivative tensors (dynamics Hessians, STTs) are symmetric in
 * the trailing pair j,k. Intermediate results of tensor solves are not, so the
 * class itself does not enforce symmetry.
 */
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Eigen::Index n);

  [[nodiscard]] Eigen::Index dim() const { return static_cast<Eigen::Index>(slices_.size()); }

  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) { return slices_[i](j, k); }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const { return slices_[i](j, k); }

  [[nodiscard]] Matrix& slice(Eigen::Index i) { return slices_[i]; }
  [[nodiscard]] const Matrix& slice(Eigen::Index i) const { return slices_[i]; }

  void set_zero();
  /// Replaces each slice by its symmetric part.
  void symmetrize_trailing();
  [[nodiscard]] bool is_trailing_symmetric(double tol = 0.0) const;
  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] double norm() const;

  Tensor3& operator+=(const Tensor3& rhs);
  Tensor3& operator-=(const Tensor3& rhs);
  Tensor3& operator*=(double s);

 private:
  std::vector<Matrix> slices_;
};

[[nodiscard]] Tensor3 operator+(Tensor3 a, const Tensor3& b);
[[nodiscard]] Tensor3 operator-(Tensor3 a, const Tensor3& b);
[[nodiscard]] Tensor3 operator*(double s, Tensor3 a);

/// out[i] = T[i][j][k] v[j] v[k]
[[nodiscard]] Vector contract2(const Tensor3& t, const Vector& v);
/// out[i][j] = T[i][j][k] v[k]
[[nodiscard]] Matrix contract1(const Tensor3& t, const Vector& v);
/// out[i][j][k] = A[i][l] T[l][j][k]
[[nodiscard]] Tensor3 left_multiply(const Matrix& a, const Tensor3& t);
/// out[i][j][k] = T[i][l][m] B[l][j] B[m][k]
[[nodiscard]] Tensor3 congruence(const Tensor3& t, const Matrix& b);

/// Lower Cholesky factor. Throws NotPositiveDefiniteError with the failing pivot.
[[nodiscard]] Matrix cholesky_lower(const Matrix& p);

/// W = L^-1 where P = L L^T, so that W P W^T = I.
[[nodiscard]] Matrix whitening_factor(const Matrix& p);

/// LU factorization reused across many right-hand sides.
class LuSolver {
 public:
  explicit LuSolver(const Matrix& a);
  [[nodiscard]] Vector solve(const Vector& b) const;
  [[nodiscard]] Matrix solve(const Matrix& b) const;

 private:
  Eigen::PartialPivLU<Matrix> lu_;
};

/**
 * Solves the per-slice systems A^T X[i](:,m) = B[i](:,m) (axis 1) or
 * A^T X[i](j,:)^T = B[i](j,:)^T (axis 2). Equivalent to contracting the chosen
 * trailing index of B with A^-1 from the right: X^i_{j,m} = B^i_{l,m} (A^-1)^l_j.
 */
[[nodiscard]] Tensor3 solve_tensor_system(const Matrix& a, const Tensor3& b, int axis);

/// Order-m tensor over R^n, symmetric under every permutation of its indices.
class SymmetricTensor {
 public:
  SymmetricTensor(int order, Eigen::Index dim);

  /// Averages an arbitrary order-m array over all index permutations.
  [[nodiscard]] static SymmetricTensor symmetrized(int order, Eigen::Index dim, std::vector<double> entries);
  [[nodiscard]] static SymmetricTensor outer_power(const Vector& u, int order);
  /// Order-4 tensor of the quartic form x -> ||T x x||^2, symmetrized.
  [[nodiscard]] static SymmetricTensor quartic_norm_form(const Tensor3& t);
  /// Order-3 symmetrization of a trailing-symmetric Tensor3.
  [[nodiscard]] static SymmetricTensor from_tensor3(const Tensor3& t);

  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] const std::vector<double>& entries() const { return entries_; }
  [[nodiscard]] double at(const std::vector<Eigen::Index>& index) const;

  /// T x^m
  [[nodiscard]] double form(const Vector& x) const;
  /// T x^(m-1)
  [[nodiscard]] Vector gradient_form(const Vector& x) const;
  /// T x^(m-2)
  [[nodiscard]] Matrix hessian_form(const Vector& x) const;
  /// n^2 x n^(m-2) flattening preserving index order.
  [[nodiscard]] Matrix unfolding() const;

 private:
  int order_;
  Eigen::Index dim_;
  std::vector<double> entries_;
};

/// (m-1) times the entrywise absolute sum.
[[nodiscard]] double shift_parameter_conservative(const SymmetricTensor& t);
/// (m-1) times the largest singular value of the n^2 x n^(m-2) unfolding.
[[nodiscard]] double shift_parameter_fast(const SymmetricTensor& t);

struct PowerIterationOptions {
  double tol = 1e-10;
  int max_iter = 500;
};

struct TensorEigenpair {
  double value = 0.0;
  Vector vector;
  int iterations = 0;
};

/// Shifted symmetric higher-order power iteration from a single unit start vector.
/// Throws ConvergenceError when max_iter is exceeded.
[[nodiscard]] TensorEigenpair shifted_power_iteration(const SymmetricTensor& t, double shift, const Vector& x0,
                                                      const PowerIterationOptions& opts = {});

/**
 * Maximizes T x^m over the unit sphere by running shifted power iteration
 * (shift = fast bound) from a fixed deterministic set of starts: the
 * normalized all-ones vector, the coordinate axes, the leading left singular
 * direction of the unfolding and a handful of seeded pseudo-random vectors.
 */
[[nodiscard]] TensorEigenpair maximize_symmetric_form(const SymmetricTensor& t, const PowerIterationOptions& opts = {});

struct SymmetricEigen {
  Vector values;   ///< descending
  Matrix vectors;  ///< columns, sign-canonicalized
};

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
[[nodiscard]] SymmetricEigen symmetric_eig(const Matrix& a);

/// Solves A x = lambda B x for SPD A, B. Eigenvalues descending.
[[nodiscard]] SymmetricEigen generalized_sym_eig(const Matrix& a, const Matrix& b);

/// Flips v so that its first entry with magnitude above tol is positive.
void canonicalize_sign(Eigen::Ref<Vector> v, double tol = 1e-12);

[[nodiscard]] inline Matrix symmetric_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace gmprop
