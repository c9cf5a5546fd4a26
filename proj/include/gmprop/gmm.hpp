/**
 * @file gmm.hpp
 * @brief Gaussian mixtures, the univariate split library and moment-matched multivariate splitting.
 */
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gmprop/propagation.hpp"
#include "gmprop/tensorlab.hpp"

namespace gmprop {

struct GaussianMixture {
  std::vector<Mixand> mixands;

  [[nodiscard]] Eigen::Index dim() const { return mixands.empty() ? 0 : mixands.front().m.size(); }
  [[nodiscard]] std::size_t size() const { return mixands.size(); }
  [[nodiscard]] double total_weight() const;
  /// Throws on dimension mismatch, bad weights or a non-SPD covariance.
  void validate(double weight_tol = 1e-12) const;
};

struct MixtureMoments {
  Vector mean;
  Matrix cov;
};

[[nodiscard]] double gaussian_pdf(const Vector& x, const Vector& m, const Matrix& P);
[[nodiscard]] double gm_pdf(const GaussianMixture& gm, const Vector& x);
[[nodiscard]] double gm_marginal_cdf(const GaussianMixture& gm, Eigen::Index axis, double v);
[[nodiscard]] double gm_marginal_pdf(const GaussianMixture& gm, Eigen::Index axis, double v);
/// Joint density of two coordinates.
[[nodiscard]] double gm_marginal_pdf2(const GaussianMixture& gm, Eigen::Index a, Eigen::Index b, double xa, double xb);
/// Exact overall mean and covariance of the mixture.
[[nodiscard]] MixtureMoments mixture_moments(const GaussianMixture& gm);

struct SplitTriple {
  double w = 1.0;
  double m = 0.0;
  double sigma = 1.0;
};

struct SplitLibraryEntry {
  int L_s = 1;
  double lambda = 0.0;
  std::vector<SplitTriple> triples;  ///< ascending by m

  /// Throws unless weights, mean and variance match the standard normal to tol.
  void validate(double tol = 1e-10) const;
};

/// L2 distance between N(0,1) and the library mixture plus lambda * (mean component variance).
[[nodiscard]] double split_library_objective(const SplitLibraryEntry& entry);

/**
 * Optimizes a symmetric, equally spaced, homoscedastic split of N(0,1).
 *
 * For a given spacing and common sigma the weights solve a small
 * equality-constrained QP (unit mass, unit variance) with an active set for
 * nonnegativity. Spacing and sigma are found by a grid scan followed by
 * Nelder-Mead. Only odd L_s is supported.
 */
[[nodiscard]] SplitLibraryEntry generate_split_library(int L_s, double lambda);

[[nodiscard]] std::string split_library_to_json(const SplitLibraryEntry& entry);
[[nodiscard]] SplitLibraryEntry split_library_from_json(const std::string& text);
void save_split_library(const SplitLibraryEntry& entry, const std::filesystem::path& path);
[[nodiscard]] SplitLibraryEntry load_split_library(const std::filesystem::path& path);

/// The precomputed (L_s = 3, lambda = 1e-4) entry.
[[nodiscard]] const SplitLibraryEntry& default_split_library();
/// Default entry when the key matches it, otherwise a freshly generated one.
[[nodiscard]] SplitLibraryEntry split_library_for(int L_s, double lambda);

/**
 * Splits a mixand along a unit direction.
 *
 * Children sit at m + m~_i d with d = u / sqrt(u^T P^-1 u), so d^T P^-1 d = 1,
 * and share the parent covariance reduced by the spread of the means and
 * scaled by sigma~_i^2. Mixture mean and covariance are preserved.
 */
[[nodiscard]] std::vector<Mixand> split_multivariate(const Mixand& mix, const Vector& direction,
                                                     const SplitLibraryEntry& lib);

}  // namespace gmprop
