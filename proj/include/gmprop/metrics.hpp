/**
 * @file metrics.hpp
 * @brief Monte Carlo reference samples and mixture-versus-sample accuracy metrics.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "gmprop/dynamics.hpp"
#include "gmprop/gmm.hpp"
#include "gmprop/integrator.hpp"

namespace gmprop {

struct SampleSet {
  double t = 0.0;
  Matrix samples;  ///< N x n, one sample per row
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index count() const { return samples.rows(); }
  [[nodiscard]] Vector mean() const;
  /// Unbiased (1/(N-1)) sample covariance.
  [[nodiscard]] Matrix covariance() const;
  void validate() const;
};

/// Seed for sample i: splitmix64 applied to seed + i.
[[nodiscard]] std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t index);

/// Draws N samples from the mixture: component by weight, then Gaussian.
[[nodiscard]] SampleSet sample_mixture(const GaussianMixture& gm, Eigen::Index n_samples, std::uint64_t seed);

/// Samples the initial mixture at t0 and integrates each sample to tf.
[[nodiscard]] SampleSet mc_truth(const DynamicsModel& model, const GaussianMixture& gm, Eigen::Index n_samples,
                                 std::uint64_t seed, double t0, double tf, const IntegratorOptions& opts = {});

enum class MademNorm { Mixture, Sample };

/// Mahalanobis distance between mixture and sample means.
[[nodiscard]] double madem(const GaussianMixture& gm, const SampleSet& s, MademNorm norm = MademNorm::Mixture);

/// max(lambda_max, 1/lambda_min) for P' y = lambda P y.
[[nodiscard]] double mcr(const Matrix& P, const Matrix& P_sample);
[[nodiscard]] double mcr(const GaussianMixture& gm, const SampleSet& s);

/// Per-axis one-sample Cramer-von Mises statistic against the mixture marginal CDFs.
[[nodiscard]] Vector cvm_per_axis(const GaussianMixture& gm, const SampleSet& s);
[[nodiscard]] double cvm_norm(const GaussianMixture& gm, const SampleSet& s);

/// CSV with header "t,x1,...,xn"; doubles written with round-trip precision.
void write_samples_csv(std::ostream& os, const SampleSet& s);
[[nodiscard]] SampleSet read_samples_csv(std::istream& is);
void save_samples(const std::filesystem::path& path, const SampleSet& s);
[[nodiscard]] SampleSet load_samples(const std::filesystem::path& path);

}  // namespace gmprop
