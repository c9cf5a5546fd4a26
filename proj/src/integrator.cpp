#include "gmprop/integrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gmprop/error.hpp"

namespace gmprop {

namespace {

// Fehlberg 7(8) tableau.
constexpr int kStages = 13;

constexpr std::array<double, kStages> kC = {0.0,     2.0 / 27.0, 1.0 / 9.0, 1.0 / 6.0, 5.0 / 12.0, 1.0 / 2.0, 5.0 / 6.0,
                                            1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0, 1.0,     0.0,        1.0};

constexpr double kA[kStages][kStages - 1] = {
    {},
    {2.0 / 27.0},
    {1.0 / 36.0, 1.0 / 12.0},
    {1.0 / 24.0, 0.0, 1.0 / 8.0},
    {5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0},
    {1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0},
    {-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0},
    {31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0},
    {2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0},
    {-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0, 17.0 / 6.0, -1.0 / 12.0},
    {2383.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -301.0 / 82.0, 2133.0 / 4100.0, 45.0 / 82.0,
     45.0 / 164.0, 18.0 / 41.0},
    {3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0},
    {-1777.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -289.0 / 82.0, 2193.0 / 4100.0, 51.0 / 82.0,
     33.0 / 164.0, 12.0 / 41.0, 0.0, 1.0},
};

// Eighth-order weights.
constexpr std::array<double, kStages> kB = {0.0,          0.0,          0.0,         0.0,           0.0,
                                            34.0 / 105.0, 9.0 / 35.0,   9.0 / 35.0,  9.0 / 280.0,   9.0 / 280.0,
                                            0.0,          41.0 / 840.0, 41.0 / 840.0};

// Difference between the eighth- and seventh-order solutions: 41/840 (k11 + k12 - k0 - k10).
constexpr double kErr = 41.0 / 840.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

}  // namespace

std::vector<Eigen::VectorXd> integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0,
                                           std::span<const double> output_times, const IntegratorOptions& opts) {
  using Eigen::VectorXd;
  const Eigen::Index n = y0.size();
  const Eigen::Index ne = opts.error_components < 0 ? n : std::min(opts.error_components, n);

  std::vector<VectorXd> out;
  out.reserve(output_times.size());
  if (output_times.empty()) return out;
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    if (output_times[i] < t0 || (i > 0 && output_times[i] < output_times[i - 1])) {
      throw Error("integrate_ode: output times must be ascending and not precede t0");
    }
  }

  std::array<VectorXd, kStages> k;
  for (auto& ki : k) ki.resize(n);
  VectorXd y = y0;
  VectorXd stage(n);
  VectorXd y_new(n);
  double t = t0;

  auto eval = [&](double tt, const VectorXd& yy, VectorXd& dy) {
    try {
      rhs(tt, yy, dy);
    } catch (const SingularityError& e) {
      throw IntegrationError(std::string("integrate_ode: ") + e.what(), t);
    }
  };

  auto scaled_norm = [&](const VectorXd& a, const VectorXd& ref) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < ne; ++i) {
      const double sc = opts.abs_tol + opts.rel_tol * std::abs(ref(i));
      m = std::max(m, std::abs(a(i)) / sc);
    }
    return m;
  };

  const double t_end = output_times.back();
  double h = 0.0;
  if (t_end > t0) {
    eval(t, y, k[0]);
    const double d0 = scaled_norm(y, y);
    const double d1 = scaled_norm(k[0], y);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * (t_end - t0) : 0.01 * d0 / d1;
    h = std::min(h, t_end - t0);
  }

  std::size_t next = 0;
  int steps = 0;
  bool have_k0 = t_end > t0;
  while (next < output_times.size()) {
    while (next < output_times.size() && output_times[next] == t) {
      out.push_back(y);
      ++next;
    }
    if (next >= output_times.size()) break;

    const double target = output_times[next];
    const double h_desired = h;
    bool clipped = false;
    if (t + h >= target) {
      h = target - t;
      clipped = true;
    }
    if (++steps > opts.max_steps) throw IntegrationError("integrate_ode: step budget exhausted", t);
    if (!(h > std::abs(t) * 4.0 * std::numeric_limits<double>::epsilon()) && !clipped) {
      throw IntegrationError("integrate_ode: step size underflow", t);
    }

    if (!have_k0) eval(t, y, k[0]);
    for (int s = 1; s < kStages; ++s) {
      stage = y;
      for (int j = 0; j < s; ++j) {
        if (kA[s][j] != 0.0) stage.noalias() += (h * kA[s][j]) * k[j];
      }
      eval(t + kC[s] * h, stage, k[s]);
    }
    y_new = y;
    for (int s = 0; s < kStages; ++s) {
      if (kB[s] != 0.0) y_new.noalias() += (h * kB[s]) * k[s];
    }
    stage = (h * kErr) * (k[11] + k[12] - k[0] - k[10]);

    double err = 0.0;
    for (Eigen::Index i = 0; i < ne; ++i) {
      const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      err = std::max(err, std::abs(stage(i)) / sc);
    }
    const bool finite = std::isfinite(err) && y_new.allFinite();

    if (finite && err <= 1.0) {
      t = clipped ? target : t + h;
      y.swap(y_new);
      have_k0 = false;
      const double factor =
          err == 0.0 ? kMaxFactor : std::clamp(kSafety * std::pow(err, -1.0 / 8.0), kMinFactor, kMaxFactor);
      h = clipped ? std::max(h_desired, h * factor) : h * factor;
    } else {
      have_k0 = true;
      const double factor = finite ? std::max(kMinFactor, kSafety * std::pow(err, -1.0 / 8.0)) : kMinFactor;
      h *= factor;
      if (!(h > std::abs(t) * 4.0 * std::numeric_limits<double>::epsilon())) {
        throw IntegrationError("integrate_ode: step size underflow", t);
      }
    }
  }
  return out;
}

}  // namespace gmprop
