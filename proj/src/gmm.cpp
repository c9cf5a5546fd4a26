#include "gmprop/gmm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "gmprop/error.hpp"

namespace gmprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf_1d(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

struct SymmetricSplit {
  double objective = kInf;
  Vector v;  ///< center weight followed by the weight of each +/- pair
};

// Best nonnegative symmetric weights for a given spacing d and common sigma s.
SymmetricSplit optimal_weights(int L_s, double lambda, double d, double s) {
  const int half = (L_s - 1) / 2;
  const int nv = half + 1;
  const double s2 = s * s;
  if (!(d > 0.0) || !(s > 0.0) || !(s2 < 1.0)) return {};

  std::vector<double> means(static_cast<std::size_t>(L_s));
  for (int a = 0; a < L_s; ++a) means[a] = (a - half) * d;
  auto var_index = [&](int a) { return std::abs(a - half); };

  Matrix h = Matrix::Zero(nv, nv);
  Vector g = Vector::Zero(nv);
  for (int a = 0; a < L_s; ++a) {
    g(var_index(a)) += normal_pdf_1d(means[a], 1.0 + s2);
    for (int b = 0; b < L_s; ++b) h(var_index(a), var_index(b)) += normal_pdf_1d(means[a] - means[b], 2.0 * s2);
  }
  Matrix a_eq(2, nv);
  Vector c_eq(2);
  a_eq(0, 0) = 1.0;
  a_eq(1, 0) = 0.0;
  for (int k = 1; k < nv; ++k) {
    a_eq(0, k) = 2.0;
    a_eq(1, k) = 2.0 * k * k * d * d;
  }
  c_eq << 1.0, 1.0 - s2;

  auto value = [&](const Vector& v) {
    return 0.5 / std::sqrt(std::numbers::pi) - 2.0 * g.dot(v) + v.dot(h * v) + lambda * s2;
  };

  SymmetricSplit best;
  // Enumerate which weights are pinned at zero; nv is tiny for practical L_s.
  const unsigned subsets = 1U << nv;
  for (unsigned mask = 0; mask < subsets; ++mask) {
    std::vector<int> free_idx;
    for (int k = 0; k < nv; ++k) {
      if (!(mask & (1U << k))) free_idx.push_back(k);
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf == 0) continue;
    Matrix kkt = Matrix::Zero(nf + 2, nf + 2);
    Vector rhs = Vector::Zero(nf + 2);
    for (int p = 0; p < nf; ++p) {
      for (int q = 0; q < nf; ++q) kkt(p, q) = 2.0 * h(free_idx[p], free_idx[q]);
      kkt(p, nf) = kkt(nf, p) = a_eq(0, free_idx[p]);
      kkt(p, nf + 1) = kkt(nf + 1, p) = a_eq(1, free_idx[p]);
      rhs(p) = 2.0 * g(free_idx[p]);
    }
    rhs(nf) = c_eq(0);
    rhs(nf + 1) = c_eq(1);
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;
    Vector v = Vector::Zero(nv);
    for (int p = 0; p < nf; ++p) v(free_idx[p]) = sol(p);
    if (v.minCoeff() < 0.0) continue;
    const double f = value(v);
    if (f < best.objective) best = {f, v};
  }
  return best;
}

SplitLibraryEntry assemble(int L_s, double lambda, double d, double s, const Vector& v) {
  const int half = (L_s - 1) / 2;
  SplitLibraryEntry e;
  e.L_s = L_s;
  e.lambda = lambda;
  for (int a = 0; a < L_s; ++a) e.triples.push_back({v(std::abs(a - half)), (a - half) * d, s});
  return e;
}

struct NelderMeadResult {
  std::array<double, 2> x{};
  double f = kInf;
  double size = kInf;
  bool converged = false;
};

template <class F>
NelderMeadResult nelder_mead_2d(F&& f, std::array<double, 2> x0, double step, double xtol, int max_iter) {
  std::array<std::array<double, 2>, 3> simplex = {x0, x0, x0};
  simplex[1][0] += step;
  simplex[2][1] += step;
  std::array<double, 3> fv{};
  for (int i = 0; i < 3; ++i) fv[i] = f(simplex[i]);

  auto lerp = [](const std::array<double, 2>& a, const std::array<double, 2>& b, double t) {
    return std::array<double, 2>{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };

  NelderMeadResult out;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const auto best = simplex[order[0]];
    const auto mid = simplex[order[1]];
    const auto worst = simplex[order[2]];
    const double f_best = fv[order[0]];
    const double f_mid = fv[order[1]];
    const double f_worst = fv[order[2]];

    double size = 0.0;
    for (int i = 1; i < 3; ++i) {
      size = std::max(size, std::hypot(simplex[order[i]][0] - best[0], simplex[order[i]][1] - best[1]));
    }
    if (size < xtol) {
      out = {best, f_best, size, true};
      return out;
    }

    const std::array<double, 2> centroid = {0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
    const auto xr = lerp(centroid, worst, -1.0);
    const double fr = f(xr);
    if (fr < f_best) {
      const auto xe = lerp(centroid, worst, -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        simplex[order[2]] = xe;
        fv[order[2]] = fe;
      } else {
        simplex[order[2]] = xr;
        fv[order[2]] = fr;
      }
      continue;
    }
    if (fr < f_mid) {
      simplex[order[2]] = xr;
      fv[order[2]] = fr;
      continue;
    }
    const bool outside = fr < f_worst;
    const auto xc = outside ? lerp(centroid, xr, 0.5) : lerp(centroid, worst, 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : f_worst)) {
      simplex[order[2]] = xc;
      fv[order[2]] = fc;
      continue;
    }
    for (int i = 1; i < 3; ++i) {
      simplex[order[i]] = lerp(best, simplex[order[i]], 0.5);
      fv[order[i]] = f(simplex[order[i]]);
    }
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
  out.x = simplex[order[0]];
  out.f = fv[order[0]];
  out.size = std::hypot(simplex[order[2]][0] - out.x[0], simplex[order[2]][1] - out.x[1]);
  return out;
}

}  // namespace

double GaussianMixture::total_weight() const {
  double s = 0.0;
  for (const auto& c : mixands) s += c.w;
  return s;
}

void GaussianMixture::validate(double weight_tol) const {
  if (mixands.empty()) throw Error("GaussianMixture: no mixands");
  const Eigen::Index n = dim();
  for (const auto& c : mixands) {
    if (c.m.size() != n || c.P.rows() != n || c.P.cols() != n) throw DimensionError("GaussianMixture: mixed dimensions");
    if (!(c.w > 0.0) || c.w > 1.0 + weight_tol) throw Error("GaussianMixture: weight outside (0,1]");
    (void)cholesky_lower(c.P);
  }
  if (std::abs(total_weight() - 1.0) > weight_tol) throw Error("GaussianMixture: weights do not sum to 1");
}

double gaussian_pdf(const Vector& x, const Vector& m, const Matrix& P) {
  if (x.size() != m.size() || P.rows() != m.size()) throw DimensionError("gaussian_pdf: dimension mismatch");
  const Matrix l = cholesky_lower(P);
  const Vector z = l.triangularView<Eigen::Lower>().solve(x - m);
  const double log_det_half = l.diagonal().array().log().sum();
  const double n = static_cast<double>(m.size());
  return std::exp(-0.5 * z.squaredNorm() - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi));
}

double gm_pdf(const GaussianMixture& gm, const Vector& x) {
  double p = 0.0;
  for (const auto& c : gm.mixands) p += c.w * gaussian_pdf(x, c.m, c.P);
  return p;
}

double gm_marginal_cdf(const GaussianMixture& gm, Eigen::Index axis, double v) {
  if (axis < 0 || axis >= gm.dim()) throw DimensionError("gm_marginal_cdf: axis out of range");
  double p = 0.0;
  for (const auto& c : gm.mixands) p += c.w * normal_cdf((v - c.m(axis)) / std::sqrt(c.P(axis, axis)));
  return p;
}

double gm_marginal_pdf(const GaussianMixture& gm, Eigen::Index axis, double v) {
  if (axis < 0 || axis >= gm.dim()) throw DimensionError("gm_marginal_pdf: axis out of range");
  double p = 0.0;
  for (const auto& c : gm.mixands) p += c.w * normal_pdf_1d(v - c.m(axis), c.P(axis, axis));
  return p;
}

double gm_marginal_pdf2(const GaussianMixture& gm, Eigen::Index a, Eigen::Index b, double xa, double xb) {
  const Eigen::Index n = gm.dim();
  if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw DimensionError("gm_marginal_pdf2: bad axis pair");
  double p = 0.0;
  for (const auto& c : gm.mixands) {
    const Eigen::Vector2d x(xa, xb);
    const Eigen::Vector2d m(c.m(a), c.m(b));
    Eigen::Matrix2d cov;
    cov << c.P(a, a), c.P(a, b), c.P(b, a), c.P(b, b);
    p += c.w * gaussian_pdf(x, m, cov);
  }
  return p;
}

MixtureMoments mixture_moments(const GaussianMixture& gm) {
  const Eigen::Index n = gm.dim();
  const double total = gm.total_weight();
  MixtureMoments out{Vector::Zero(n), Matrix::Zero(n, n)};
  for (const auto& c : gm.mixands) out.mean += c.w * c.m;
  out.mean /= total;
  for (const auto& c : gm.mixands) {
    const Vector d = c.m - out.mean;
    out.cov += c.w * (c.P + d * d.transpose());
  }
  out.cov /= total;
  out.cov = symmetric_part(out.cov);
  return out;
}

void SplitLibraryEntry::validate(double tol) const {
  if (static_cast<int>(triples.size()) != L_s) throw ConfigError("triples", "expected L_s triples");
  double sw = 0.0;
  double sm = 0.0;
  double sv = 0.0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    if (!(t.w > 0.0) || !(t.sigma > 0.0)) throw ConfigError("triples", "weights and sigmas must be positive");
    if (i > 0 && !(t.m > triples[i - 1].m)) throw ConfigError("triples", "means must be strictly ascending");
    sw += t.w;
    sm += t.w * t.m;
    sv += t.w * (t.sigma * t.sigma + t.m * t.m);
  }
  if (std::abs(sw - 1.0) > tol || std::abs(sm) > tol || std::abs(sv - 1.0) > tol) {
    throw ConfigError("triples", "library does not match the unit-variance moments");
  }
}

double split_library_objective(const SplitLibraryEntry& e) {
  double j = 0.5 / std::sqrt(std::numbers::pi);
  double penalty = 0.0;
  for (const auto& a : e.triples) {
    j -= 2.0 * a.w * normal_pdf_1d(a.m, 1.0 + a.sigma * a.sigma);
    for (const auto& b : e.triples) j += a.w * b.w * normal_pdf_1d(a.m - b.m, a.sigma * a.sigma + b.sigma * b.sigma);
    penalty += a.w * a.sigma * a.sigma;
  }
  return j + e.lambda * penalty;
}

SplitLibraryEntry generate_split_library(int L_s, double lambda) {
  if (L_s < 1 || L_s % 2 == 0) throw ConfigError("L_s", "split library supports odd component counts only");
  if (L_s > 15) throw ConfigError("L_s", "component count above 15 is not supported");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be positive");
  if (L_s == 1) return SplitLibraryEntry{1, lambda, {{1.0, 0.0, 1.0}}};

  const int half = (L_s - 1) / 2;
  auto objective = [&](const std::array<double, 2>& p) { return optimal_weights(L_s, lambda, p[0], p[1]).objective; };

  const double d_max = 3.0 / half;
  std::array<double, 2> best{};
  double f_best = kInf;
  for (int i = 1; i <= 300; ++i) {
    const double d = d_max * i / 300.0;
    for (int k = 1; k <= 99; ++k) {
      const std::array<double, 2> p = {d, k / 100.0};
      const double f = objective(p);
      if (f < f_best) {
        f_best = f;
        best = p;
      }
    }
  }
  if (!std::isfinite(f_best)) throw ConvergenceError("generate_split_library: no feasible split", Vector(), kInf);

  const auto nm = nelder_mead_2d(objective, best, 0.005, 1e-10, 20000);
  if (!nm.converged) {
    throw ConvergenceError("generate_split_library: Nelder-Mead did not converge", Eigen::Vector2d(nm.x[0], nm.x[1]),
                           nm.size);
  }
  const auto w = optimal_weights(L_s, lambda, nm.x[0], nm.x[1]);
  SplitLibraryEntry e = assemble(L_s, lambda, nm.x[0], nm.x[1], w.v);
  e.validate();
  return e;
}

std::string split_library_to_json(const SplitLibraryEntry& entry) {
  auto num = [](double v) { return nlohmann::json(v).dump(); };
  std::ostringstream out;
  out << "{\n  \"L_s\": " << entry.L_s << ",\n  \"lambda\": " << num(entry.lambda) << ",\n  \"triples\": [";
  for (std::size_t i = 0; i < entry.triples.size(); ++i) {
    const auto& t = entry.triples[i];
    out << (i == 0 ? "\n" : ",\n") << "    [" << num(t.w) << ", " << num(t.m) << ", " << num(t.sigma) << "]";
  }
  out << "\n  ]\n}\n";
  return out.str();
}

SplitLibraryEntry split_library_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("", std::string("invalid split library JSON: ") + ex.what());
  }
  SplitLibraryEntry e;
  try {
    e.L_s = j.at("L_s").get<int>();
    e.lambda = j.at("lambda").get<double>();
    for (const auto& t : j.at("triples")) {
      if (!t.is_array() || t.size() != 3) throw ConfigError("triples", "each triple must be [w, m, sigma]");
      e.triples.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("", std::string("split library schema: ") + ex.what());
  }
  e.validate();
  return e;
}

void save_split_library(const SplitLibraryEntry& entry, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << split_library_to_json(entry);
}

SplitLibraryEntry load_split_library(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open split library");
  std::ostringstream ss;
  ss << in.rdbuf();
  return split_library_from_json(ss.str());
}

const SplitLibraryEntry& default_split_library() {
  static const SplitLibraryEntry entry{3,
                                       1e-4,
                                       {{0x1.8731bdeb2bec2p-3, -0x1.f024b6ea04492p-1, 0x1.9a01a06927ebfp-1},
                                        {0x1.3c67210a6a09fp-1, 0x0p+0, 0x1.9a01a06927ebfp-1},
                                        {0x1.8731bdeb2bec2p-3, 0x1.f024b6ea04492p-1, 0x1.9a01a06927ebfp-1}}};
  return entry;
}

SplitLibraryEntry split_library_for(int L_s, double lambda) {
  if (L_s == 3 && lambda == 1e-4) return default_split_library();
  return generate_split_library(L_s, lambda);
}

std::vector<Mixand> split_multivariate(const Mixand& mix, const Vector& direction, const SplitLibraryEntry& lib) {
  const Eigen::Index n = mix.m.size();
  if (direction.size() != n || mix.P.rows() != n || mix.P.cols() != n) {
    throw DimensionError("split_multivariate: dimension mismatch");
  }
  const double norm = direction.norm();
  if (!(std::abs(norm - 1.0) < 1e-8)) throw Error("split_multivariate: direction must be a unit vector");
  if (lib.triples.empty()) throw Error("split_multivariate: empty library");

  const Matrix l = cholesky_lower(mix.P);
  const Vector z = l.triangularView<Eigen::Lower>().solve(direction);
  const double scale = 1.0 / z.norm();

  Matrix spread = Matrix::Zero(n, n);
  double var_sum = 0.0;
  for (const auto& t : lib.triples) {
    const double s = t.m * scale;
    spread += t.w * s * s * direction * direction.transpose();
    var_sum += t.w * t.sigma * t.sigma;
  }
  const Matrix shared = mix.P - spread;

  std::vector<Mixand> children;
  children.reserve(lib.triples.size());
  for (std::size_t i = 0; i < lib.triples.size(); ++i) {
    const auto& t = lib.triples[i];
    Mixand c;
    c.w = mix.w * t.w;
    c.m = mix.m + (t.m * scale) * direction;
    c.P = symmetric_part((t.sigma * t.sigma / var_sum) * shared);
    c.lineage = mix.lineage + "." + std::to_string(i);
    require_spd(c.P, "split_multivariate child " + c.lineage);
    children.push_back(std::move(c));
  }
  return children;
}

}  // namespace gmprop
