#include "gmprop/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "gmprop/error.hpp"
#include "gmprop/propagation.hpp"

namespace gmprop {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ConfigError(where, "not a number: '" + tok + "'");
  }
  return v;
}

}  // namespace

Vector SampleSet::mean() const { return samples.colwise().mean().transpose(); }

Matrix SampleSet::covariance() const {
  const Eigen::Index n = count();
  if (n < 2) throw DimensionError("SampleSet::covariance: need at least two samples");
  const Matrix centred = samples.rowwise() - samples.colwise().mean();
  return symmetric_part(centred.transpose() * centred / static_cast<double>(n - 1));
}

void SampleSet::validate() const {
  if (count() < 2) throw DimensionError("SampleSet: need at least two samples");
  if (!samples.allFinite()) throw Error("SampleSet: non-finite entries");
}

std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SampleSet sample_mixture(const GaussianMixture& gm, Eigen::Index n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("mc.N", "must be at least 1");
  gm.validate(1e-9);
  const Eigen::Index n = gm.dim();
  std::vector<Matrix> factors;
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : gm.mixands) {
    factors.push_back(cholesky_lower(c.P));
    acc += c.w;
    cumulative.push_back(acc);
  }

  SampleSet s;
  s.seed = seed;
  s.samples.resize(n_samples, n);
  std::uniform_real_distribution<double> uni(0.0, acc);
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng(sample_stream_seed(seed, static_cast<std::uint64_t>(i)));
    const double r = uni(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    std::normal_distribution<double> normal;
    Vector z(n);
    for (Eigen::Index j = 0; j < n; ++j) z(j) = normal(rng);
    s.samples.row(i) = (gm.mixands[k].m + factors[k] * z).transpose();
  }
  return s;
}

SampleSet mc_truth(const DynamicsModel& model, const GaussianMixture& gm, Eigen::Index n_samples, std::uint64_t seed,
                   double t0, double tf, const IntegratorOptions& opts) {
  if (gm.dim() != kStateDim) throw DimensionError("mc_truth: mixture must be six-dimensional");
  SampleSet s = sample_mixture(gm, n_samples, seed);
  s.t = tf;
  if (tf == t0) return s;
  const double times[] = {tf};
  for (Eigen::Index i = 0; i < s.count(); ++i) {
    const Vector x0 = s.samples.row(i).transpose();
    try {
      s.samples.row(i) = propagate_states(model, x0, t0, times, opts).back().transpose();
    } catch (const IntegrationError& e) {
      throw IntegrationError("mc_truth: sample " + std::to_string(i) + ": " + e.what(), e.last_good_epoch());
    }
  }
  return s;
}

double madem(const GaussianMixture& gm, const SampleSet& s, MademNorm norm) {
  const auto mm = mixture_moments(gm);
  if (mm.mean.size() != s.samples.cols()) throw DimensionError("madem: dimension mismatch");
  const Matrix p = norm == MademNorm::Mixture ? mm.cov : s.covariance();
  const Matrix l = cholesky_lower(p);
  return l.triangularView<Eigen::Lower>().solve(mm.mean - s.mean()).norm();
}

double mcr(const Matrix& P, const Matrix& P_sample) {
  const auto es = generalized_sym_eig(P_sample, P);
  const double top = es.values(0);
  const double bottom = es.values(es.values.size() - 1);
  return std::max(top, 1.0 / bottom);
}

double mcr(const GaussianMixture& gm, const SampleSet& s) {
  const auto mm = mixture_moments(gm);
  if (mm.cov.rows() != s.samples.cols()) throw DimensionError("mcr: dimension mismatch");
  return mcr(mm.cov, s.covariance());
}

Vector cvm_per_axis(const GaussianMixture& gm, const SampleSet& s) {
  const Eigen::Index n = s.samples.cols();
  if (gm.dim() != n) throw DimensionError("cvm: dimension mismatch");
  const Eigen::Index count = s.count();
  if (count < 2) throw DimensionError("cvm: need at least two samples");
  const double nd = static_cast<double>(count);
  Vector out(n);
  std::vector<double> col(static_cast<std::size_t>(count));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < count; ++i) col[i] = s.samples(i, j);
    std::sort(col.begin(), col.end());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      const double gap = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * nd) - gm_marginal_cdf(gm, j, col[i]);
      acc += gap * gap;
    }
    out(j) = 1.0 / (12.0 * nd) + acc;
  }
  return out;
}

double cvm_norm(const GaussianMixture& gm, const SampleSet& s) { return cvm_per_axis(gm, s).norm(); }

void write_samples_csv(std::ostream& os, const SampleSet& s) {
  os << "t";
  for (Eigen::Index j = 0; j < s.samples.cols(); ++j) os << ",x" << j + 1;
  os << '\n';
  const std::string t = format_double(s.t);
  for (Eigen::Index i = 0; i < s.count(); ++i) {
    os << t;
    for (Eigen::Index j = 0; j < s.samples.cols(); ++j) os << ',' << format_double(s.samples(i, j));
    os << '\n';
  }
}

SampleSet read_samples_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("samples", "empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.size() < 2 || header[0] != "t") throw ConfigError("samples.header", "expected t,x1,...,xn");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "x" + std::to_string(j)) throw ConfigError("samples.header", "unexpected column '" + header[j] + "'");
  }
  const auto n = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<double> values;
  double t = 0.0;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    Eigen::Index col = 0;
    const std::string where = "samples.row" + std::to_string(rows + 1);
    while (std::getline(ss, tok, ',')) {
      const double v = parse_double(tok, where);
      if (col == 0) {
        t = v;
      } else {
        values.push_back(v);
      }
      ++col;
    }
    if (col != n + 1) throw ConfigError(where, "wrong number of columns");
    ++rows;
  }
  SampleSet s;
  s.t = t;
  s.samples = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, n);
  return s;
}

void save_samples(const std::filesystem::path& path, const SampleSet& s) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  write_samples_csv(os, s);
}

SampleSet load_samples(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path.string(), "cannot open");
  return read_samples_csv(is);
}

}  // namespace gmprop
