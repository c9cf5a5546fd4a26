#include "gmprop/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "gmprop/error.hpp"

namespace gmprop {

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::None:
      return "none";
    case Kind::Immediate:
      return to_string(heuristic);
    case Kind::Deferred:
      return to_string(variant) + "-" + to_string(heuristic);
  }
  return "none";
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec m;
  if (text == "none") {
    m.kind = MethodSpec::Kind::None;
    return m;
  }
  const auto dash = text.find('-');
  if (dash != std::string::npos) {
    m.kind = MethodSpec::Kind::Deferred;
    m.variant = ds_variant_from_string(text.substr(0, dash));
    m.heuristic = heuristic_kind_from_string(text.substr(dash + 1));
    return m;
  }
  m.kind = MethodSpec::Kind::Immediate;
  m.heuristic = heuristic_kind_from_string(text);
  return m;
}

HotdogsConfig RunOptions::hotdogs_config(const MethodSpec& m) const {
  HotdogsConfig cfg;
  cfg.epsilon = epsilon;
  cfg.max_depth = depth;
  cfg.variant = m.variant;
  cfg.moment_order = moment_order;
  cfg.heuristic.kind = m.heuristic;
  cfg.L_s = L_s;
  cfg.lambda = lambda;
  cfg.checkpoints = checkpoints;
  cfg.whitening = whitening;
  cfg.record_trace = record_trace;
  cfg.integrator = integrator;
  cfg.validate();
  return cfg;
}

MethodRun run_method(const Scenario& s, const MethodSpec& m, const RunOptions& opts) {
  s.validate();
  const auto cfg = opts.hotdogs_config(m);
  const Mixand root{1.0, s.x0, s.P0, "0"};
  MethodRun out;
  out.method = m;
  const auto start = std::chrono::steady_clock::now();
  switch (m.kind) {
    case MethodSpec::Kind::None:
      out.result = unsplit_run(root, s.model, s.t0, s.tf, cfg);
      break;
    case MethodSpec::Kind::Immediate:
      out.result = immediate_run(root, s.model, s.t0, s.tf, cfg);
      break;
    case MethodSpec::Kind::Deferred:
      out.result = hotdogs_run(root, s.model, s.t0, s.tf, cfg);
      break;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

MetricsRow evaluate(const std::string& label, const GaussianMixture& gm, const SampleSet& truth, MademNorm norm) {
  MetricsRow r;
  r.method = label;
  r.madem = madem(gm, truth, norm);
  r.cvm = cvm_norm(gm, truth);
  r.mcr = mcr(gm, truth);
  return r;
}

namespace {

GaussianMixture initial_mixture(const Scenario& s) {
  GaussianMixture gm;
  gm.mixands.push_back({1.0, s.x0, s.P0, "0"});
  return gm;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

SampleSet scenario_truth(const Scenario& s, const IntegratorOptions& opts) {
  return mc_truth(s.model, initial_mixture(s), s.mc.N, s.mc.seed, s.t0, s.tf, opts);
}

MetricsRow original_row(const Scenario& s, MademNorm norm) {
  const auto gm = initial_mixture(s);
  return evaluate("original", gm, mc_truth(s.model, gm, s.mc.N, s.mc.seed, s.t0, s.t0), norm);
}

CompareResult compare(const Scenario& s, const std::vector<MethodSpec>& methods, const RunOptions& opts,
                      const SampleSet& truth) {
  CompareResult out;
  std::map<HeuristicKind, double> reference;
  for (const auto& m : methods) {
    out.runs.push_back(run_method(s, m, opts));
    if (m.kind == MethodSpec::Kind::Immediate && !reference.contains(m.heuristic))
      reference[m.heuristic] = out.runs.back().seconds;
  }
  for (const auto& run : out.runs) {
    auto row = evaluate(run.method.label(), run.result.mixture, truth, opts.madem_norm);
    if (run.method.kind == MethodSpec::Kind::Deferred) {
      if (!reference.contains(run.method.heuristic)) {
        MethodSpec imm = run.method;
        imm.kind = MethodSpec::Kind::Immediate;
        reference[run.method.heuristic] = run_method(s, imm, opts).seconds;
      }
      row.relative_time = run.seconds / reference[run.method.heuristic];
    }
    out.rows.push_back(std::move(row));
  }
  out.rows.push_back(original_row(s, opts.madem_norm));
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    char rel[32];
    std::snprintf(rel, sizeof rel, "%.3f", r.relative_time);
    os << r.method << ',' << shortest(r.madem) << ',' << shortest(r.cvm) << ',' << shortest(r.mcr) << ',' << rel
       << '\n';
  }
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string library_key(int L_s, double lambda) {
  // same spelling as the shipped file name: 1e-4, 2.5e-3
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, lambda, std::chars_format::scientific);
  std::string text(buf, r.ptr);
  const auto e = text.find('e');
  std::string exp = text.substr(e + 1);
  const bool neg = exp[0] == '-';
  if (exp[0] == '-' || exp[0] == '+') exp.erase(0, 1);
  while (exp.size() > 1 && exp[0] == '0') exp.erase(0, 1);
  return "L" + std::to_string(L_s) + "_lambda" + text.substr(0, e) + "e" + (neg ? "-" : "") + exp;
}

nlohmann::json mixture_to_json(const GaussianMixture& gm) {
  auto arr = nlohmann::json::array();
  for (const auto& c : gm.mixands) {
    nlohmann::json j;
    j["w"] = c.w;
    j["lineage"] = c.lineage;
    j["m"] = std::vector<double>(c.m.data(), c.m.data() + c.m.size());
    auto p = nlohmann::json::array();
    for (Eigen::Index i = 0; i < c.P.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(c.P.cols()));
      for (Eigen::Index k = 0; k < c.P.cols(); ++k) row[k] = c.P(i, k);
      p.push_back(row);
    }
    j["P"] = p;
    arr.push_back(j);
  }
  return arr;
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("mixture", "expected an array of mixands");
  GaussianMixture gm;
  try {
    for (const auto& c : j) {
      Mixand m;
      m.w = c.at("w").get<double>();
      m.lineage = c.at("lineage").get<std::string>();
      const auto mv = c.at("m").get<std::vector<double>>();
      m.m = Eigen::Map<const Vector>(mv.data(), static_cast<Eigen::Index>(mv.size()));
      const auto rows = c.at("P").get<std::vector<std::vector<double>>>();
      m.P.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw ConfigError("mixture.P", "covariance must be square");
        for (std::size_t k = 0; k < rows.size(); ++k) m.P(i, k) = rows[i][k];
      }
      gm.mixands.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("mixture", e.what());
  }
  if (gm.mixands.empty()) throw ConfigError("mixture", "no mixands");
  for (const auto& c : gm.mixands) {
    if (c.m.size() != gm.dim() || c.P.rows() != gm.dim()) throw ConfigError("mixture", "mixed dimensions");
  }
  if (std::abs(gm.total_weight() - 1.0) > 1e-9) throw ConfigError("mixture", "weights do not sum to 1");
  return gm;
}

nlohmann::json run_artifact(const Scenario& s, const MethodRun& run, const RunOptions& opts,
                            const MetricsRow* metrics) {
  nlohmann::json options;
  options["depth"] = opts.depth;
  options["moment_order"] = opts.moment_order;
  options["L_s"] = opts.L_s;
  options["lambda"] = opts.lambda;
  options["epsilon"] = opts.epsilon;
  options["checkpoints"] = opts.checkpoints;
  options["whitening"] = opts.whitening == WhiteningMode::FrozenRoot ? "frozen_root" : "refresh_per_split";
  options["madem_norm"] = opts.madem_norm == MademNorm::Mixture ? "mixture" : "sample";

  const std::string yaml = scenario_to_yaml(s);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(yaml + "\n" + run.method.label() + "\n" + options.dump())));

  nlohmann::json j;
  j["provenance"] = {{"config_hash", hash},
                     {"seed", s.mc.seed},
                     {"mc_samples", s.mc.N},
                     {"library", library_key(opts.L_s, opts.lambda)},
                     {"integrator", {{"abs_tol", opts.integrator.abs_tol}, {"rel_tol", opts.integrator.rel_tol}}}};
  j["scenario"] = s.name;
  j["scenario_yaml"] = yaml;
  j["method"] = run.method.label();
  j["options"] = options;
  j["wall_seconds"] = run.seconds;
  j["integrations"] = run.result.integrations;
  j["mixture"] = mixture_to_json(run.result.mixture);
  auto events = nlohmann::json::array();
  for (const auto& e : run.result.events) events.push_back(nlohmann::json::parse(split_event_to_json(e)));
  j["events"] = events;
  auto trace = nlohmann::json::array();
  for (const auto& p : run.result.trace)
    trace.push_back({{"t", p.t}, {"grid_index", p.grid_index}, {"depth", p.depth}, {"lineage", p.lineage},
                     {"value", p.value}});
  j["trace"] = trace;
  if (metrics != nullptr) {
    j["metrics"] = {{"MaDEM", metrics->madem},
                    {"CvMnorm", metrics->cvm},
                    {"MCR", metrics->mcr},
                    {"RelativeTime", metrics->relative_time}};
  }
  return j;
}

std::vector<TraceRow> central_chain_trace(const nlohmann::json& artifact, int L_s) {
  if (!artifact.contains("trace") || artifact["trace"].empty())
    throw ConfigError("trace", "artifact has no recorded criterion trace (run with --record-trace)");
  const std::string central = std::to_string((L_s - 1) / 2);
  std::vector<TraceRow> rows;
  for (const auto& p : artifact["trace"]) {
    TraceRow r;
    r.t = p.at("t").get<double>();
    r.depth = p.at("depth").get<int>();
    r.lineage = p.at("lineage").get<std::string>();
    r.value = p.at("value").get<double>();
    std::string chain = "0";
    for (int d = 1; d < r.depth; ++d) chain += "." + central;
    if (r.lineage == chain) rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.t < b.t;
  });
  return rows;
}

MarginalGrid marginal_grid(const GaussianMixture& gm, int axis_a, int axis_b, int points, double extent) {
  const auto n = gm.dim();
  if (axis_a < 0 || axis_b < 0 || axis_a >= n || axis_b >= n || axis_a == axis_b)
    throw ConfigError("axes", "need two distinct axes in [0, " + std::to_string(n) + ")");
  if (points < 2) throw ConfigError("grid", "need at least two points per axis");
  if (!(extent > 0.0)) throw ConfigError("extent", "must be positive");
  const auto mm = mixture_moments(gm);
  auto axis = [&](int a) {
    const double sd = std::sqrt(mm.cov(a, a));
    return Vector(Vector::LinSpaced(points, mm.mean(a) - extent * sd, mm.mean(a) + extent * sd));
  };
  MarginalGrid g;
  g.xs = axis(axis_a);
  g.ys = axis(axis_b);
  g.density.resize(points, points);
  for (int i = 0; i < points; ++i)
    for (int k = 0; k < points; ++k) g.density(i, k) = gm_marginal_pdf2(gm, axis_a, axis_b, g.xs(i), g.ys(k));
  return g;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw ConfigError("out", "cannot write " + tmp.string());
    os << text;
    if (!os) {
      std::filesystem::remove(tmp);
      throw ConfigError("out", "write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gmprop
