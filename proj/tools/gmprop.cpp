// gmprop command-line driver.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "gmprop/error.hpp"
#include "gmprop/gmm.hpp"
#include "gmprop/runner.hpp"

namespace fs = std::filesystem;
using namespace gmprop;

namespace {

struct ScenarioArgs {
  std::string scenario = "geo";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<Eigen::Index> samples;

  [[nodiscard]] Scenario load() const {
    Scenario s = config.empty() ? builtin_scenario(scenario) : load_scenario(config);
    if (seed) s.mc.seed = *seed;
    if (samples) s.mc.N = *samples;
    s.validate();
    return s;
  }
};

struct MethodArgs {
  std::string method = "WUSSOLC";
  std::string variant;
  std::string whitening = "frozen";
  std::string madem_norm = "mixture";
  RunOptions opts;

  [[nodiscard]] MethodSpec spec() const {
    MethodSpec m = parse_method(method);
    if (!variant.empty()) {
      if (m.kind == MethodSpec::Kind::None) throw ConfigError("variant", "method 'none' cannot be deferred");
      m.kind = MethodSpec::Kind::Deferred;
      m.variant = ds_variant_from_string(variant);
    }
    return m;
  }

  [[nodiscard]] RunOptions options() const {
    RunOptions o = opts;
    if (whitening == "frozen") {
      o.whitening = WhiteningMode::FrozenRoot;
    } else if (whitening == "refresh") {
      o.whitening = WhiteningMode::RefreshPerSplit;
    } else {
      throw ConfigError("whitening", "expected 'frozen' or 'refresh'");
    }
    if (madem_norm == "mixture") {
      o.madem_norm = MademNorm::Mixture;
    } else if (madem_norm == "sample") {
      o.madem_norm = MademNorm::Sample;
    } else {
      throw ConfigError("madem-norm", "expected 'mixture' or 'sample'");
    }
    return o;
  }
};

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("--scenario", a.scenario, "Built-in scenario: geo, molniya or butterfly");
  cmd->add_option("--config", a.config, "Scenario YAML file (overrides --scenario)");
  cmd->add_option("--seed", a.seed, "Monte Carlo seed");
  cmd->add_option("--samples", a.samples, "Monte Carlo sample count")->check(CLI::PositiveNumber);
}

void add_method_flags(CLI::App* cmd, MethodArgs& a) {
  cmd->add_option("--epsilon", a.opts.epsilon, "Deferred splitting tolerance on w*F");
  cmd->add_option("--depth", a.opts.depth, "Maximum split depth (root is 1)");
  cmd->add_option("--order", a.opts.moment_order, "Moment propagation order (1 or 2)");
  cmd->add_option("--ls", a.opts.L_s, "Components per split");
  cmd->add_option("--lambda", a.opts.lambda, "Split library variance penalty");
  cmd->add_option("--checkpoints", a.opts.checkpoints, "Checkpoint grid intervals");
  cmd->add_option("--whitening", a.whitening, "frozen (root) or refresh (per split)");
  cmd->add_option("--madem-norm", a.madem_norm, "mixture or sample covariance for MaDEM");
}

SampleSet truth_for(const Scenario& s, const std::string& truth_path) {
  if (truth_path.empty()) return scenario_truth(s);
  auto t = load_samples(truth_path);
  if (t.t != s.tf) throw ConfigError("truth", "sample epoch does not match the scenario final time");
  return t;
}

std::string metrics_text(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  write_metrics_csv(os, rows);
  return os.str();
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("artifact", "cannot open " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("artifact", e.what());
  }
}

/// Removes outputs written so far unless released.
class OutputGuard {
 public:
  void add(const fs::path& p) { paths_.push_back(p); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

int cmd_run(const ScenarioArgs& sa, const MethodArgs& ma, const std::string& truth_path, const std::string& out) {
  const auto s = sa.load();
  const auto m = ma.spec();
  const auto opts = ma.options();
  const auto truth = truth_for(s, truth_path);
  const auto run = run_method(s, m, opts);
  auto row = evaluate(m.label(), run.result.mixture, truth, opts.madem_norm);
  if (m.kind == MethodSpec::Kind::Deferred) {
    MethodSpec imm = m;
    imm.kind = MethodSpec::Kind::Immediate;
    RunOptions ref = opts;
    ref.record_trace = false;
    row.relative_time = run.seconds / run_method(s, imm, ref).seconds;
  }
  const std::string csv = metrics_text({row});
  std::cout << csv;

  fs::create_directories(out);
  OutputGuard guard;
  const fs::path dir(out);
  guard.add(dir / "metrics.csv");
  write_file_atomic(dir / "metrics.csv", csv);
  guard.add(dir / "run.json");
  write_file_atomic(dir / "run.json", run_artifact(s, run, opts, &row).dump(1) + "\n");
  std::string events;
  for (const auto& e : run.result.events) events += split_event_to_json(e) + "\n";
  guard.add(dir / "events.jsonl");
  write_file_atomic(dir / "events.jsonl", events);
  guard.release();
  return 0;
}

int cmd_compare(const ScenarioArgs& sa, const MethodArgs& ma, const std::vector<std::string>& methods,
                const std::string& truth_path, const std::string& out) {
  const auto s = sa.load();
  const auto opts = ma.options();
  std::vector<MethodSpec> specs;
  for (const auto& t : methods) specs.push_back(parse_method(t));
  if (specs.empty()) throw ConfigError("method", "compare needs at least one method");
  const auto truth = truth_for(s, truth_path);
  const auto res = compare(s, specs, opts, truth);
  const std::string csv = metrics_text(res.rows);
  std::cout << csv;
  if (!out.empty()) write_file_atomic(out, csv);
  return 0;
}

int cmd_marginals(const std::string& artifact, const std::vector<int>& axes, int grid, double extent,
                  const std::string& out) {
  if (axes.size() != 2) throw ConfigError("axes", "expected two axis indices");
  const auto gm = mixture_from_json(read_json(artifact).at("mixture"));
  const auto g = marginal_grid(gm, axes[0], axes[1], grid, extent);
  std::ostringstream os;
  os << "x,y,density\n";
  char line[128];
  for (Eigen::Index i = 0; i < g.xs.size(); ++i) {
    for (Eigen::Index k = 0; k < g.ys.size(); ++k) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", g.xs(i), g.ys(k), g.density(i, k));
      os << line;
    }
  }
  write_file_atomic(out, os.str());
  return 0;
}

int cmd_library(int L_s, double lambda, const std::string& out) {
  const auto entry = generate_split_library(L_s, lambda);
  entry.validate();
  save_split_library(entry, out);
  return 0;
}

int cmd_trace(const std::string& artifact, const std::string& out) {
  const auto j = read_json(artifact);
  const int L_s = j.contains("options") ? j["options"].value("L_s", 3) : 3;
  const auto rows = central_chain_trace(j, L_s);
  std::ostringstream os;
  os << "t,depth,value\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.17g,%d,%.17g\n", r.t, r.depth, r.value);
    os << line;
  }
  write_file_atomic(out, os.str());
  return 0;
}

int cmd_mc_truth(const ScenarioArgs& sa, const std::string& out) {
  const auto s = sa.load();
  const auto truth = scenario_truth(s);
  std::ostringstream os;
  write_samples_csv(os, truth);
  write_file_atomic(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-mixture uncertainty propagation with deferred splitting"};
  app.require_subcommand(1);

  ScenarioArgs sa;
  MethodArgs ma;
  std::string out;
  std::string truth_path;

  auto* run = app.add_subcommand("run", "Run one method and score it against Monte Carlo truth");
  add_scenario_flags(run, sa);
  add_method_flags(run, ma);
  run->add_option("--method", ma.method, "none, a heuristic name, or DSn-<heuristic>");
  run->add_option("--variant", ma.variant, "DS1, DS2 or DS3: defer the split");
  run->add_option("--truth", truth_path, "Reuse truth samples from mc-truth");
  run->add_flag("--record-trace", ma.opts.record_trace, "Keep the criterion history of every leg");
  run->add_option("--out", out, "Output directory")->required();

  std::vector<std::string> methods;
  auto* cmp = app.add_subcommand("compare", "Score several methods against one shared truth set");
  add_scenario_flags(cmp, sa);
  add_method_flags(cmp, ma);
  cmp->add_option("--method", methods, "Methods in table order")->required();
  cmp->add_option("--truth", truth_path, "Reuse truth samples from mc-truth");
  cmp->add_option("--out", out, "CSV output path");

  std::string artifact;
  std::vector<int> axes{0, 1};
  int grid = 101;
  double extent = 4.0;
  auto* marg = app.add_subcommand("marginals", "Grid a two-dimensional marginal of a run's final mixture");
  marg->add_option("--artifact", artifact, "run.json from the run command")->required();
  marg->add_option("--axes", axes, "Two state indices")->expected(2)->delimiter(',');
  marg->add_option("--grid", grid, "Points per axis");
  marg->add_option("--extent", extent, "Half width in standard deviations");
  marg->add_option("--out", out, "CSV output path")->required();

  int lib_ls = 3;
  double lib_lambda = 1e-4;
  auto* lib = app.add_subcommand("library", "Generate a univariate split library entry");
  lib->add_option("--ls", lib_ls, "Component count (odd)");
  lib->add_option("--lambda", lib_lambda, "Variance penalty");
  lib->add_option("--out", out, "JSON output path")->required();

  auto* trace = app.add_subcommand("trace", "Criterion history of the root and central-child chain");
  trace->add_option("--artifact", artifact, "run.json recorded with --record-trace")->required();
  trace->add_option("--out", out, "CSV output path")->required();

  auto* mc = app.add_subcommand("mc-truth", "Propagate Monte Carlo truth samples to the final time");
  add_scenario_flags(mc, sa);
  mc->add_option("--out", out, "CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(sa, ma, truth_path, out);
    if (*cmp) return cmd_compare(sa, ma, methods, truth_path, out);
    if (*marg) return cmd_marginals(artifact, axes, grid, extent, out);
    if (*lib) return cmd_library(lib_ls, lib_lambda, out);
    if (*trace) return cmd_trace(artifact, out);
    if (*mc) return cmd_mc_truth(sa, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
