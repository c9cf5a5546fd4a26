/**
 * @file runner.hpp
 * @brief Method descriptors, timed runs, metric tables and run artifacts.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmprop/hotdogs.hpp"
#include "gmprop/metrics.hpp"
#include "gmprop/scenarios.hpp"

namespace gmprop {

struct MethodSpec {
  enum class Kind { None, Immediate, Deferred };
  Kind kind = Kind::Immediate;
  HeuristicKind heuristic = HeuristicKind::WUSSOLC;
  DsVariant variant = DsVariant::DS3;

  /// "none", "<HEURISTIC>" or "<DSn>-<HEURISTIC>".
  [[nodiscard]] std::string label() const;
  bool operator==(const MethodSpec&) const = default;
};

/// Inverse of MethodSpec::label(); heuristic names are case sensitive.
[[nodiscard]] MethodSpec parse_method(const std::string& text);

struct RunOptions {
  int depth = 4;
  int moment_order = 1;
  int L_s = 3;
  double lambda = 1e-4;
  double epsilon = 0.25;
  int checkpoints = 64;
  WhiteningMode whitening = WhiteningMode::FrozenRoot;
  bool record_trace = false;
  MademNorm madem_norm = MademNorm::Mixture;
  IntegratorOptions integrator;

  [[nodiscard]] HotdogsConfig hotdogs_config(const MethodSpec& m) const;
};

struct MethodRun {
  MethodSpec method;
  RunResult result;
  double seconds = 0.0;  ///< propagation and splitting only
};

[[nodiscard]] MethodRun run_method(const Scenario& s, const MethodSpec& m, const RunOptions& opts);

struct MetricsRow {
  std::string method;
  double madem = 0.0;
  double cvm = 0.0;
  double mcr = 0.0;
  double relative_time = 1.0;
};

[[nodiscard]] MetricsRow evaluate(const std::string& label, const GaussianMixture& gm, const SampleSet& truth,
                                  MademNorm norm);

/// Truth samples at tf for the scenario's initial Gaussian with its Monte Carlo settings.
[[nodiscard]] SampleSet scenario_truth(const Scenario& s, const IntegratorOptions& opts = {});
/// The initial Gaussian against the very samples that seed the truth set.
[[nodiscard]] MetricsRow original_row(const Scenario& s, MademNorm norm);

struct CompareResult {
  std::vector<MetricsRow> rows;  ///< method order, then "original"
  std::vector<MethodRun> runs;
};

/**
 * Runs every method against one shared truth set. RelativeTime divides each
 * deferred run by an immediate run of the same heuristic, reusing one from
 * the list when present. Immediate and unsplit runs report 1.
 */
[[nodiscard]] CompareResult compare(const Scenario& s, const std::vector<MethodSpec>& methods, const RunOptions& opts,
                                    const SampleSet& truth);

inline constexpr const char* kMetricsHeader = "Method,MaDEM,CvMnorm,MCR,RelativeTime";

/// Metric columns in shortest round-trip form; RelativeTime with three decimals.
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

[[nodiscard]] std::uint64_t fnv1a64(const std::string& text);
[[nodiscard]] std::string library_key(int L_s, double lambda);

[[nodiscard]] nlohmann::json mixture_to_json(const GaussianMixture& gm);
[[nodiscard]] GaussianMixture mixture_from_json(const nlohmann::json& j);

/// Mixture, split events, criterion trace and provenance for one run.
[[nodiscard]] nlohmann::json run_artifact(const Scenario& s, const MethodRun& run, const RunOptions& opts,
                                          const MetricsRow* metrics);

struct TraceRow {
  double t = 0.0;
  int depth = 1;
  std::string lineage;
  double value = 0.0;
};

/// Root and central-child chain of a recorded trace, ordered by depth then time.
[[nodiscard]] std::vector<TraceRow> central_chain_trace(const nlohmann::json& artifact, int L_s);

struct MarginalGrid {
  Vector xs, ys;
  Matrix density;  ///< density(i, j) at (xs(i), ys(j))
};

/// Two-dimensional marginal of a mixture on a regular grid spanning mean +- extent sigma.
[[nodiscard]] MarginalGrid marginal_grid(const GaussianMixture& gm, int axis_a, int axis_b, int points, double extent);

/// Writes `text` to `path` through a temporary sibling file so a failed run leaves nothing behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace gmprop
