/**
 * @file hotdogs.hpp
 * @brief Deferred Gaussian-mixture splitting (HOTDOGS) and the immediate-splitting reference driver.
 *
 * Both drivers share one global checkpoint grid of `checkpoints + 1` equally
 * spaced epochs over [t0, tf]. Every leg of the recursion starts on a grid
 * epoch and records its flow expansion at each later grid epoch, so split
 * times are always grid epochs and whitening matrices can be indexed by grid
 * position.
 */
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmprop/dynamics.hpp"
#include "gmprop/gmm.hpp"
#include "gmprop/heuristics.hpp"
#include "gmprop/integrator.hpp"
#include "gmprop/propagation.hpp"

namespace gmprop {

enum class DsVariant { DS1, DS2, DS3 };

[[nodiscard]] std::string to_string(DsVariant v);
[[nodiscard]] DsVariant ds_variant_from_string(const std::string& name);

enum class WhiteningMode {
  FrozenRoot,       ///< every descendant uses the depth-1 root's W(t)
  RefreshPerSplit,  ///< children use W(t) built from the split parent at t_s
};

struct HotdogsConfig {
  double epsilon = 0.25;
  double w_min = 0.0;
  int max_depth = 4;  ///< root is depth 1
  DsVariant variant = DsVariant::DS3;
  int moment_order = 1;
  HeuristicSpec heuristic;
  int L_s = 3;
  double lambda = 1e-4;
  int checkpoints = 64;  ///< grid intervals
  WhiteningMode whitening = WhiteningMode::FrozenRoot;
  /// Evaluate and keep the weighted criterion of every leg, including legs that cannot split.
  bool record_trace = false;
  IntegratorOptions integrator;

  void validate() const;
};

struct SplitEvent {
  std::string lineage;
  double t_s = 0.0;
  int grid_index = 0;
  Vector direction;
  double criterion = 0.0;        ///< w F at t_s
  double direction_value = 0.0;  ///< F of the split direction over [t_s, tf]
  DsVariant variant = DsVariant::DS3;
  std::string recomputed;        ///< which child tensors were integrated
};

struct TracePoint {
  double t = 0.0;
  int grid_index = 0;
  int depth = 1;
  std::string lineage;
  double value = 0.0;  ///< w F
};

struct RunResult {
  GaussianMixture mixture;
  std::vector<SplitEvent> events;
  std::vector<TracePoint> trace;
  int integrations = 0;
};

[[nodiscard]] std::vector<double> checkpoint_grid(double t0, double tf, int intervals);

/// Largest index whose weighted criterion is below epsilon; 0 when none is.
[[nodiscard]] std::size_t select_split_index(std::span<const double> weighted, double epsilon);

struct SplitTimeSelection {
  std::size_t index = 0;
  double t_s = 0.0;
  std::vector<double> weighted;  ///< w F per checkpoint
};

/// Evaluates w F at every candidate epoch and applies the last-crossing rule.
[[nodiscard]] SplitTimeSelection select_split_time(double w, std::span<const double> times,
                                                   std::span<const SplitContext> contexts, const HeuristicSpec& spec,
                                                   double epsilon);

/// Re-references a leg at checkpoint `index`: Phi(t,t_s), Psi(t,t_s) for the remaining checkpoints.
[[nodiscard]] FlowExpansion reconstruct_at_split(const FlowExpansion& leg, std::size_t index);

/// How each child's flow expansion over [t_s, tf] is obtained.
struct ChildExpansionRequest {
  DsVariant variant = DsVariant::DS3;
  int stt_order = 2;        ///< 1 to skip STT integration for DS3 children
  bool reuse_central = true;
  IntegratorOptions integrator;
};

/**
 * DS1: Phi_i = Phi + Psi (m_i - x(t_s)), Psi_i = Psi, mean trajectory integrated.
 * DS2: Phi_i integrated, Psi_i = Psi. DS3: both integrated. A child sitting on
 * the parent reference keeps the parent tensors when reuse_central is set.
 */
[[nodiscard]] std::vector<FlowExpansion> child_expansions(const ChildExpansionRequest& req, const FlowExpansion& parent,
                                                          const std::vector<Mixand>& children,
                                                          const DynamicsModel& model, int* integrations = nullptr);

[[nodiscard]] RunResult hotdogs_run(const Mixand& root, const DynamicsModel& model, double t0, double tf,
                                    const HotdogsConfig& cfg);

/// All splits at t0 with freshly integrated expansions for every child.
[[nodiscard]] RunResult immediate_run(const Mixand& root, const DynamicsModel& model, double t0, double tf,
                                      const HotdogsConfig& cfg);

/// Single Gaussian propagated without splitting.
[[nodiscard]] RunResult unsplit_run(const Mixand& root, const DynamicsModel& model, double t0, double tf,
                                    const HotdogsConfig& cfg);

[[nodiscard]] std::string split_event_to_json(const SplitEvent& e);

}  // namespace gmprop
