#include "gmprop/hotdogs.hpp"

#include <cmath>
#include <memory>

#include <json.hpp>

#include "gmprop/error.hpp"

namespace gmprop {

std::string to_string(DsVariant v) {
  switch (v) {
    case DsVariant::DS1:
      return "DS1";
    case DsVariant::DS2:
      return "DS2";
    case DsVariant::DS3:
      return "DS3";
  }
  return "DS3";
}

DsVariant ds_variant_from_string(const std::string& name) {
  if (name == "DS1") return DsVariant::DS1;
  if (name == "DS2") return DsVariant::DS2;
  if (name == "DS3") return DsVariant::DS3;
  throw ConfigError("variant", "unknown variant '" + name + "' (valid: DS1, DS2, DS3)");
}

void HotdogsConfig::validate() const {
  if (std::isnan(epsilon) || epsilon < 0.0) throw ConfigError("epsilon", "must be >= 0");
  if (!(w_min >= 0.0 && w_min < 1.0)) throw ConfigError("w_min", "must lie in [0, 1)");
  if (max_depth < 1) throw ConfigError("max_depth", "must be >= 1");
  if (moment_order != 1 && moment_order != 2) throw ConfigError("moment_order", "must be 1 or 2");
  if (L_s < 3 || L_s % 2 == 0) throw ConfigError("L_s", "must be odd and >= 3");
  if (!(lambda >= 0.0)) throw ConfigError("lambda", "must be >= 0");
  if (checkpoints < 1) throw ConfigError("checkpoints", "must be >= 1");
  heuristic.validate();
}

std::vector<double> checkpoint_grid(double t0, double tf, int intervals) {
  if (intervals < 1) throw ConfigError("checkpoints", "must be >= 1");
  if (!(tf > t0)) throw ConfigError("span", "tf must exceed t0");
  std::vector<double> grid(static_cast<std::size_t>(intervals) + 1);
  for (int k = 0; k < intervals; ++k) grid[k] = t0 + (tf - t0) * k / intervals;
  grid.back() = tf;
  return grid;
}

std::size_t select_split_index(std::span<const double> weighted, double epsilon) {
  if (weighted.empty()) throw ConfigError("checkpoints", "empty checkpoint set");
  for (std::size_t k = weighted.size(); k-- > 0;) {
    if (weighted[k] < epsilon) return k;
  }
  return 0;
}

SplitTimeSelection select_split_time(double w, std::span<const double> times, std::span<const SplitContext> contexts,
                                     const HeuristicSpec& spec, double epsilon) {
  if (times.empty()) throw ConfigError("checkpoints", "empty checkpoint set");
  if (times.size() != contexts.size()) throw DimensionError("select_split_time: times and contexts differ in length");
  SplitTimeSelection out;
  out.weighted.reserve(times.size());
  for (const auto& ctx : contexts) out.weighted.push_back(w * split_direction(spec, ctx).value);
  out.index = select_split_index(out.weighted, epsilon);
  out.t_s = times[out.index];
  return out;
}

FlowExpansion reconstruct_at_split(const FlowExpansion& leg, std::size_t index) {
  if (index >= leg.checkpoints.size()) throw DimensionError("reconstruct_at_split: index past the last checkpoint");
  if (index == 0) return leg;
  const auto& s = leg.checkpoints[index];
  FlowExpansion out;
  out.t0 = s.t;
  out.order = leg.order;
  out.checkpoints.reserve(leg.checkpoints.size() - index);
  // One factorization of Phi(t_s,t0) serves every later checkpoint.
  const Mat6 inv = LuSolver(s.phi).solve(Matrix(Matrix::Identity(6, 6)));
  for (std::size_t k = index; k < leg.checkpoints.size(); ++k) {
    const auto& c = leg.checkpoints[k];
    Checkpoint r;
    r.t = c.t;
    r.x = c.x;
    if (k == index) {
      r.phi = Mat6::Identity();
      if (leg.order == 2) {
        r.psi = Tensor3(6);
        r.psi.set_zero();
      }
    } else {
      r.phi = c.phi * inv;
      if (leg.order == 2) {
        r.psi = Tensor3(6);
        for (Eigen::Index i = 0; i < 6; ++i) {
          Mat6 a = c.psi.slice(i);
          for (Eigen::Index l = 0; l < 6; ++l) a -= r.phi(i, l) * Mat6(s.psi.slice(l));
          const Mat6 b = inv.transpose() * a * inv;
          r.psi.slice(i) = 0.5 * (b + b.transpose());
        }
      }
    }
    out.checkpoints.push_back(std::move(r));
  }
  return out;
}

namespace {

std::string strip_epoch_suffix(const std::string& what) {
  const auto pos = what.rfind(" (last good epoch");
  return pos == std::string::npos ? what : what.substr(0, pos);
}

template <class Fn>
auto with_lineage(const std::string& lineage, Fn&& fn) {
  try {
    return fn();
  } catch (const IntegrationError& e) {
    throw IntegrationError("mixand " + lineage + ": " + strip_epoch_suffix(e.what()), e.last_good_epoch());
  } catch (const IndefiniteCovarianceError& e) {
    throw IndefiniteCovarianceError("mixand " + lineage + ": " + e.what(), e.eigenvalues());
  }
}

std::vector<double> leg_times(const FlowExpansion& f) {
  std::vector<double> t;
  t.reserve(f.checkpoints.size());
  for (const auto& c : f.checkpoints) t.push_back(c.t);
  return t;
}

bool on_reference(const Vector& m, const Vec6& x) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m(i) != x(i)) return false;
  }
  return true;
}

}  // namespace

std::vector<FlowExpansion> child_expansions(const ChildExpansionRequest& req, const FlowExpansion& parent,
                                            const std::vector<Mixand>& children, const DynamicsModel& model,
                                            int* integrations) {
  if (parent.checkpoints.empty()) throw DimensionError("child_expansions: empty parent expansion");
  const std::vector<double> times = leg_times(parent);
  const double ts = parent.checkpoints.front().t;
  const Vec6 xs = parent.checkpoints.front().x;
  auto count = [&] {
    if (integrations != nullptr) ++*integrations;
  };

  std::vector<FlowExpansion> out;
  out.reserve(children.size());
  for (const auto& child : children) {
    if (req.reuse_central && on_reference(child.m, xs)) {
      out.push_back(parent);
      continue;
    }
    with_lineage(child.lineage, [&] {
      switch (req.variant) {
        case DsVariant::DS1: {
          const Vector dm = child.m - Vector(xs);
          const auto states = propagate_states(model, child.m, ts, times, req.integrator);
          count();
          FlowExpansion f;
          f.t0 = ts;
          f.order = parent.order;
          f.checkpoints.resize(times.size());
          for (std::size_t k = 0; k < times.size(); ++k) {
            const auto& pc = parent.checkpoints[k];
            auto& c = f.checkpoints[k];
            c.t = pc.t;
            c.x = states[k];
            c.phi = stm_shift_reference(pc.phi, pc.psi, dm);
            c.psi = pc.psi;
          }
          out.push_back(std::move(f));
          break;
        }
        case DsVariant::DS2: {
          FlowExpansion f = integrate_flow(model, child.m, ts, times, 1, req.integrator);
          count();
          f.order = parent.order;
          for (std::size_t k = 0; k < times.size(); ++k) f.checkpoints[k].psi = parent.checkpoints[k].psi;
          out.push_back(std::move(f));
          break;
        }
        case DsVariant::DS3:
          out.push_back(integrate_flow(model, child.m, ts, times, req.stt_order, req.integrator));
          count();
          break;
      }
      return 0;
    });
  }
  return out;
}

namespace {

using WhiteningSeries = std::shared_ptr<const std::vector<Matrix>>;

struct Leg {
  Mixand input;
  FlowExpansion flow;
  std::size_t g0 = 0;
  WhiteningSeries W;
};

/// Unscented fit of the flow from the leg start to each later grid epoch.
std::vector<StatisticalLinearization> sl_series(const DynamicsModel& model, const Mixand& mix,
                                                std::span<const double> times, const HotdogsConfig& cfg,
                                                int& integrations) {
  const SigmaPoints sp = sigma_points(mix.m, mix.P, cfg.heuristic);
  std::vector<std::vector<Vec6>> mapped;
  mapped.reserve(sp.points.size());
  for (const auto& pt : sp.points) {
    mapped.push_back(propagate_states(model, pt, times.front(), times, cfg.integrator));
    ++integrations;
  }
  std::vector<StatisticalLinearization> out;
  out.reserve(times.size());
  std::vector<Vector> at(sp.points.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < sp.points.size(); ++i) at[i] = mapped[i][k];
    out.push_back(statistical_linearization(sp, at, mix.m, mix.P));
  }
  return out;
}

Mixand moments_at(const Mixand& input, const Checkpoint& c, int order) {
  Mixand m = order == 2 ? propagate_moments_second(input, c.x, c.phi, c.psi)
                        : propagate_moments_first(input, c.x, c.phi);
  m.w = input.w;
  m.lineage = input.lineage;
  return m;
}

class Runner {
 public:
  Runner(const DynamicsModel& model, double t0, double tf, const HotdogsConfig& cfg)
      : model_(model), cfg_(cfg), grid_(checkpoint_grid(t0, tf, cfg.checkpoints)) {
    cfg.validate();
    lib_ = split_library_for(cfg.L_s, cfg.lambda);
  }

  [[nodiscard]] bool needs_stt_kind() const { return needs_stt(cfg_.heuristic.kind); }
  [[nodiscard]] bool needs_sl() const { return needs_sigma_points(cfg_.heuristic.kind); }

  [[nodiscard]] bool can_split(const Mixand& m) const { return m.depth() < cfg_.max_depth && m.w >= cfg_.w_min; }

  [[nodiscard]] int flow_order(const Mixand& m, bool deferred) const {
    if (cfg_.moment_order == 2) return 2;
    const bool splits = can_split(m);
    if (splits && needs_stt_kind()) return 2;
    if (deferred && splits && cfg_.variant == DsVariant::DS1) return 2;
    if (deferred && cfg_.record_trace && needs_stt_kind()) return 2;
    return 1;
  }

  FlowExpansion integrate(const Mixand& m, std::size_t g0, int order) {
    ++result_.integrations;
    return with_lineage(m.lineage, [&] {
      return integrate_flow(model_, m.m, grid_[g0], std::span<const double>(grid_).subspan(g0), order,
                            cfg_.integrator);
    });
  }

  /// W(t) over grid epochs >= g0 from a mixand at grid epoch g0 and its flow.
  WhiteningSeries whitening(const Mixand& m, const FlowExpansion& flow, std::size_t g0, const WhiteningSeries& base) {
    if (!needs_whitening(cfg_.heuristic.kind)) return nullptr;
    auto w = base ? std::make_shared<std::vector<Matrix>>(*base) : std::make_shared<std::vector<Matrix>>(grid_.size());
    if (cfg_.heuristic.kind == HeuristicKind::WUSSADL_S) {
      const auto sls = sl_series(model_, m, std::span<const double>(grid_).subspan(g0), cfg_, result_.integrations);
      for (std::size_t k = 0; k < sls.size(); ++k) (*w)[g0 + k] = whitening_factor(sls[k].P_z);
    } else {
      for (std::size_t k = 0; k < flow.checkpoints.size(); ++k)
        (*w)[g0 + k] = whitening_from_parent(m.P, flow.checkpoints[k].phi);
    }
    return w;
  }

  SplitContext context(const Mixand& input, const Checkpoint& c, const WhiteningSeries& W, std::size_t g,
                       const std::vector<StatisticalLinearization>* sls, std::size_t k) const {
    SplitContext ctx;
    ctx.P = input.P;
    ctx.G = c.phi;
    ctx.G2 = c.psi;
    if (W) ctx.W = (*W)[g];
    if (sls != nullptr) ctx.sl = (*sls)[k];
    return ctx;
  }

  void finalize(const Mixand& input, const FlowExpansion& flow) {
    result_.mixture.mixands.push_back(
        with_lineage(input.lineage, [&] { return moments_at(input, flow.back(), cfg_.moment_order); }));
  }

  void deferred(Leg leg) {
    const auto& input = leg.input;
    const auto& flow = leg.flow;
    const std::size_t last = flow.checkpoints.size() - 1;
    const bool splits = can_split(input);
    const bool computable = !needs_stt_kind() || flow.order == 2;
    const auto times = std::span<const double>(grid_).subspan(leg.g0);

    std::size_t s = last;
    double crit_s = 0.0;
    if ((splits || cfg_.record_trace) && computable) {
      std::vector<StatisticalLinearization> sls;
      if (needs_sl()) sls = sl_series(model_, input, times, cfg_, result_.integrations);
      auto ctx_at = [&](std::size_t k) {
        return context(input, flow.checkpoints[k], leg.W, leg.g0 + k, needs_sl() ? &sls : nullptr, k);
      };
      if (cfg_.record_trace) {
        std::vector<SplitContext> ctxs;
        ctxs.reserve(flow.checkpoints.size());
        for (std::size_t k = 0; k <= last; ++k) ctxs.push_back(ctx_at(k));
        const auto sel = select_split_time(input.w, times, ctxs, cfg_.heuristic, cfg_.epsilon);
        for (std::size_t k = 0; k <= last; ++k)
          result_.trace.push_back({times[k], static_cast<int>(leg.g0 + k), input.depth(), input.lineage, sel.weighted[k]});
        s = sel.index;
        crit_s = sel.weighted[s];
      } else {
        // Last-crossing rule evaluated backwards; stops at the first satisfied checkpoint.
        s = 0;
        for (std::size_t k = last + 1; k-- > 0;) {
          const double v = input.w * split_direction(cfg_.heuristic, ctx_at(k)).value;
          crit_s = v;
          if (v < cfg_.epsilon) {
            s = k;
            break;
          }
        }
      }
    }
    if (!splits || s == last) {
      finalize(input, flow);
      return;
    }

    const std::size_t gs = leg.g0 + s;
    const FlowExpansion recon = reconstruct_at_split(flow, s);
    const Mixand parent_s = with_lineage(input.lineage, [&] { return moments_at(input, flow.checkpoints[s], cfg_.moment_order); });

    std::optional<std::vector<StatisticalLinearization>> sls_s;
    if (needs_sl()) sls_s = sl_series(model_, parent_s, std::span<const double>(grid_).subspan(gs), cfg_, result_.integrations);
    SplitContext dctx;
    dctx.P = parent_s.P;
    dctx.G = recon.back().phi;
    dctx.G2 = recon.back().psi;
    if (leg.W) dctx.W = leg.W->back();
    if (sls_s) dctx.sl = sls_s->back();
    const auto dir = split_direction(cfg_.heuristic, dctx);
    auto children = split_multivariate(parent_s, dir.direction, lib_);

    ChildExpansionRequest req;
    req.variant = cfg_.variant;
    req.stt_order = 1;
    for (const auto& c : children) req.stt_order = std::max(req.stt_order, flow_order(c, true));
    req.reuse_central = cfg_.moment_order == 1;
    req.integrator = cfg_.integrator;
    auto flows = child_expansions(req, recon, children, model_, &result_.integrations);

    SplitEvent ev;
    ev.lineage = input.lineage;
    ev.t_s = grid_[gs];
    ev.grid_index = static_cast<int>(gs);
    ev.direction = dir.direction;
    ev.criterion = crit_s;
    ev.direction_value = dir.value;
    ev.variant = cfg_.variant;
    switch (cfg_.variant) {
      case DsVariant::DS1:
        ev.recomputed = "trajectory";
        break;
      case DsVariant::DS2:
        ev.recomputed = "trajectory+stm";
        break;
      case DsVariant::DS3:
        ev.recomputed = req.stt_order == 2 ? "trajectory+stm+stt" : "trajectory+stm";
        break;
    }
    result_.events.push_back(std::move(ev));

    WhiteningSeries w = leg.W;
    if (cfg_.whitening == WhiteningMode::RefreshPerSplit) w = whitening(parent_s, recon, gs, leg.W);
    for (std::size_t i = 0; i < children.size(); ++i) deferred(Leg{std::move(children[i]), std::move(flows[i]), gs, w});
  }

  void immediate(const Mixand& mix, const FlowExpansion& flow, const WhiteningSeries& W) {
    if (!can_split(mix)) {
      finalize(mix, flow);
      return;
    }
    SplitContext ctx;
    ctx.P = mix.P;
    ctx.G = flow.back().phi;
    ctx.G2 = flow.back().psi;
    if (W) ctx.W = W->back();
    if (needs_sl()) ctx.sl = sl_series(model_, mix, grid_, cfg_, result_.integrations).back();
    const auto dir = split_direction(cfg_.heuristic, ctx);
    const auto children = split_multivariate(mix, dir.direction, lib_);

    SplitEvent ev;
    ev.lineage = mix.lineage;
    ev.t_s = grid_.front();
    ev.direction = dir.direction;
    ev.direction_value = dir.value;
    ev.recomputed = "trajectory+stm+stt";
    result_.events.push_back(std::move(ev));

    WhiteningSeries w = W;
    if (cfg_.whitening == WhiteningMode::RefreshPerSplit) w = whitening(mix, flow, 0, nullptr);
    for (const auto& c : children) {
      if (cfg_.moment_order == 1 && on_reference(c.m, flow.checkpoints.front().x)) {
        immediate(c, flow, w);
      } else {
        immediate(c, integrate(c, 0, flow_order(c, false)), w);
      }
    }
  }

  RunResult run_deferred(const Mixand& root) {
    FlowExpansion flow = integrate(root, 0, flow_order(root, true));
    WhiteningSeries w = whitening(root, flow, 0, nullptr);
    deferred(Leg{root, std::move(flow), 0, w});
    return std::move(result_);
  }

  RunResult run_immediate(const Mixand& root) {
    FlowExpansion flow = integrate(root, 0, flow_order(root, false));
    WhiteningSeries w = whitening(root, flow, 0, nullptr);
    immediate(root, flow, w);
    return std::move(result_);
  }

  RunResult run_unsplit(const Mixand& root) {
    finalize(root, integrate(root, 0, cfg_.moment_order));
    return std::move(result_);
  }

 private:
  const DynamicsModel& model_;
  const HotdogsConfig& cfg_;
  std::vector<double> grid_;
  SplitLibraryEntry lib_;
  RunResult result_;
};

Mixand as_root(const Mixand& root) {
  if (root.m.size() != 6 || root.P.rows() != 6 || root.P.cols() != 6)
    throw DimensionError("root mixand must be six-dimensional");
  Mixand r = root;
  r.w = 1.0;
  r.lineage = "0";
  return r;
}

}  // namespace

RunResult hotdogs_run(const Mixand& root, const DynamicsModel& model, double t0, double tf, const HotdogsConfig& cfg) {
  return Runner(model, t0, tf, cfg).run_deferred(as_root(root));
}

RunResult immediate_run(const Mixand& root, const DynamicsModel& model, double t0, double tf,
                        const HotdogsConfig& cfg) {
  return Runner(model, t0, tf, cfg).run_immediate(as_root(root));
}

RunResult unsplit_run(const Mixand& root, const DynamicsModel& model, double t0, double tf, const HotdogsConfig& cfg) {
  return Runner(model, t0, tf, cfg).run_unsplit(as_root(root));
}

std::string split_event_to_json(const SplitEvent& e) {
  nlohmann::json j;
  j["lineage"] = e.lineage;
  j["t_s"] = e.t_s;
  j["grid_index"] = e.grid_index;
  j["direction"] = std::vector<double>(e.direction.data(), e.direction.data() + e.direction.size());
  j["criterion"] = e.criterion;
  j["direction_value"] = e.direction_value;
  j["variant"] = to_string(e.variant);
  j["recomputed"] = e.recomputed;
  return j.dump();
}

}  // namespace gmprop
