#include "mpnet/planner.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "mpnet/errors.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t us_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
}

bool steer(const Config& a, const Config& b, const Workspace& w, double step, const RigidBody* body,
           PlanCounters& counters) {
  ++counters.steer_checks;
  return segment_collision_free(a, b, w, step, body);
}

StepFn model_step_fn(const PlannerModel& pl, const Eigen::VectorXd& latent, const MpnetConfig& cfg,
                     RngStream& rng, PlanCounters& counters) {
  return [&pl, latent, stochastic = cfg.stochastic, &rng, &counters](
             const Config& from, const Config& toward) -> std::optional<Config> {
    ++counters.pnet_calls;
    try {
      return pnet_step(pl, latent, from, toward, rng, stochastic);
    } catch (const ModelOutputError&) {
      ++counters.failed_pnet_outputs;
      return std::nullopt;
    }
  };
}

/// Drops interior states that are not in free space; the planners can only
/// bridge between free states. Endpoints are kept.
Path keep_free_interior(const Path& tau, const Workspace& w, const RigidBody* body) {
  if (tau.size() <= 2) return tau;
  Path out;
  out.states.push_back(tau.states.front());
  for (std::size_t i = 1; i + 1 < tau.size(); ++i)
    if (point_in_free_space(tau.states[i], w, body)) out.states.push_back(tau.states[i]);
  out.states.push_back(tau.states.back());
  return out;
}

std::optional<Path> rrt_fallback(const Config& a, const Config& b, const Workspace& w,
                                 const MpnetConfig& cfg, const RigidBody* body,
                                 PlanCounters& counters) {
  ++counters.rrt_fallback_calls;
  RrtConfig rc = cfg.hybrid_rrt;
  rc.seed = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(counters.rrt_fallback_calls)));
  if (w.kind == WorkspaceKind::complex3d) rc.eta = std::max(rc.eta, 2.0);
  if (!cfg.fallback_full_workspace) {
    Bounds region;
    region.dim = w.dim_w;
    for (int i = 0; i < w.dim_w; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double pad = cfg.fallback_region_inflation * w.bounds.extent(i);
      region.min[k] = std::max(w.bounds.min[k], std::min(a[i], b[i]) - pad);
      region.max[k] = std::min(w.bounds.max[k], std::max(a[i], b[i]) + pad);
    }
    rc.sample_region = region;
  }

  // Plan to the exact state: a tiny goal ball plus goal bias makes the tree
  // snap onto b itself once it is within one extend step.
  const GoalRegion goal{b, 1e-9};
  auto result = rrtstar_plan(w, a, goal, rc, body);
  if (!result) return std::nullopt;
  Path path = std::move(result->path);
  if (!(path.back() == b)) path.states.push_back(b);
  return path;
}

struct ReplanContext {
  const StepFn& step_fn;
  const Workspace& w;
  const MpnetConfig& cfg;
  const RigidBody* body;
  PlanCounters& counters;
};

std::optional<Path> neural_replan(const Path& tau, ReplanContext& ctx, int depth);

/// Neural bridge between two free states: coarse bidirectional path, then
/// contraction, then a finer recursive repair if still infeasible.
std::optional<Path> neural_bridge(const Config& a, const Config& b, ReplanContext& ctx, int depth) {
  if (depth <= 0) return std::nullopt;
  auto coarse = neural_planner_bidir(ctx.step_fn, a, b, ctx.w, ctx.cfg, ctx.body, ctx.counters);
  if (!coarse) return std::nullopt;
  Path contracted = lazy_states_contraction(*coarse, ctx.w, ctx.cfg.plan_step, ctx.body,
                                            &ctx.counters.steer_checks);
  if (path_feasible(contracted, ctx.w, ctx.cfg.plan_step, ctx.body)) return contracted;
  return neural_replan(contracted, ctx, depth - 1);
}

/// Pairwise neural repair; returns nullopt as soon as a pair cannot be
/// bridged within the remaining depth.
std::optional<Path> neural_replan(const Path& tau, ReplanContext& ctx, int depth) {
  ++ctx.counters.replan_calls;
  const Path clean = keep_free_interior(tau, ctx.w, ctx.body);
  Path out;
  out.states.push_back(clean.states.front());
  for (std::size_t i = 0; i + 1 < clean.size(); ++i) {
    const Config& a = clean.states[i];
    const Config& b = clean.states[i + 1];
    if (steer(a, b, ctx.w, ctx.cfg.plan_step, ctx.body, ctx.counters)) {
      out.states.push_back(b);
      continue;
    }
    auto bridge = neural_bridge(a, b, ctx, depth);
    if (!bridge) return std::nullopt;
    out.states.insert(out.states.end(), bridge->states.begin() + 1, bridge->states.end());
  }
  return out;
}

/// Like neural_replan but never gives up: unbridgeable pairs are kept broken
/// for the classical stage to fix.
Path neural_replan_best_effort(const Path& tau, ReplanContext& ctx, int depth) {
  ++ctx.counters.replan_calls;
  const Path clean = keep_free_interior(tau, ctx.w, ctx.body);
  Path out;
  out.states.push_back(clean.states.front());
  for (std::size_t i = 0; i + 1 < clean.size(); ++i) {
    const Config& a = clean.states[i];
    const Config& b = clean.states[i + 1];
    if (steer(a, b, ctx.w, ctx.cfg.plan_step, ctx.body, ctx.counters)) {
      out.states.push_back(b);
      continue;
    }
    auto bridge = neural_bridge(a, b, ctx, depth);
    if (bridge)
      out.states.insert(out.states.end(), bridge->states.begin() + 1, bridge->states.end());
    else
      out.states.push_back(b);
  }
  return out;
}

}  // namespace

std::string to_string(ReplanMode mode) { return mode == ReplanMode::NR ? "NR" : "HR"; }

ReplanMode replan_mode_from_string(const std::string& s) {
  if (s == "NR") return ReplanMode::NR;
  if (s == "HR") return ReplanMode::HR;
  throw std::invalid_argument("unknown replan mode: " + s);
}

Path lazy_states_contraction(const Path& tau, const Workspace& w, double step, const RigidBody* body,
                             long* steer_checks) {
  if (tau.empty()) throw std::invalid_argument("lazy_states_contraction: empty path");
  if (tau.size() <= 2) return tau;

  Path out;
  std::size_t anchor = 0;
  out.states.push_back(tau.states[anchor]);
  while (anchor + 1 < tau.size()) {
    // Scan from the far end so the kept state is the true farthest one.
    std::size_t next = anchor + 1;
    for (std::size_t j = tau.size() - 1; j > anchor + 1; --j) {
      if (steer_checks) ++*steer_checks;
      if (segment_collision_free(tau.states[anchor], tau.states[j], w, step, body)) {
        next = j;
        break;
      }
    }
    out.states.push_back(tau.states[next]);
    anchor = next;
  }
  return out;
}

std::optional<Path> neural_planner_bidir(const StepFn& step_fn, const Config& x_start,
                                         const Config& x_goal, const Workspace& w,
                                         const MpnetConfig& cfg, const RigidBody* body,
                                         PlanCounters& counters) {
  Path tau_a{{x_start}};
  Path tau_b{{x_goal}};
  bool a_from_start = true;

  for (int i = 0; i < cfg.bidir_iters; ++i) {
    const auto proposal = step_fn(tau_a.back(), tau_b.back());
    if (proposal) {
      tau_a.states.push_back(*proposal);
      if (a_from_start)
        ++counters.extensions_from_start;
      else
        ++counters.extensions_from_goal;
      if (steer(tau_a.back(), tau_b.back(), w, cfg.plan_step, body, counters)) {
        Path result = a_from_start ? tau_a : tau_b;
        const Path& other = a_from_start ? tau_b : tau_a;
        result.states.insert(result.states.end(), other.states.rbegin(), other.states.rend());
        return result;
      }
    }
    std::swap(tau_a, tau_b);
    a_from_start = !a_from_start;
  }
  return std::nullopt;
}

std::optional<Path> neural_planner_bidir(const PlannerModel& pl, const Eigen::VectorXd& latent,
                                         const Config& x_start, const Config& x_goal,
                                         const Workspace& w, const MpnetConfig& cfg, RngStream& rng,
                                         const RigidBody* body, PlanCounters& counters) {
  const StepFn fn = model_step_fn(pl, latent, cfg, rng, counters);
  return neural_planner_bidir(fn, x_start, x_goal, w, cfg, body, counters);
}

std::optional<Path> replan(const Path& tau, const StepFn& step_fn, const Workspace& w,
                           const MpnetConfig& cfg, int depth, const RigidBody* body,
                           PlanCounters& counters) {
  if (tau.empty()) throw std::invalid_argument("replan: empty path");
  if (depth < 0) throw std::invalid_argument("replan: negative depth");
  ReplanContext ctx{step_fn, w, cfg, body, counters};

  if (cfg.mode == ReplanMode::NR) return neural_replan(tau, ctx, depth);

  // Hybrid: neural phase first, then a strict-step sweep that hands any
  // still-broken pair to the classical planner.
  const Path neural = neural_replan_best_effort(tau, ctx, depth);
  Path out;
  out.states.push_back(neural.states.front());
  for (std::size_t i = 0; i + 1 < neural.size(); ++i) {
    const Config& a = neural.states[i];
    const Config& b = neural.states[i + 1];
    if (steer(a, b, w, cfg.strict_step, body, counters)) {
      out.states.push_back(b);
      continue;
    }
    auto fixed = rrt_fallback(a, b, w, cfg, body, counters);
    if (!fixed) return std::nullopt;
    out.states.insert(out.states.end(), fixed->states.begin() + 1, fixed->states.end());
  }
  return out;
}

std::optional<Path> replan(const Path& tau, const PlannerModel& pl, const Eigen::VectorXd& latent,
                           const Workspace& w, const MpnetConfig& cfg, int depth, RngStream& rng,
                           const RigidBody* body, PlanCounters& counters) {
  const StepFn fn = model_step_fn(pl, latent, cfg, rng, counters);
  return replan(tau, fn, w, cfg, depth, body, counters);
}

PlanResult mpnet_plan(const Workspace& w, const PointCloud& cloud, const Config& x_init,
                      const GoalRegion& goal, const EncoderModel& enc, const PlannerModel& pl,
                      const MpnetConfig& cfg, RngStream& rng, const RigidBody* body) {
  if (pl.state_dim != state_dim(w.kind) || x_init.dim() != pl.state_dim ||
      goal.center.dim() != pl.state_dim)
    throw std::invalid_argument("mpnet_plan: model/workspace dimension mismatch");
  if (!point_in_free_space(x_init, w, body))
    throw std::invalid_argument("mpnet_plan: x_init is not in free space");
  if (!point_in_free_space(goal.center, w, body))
    throw std::invalid_argument("mpnet_plan: goal center is not in free space");

  PlanResult result;

  // Degenerate query: the start already lies in the goal region.
  if (config_distance(x_init, goal.center, w.kind) <= goal.radius) {
    result.path = Path{{x_init}};
    result.succeeded = true;
    return result;
  }

  const auto t_encode = Clock::now();
  const Eigen::VectorXd latent = encode(enc, cloud);
  result.encode_time_us = us_since(t_encode);

  const auto t_plan = Clock::now();
  const StepFn fn = model_step_fn(pl, latent, cfg, rng, result.counters);

  auto finish_fail = [&]() {
    result.plan_time_us = us_since(t_plan);
    return result;
  };
  auto finish_ok = [&](Path path) {
    result.path = std::move(path);
    result.succeeded = true;
    result.plan_time_us = us_since(t_plan);
    return result;
  };
  auto meets_contract = [&](const Path& path) {
    return path.front() == x_init &&
           config_distance(path.back(), goal.center, w.kind) <= goal.radius &&
           path_feasible(path, w, cfg.strict_step, body);
  };

  auto coarse = neural_planner_bidir(fn, x_init, goal.center, w, cfg, body, result.counters);
  if (!coarse) return finish_fail();

  Path contracted = lazy_states_contraction(*coarse, w, cfg.plan_step, body, &result.counters.steer_checks);
  if (meets_contract(contracted)) return finish_ok(std::move(contracted));

  auto repaired = replan(contracted, fn, w, cfg, cfg.replan_depth, body, result.counters);
  if (!repaired) return finish_fail();

  // The final contraction runs at the strict step so it cannot reintroduce a
  // grazing shortcut right before the last gate.
  Path final_path = lazy_states_contraction(*repaired, w, cfg.strict_step, body, &result.counters.steer_checks);
  if (meets_contract(final_path)) return finish_ok(std::move(final_path));
  return finish_fail();
}

std::string plan_result_to_json(const PlanResult& result) {
  nlohmann::json j;
  j["succeeded"] = result.succeeded;
  j["encode_time_us"] = result.encode_time_us;
  j["plan_time_us"] = result.plan_time_us;
  j["counters"] = {{"pnet_calls", result.counters.pnet_calls},
                   {"steer_checks", result.counters.steer_checks},
                   {"replan_calls", result.counters.replan_calls},
                   {"rrt_fallback_calls", result.counters.rrt_fallback_calls},
                   {"failed_pnet_outputs", result.counters.failed_pnet_outputs},
                   {"extensions_from_start", result.counters.extensions_from_start},
                   {"extensions_from_goal", result.counters.extensions_from_goal},
                   {"fallback_used", result.counters.fallback_used()}};
  if (result.path) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : result.path->states) {
      nlohmann::json row = nlohmann::json::array();
      for (int i = 0; i < s.dim(); ++i) row.push_back(s[i]);
      states.push_back(std::move(row));
    }
    j["path"] = std::move(states);
  } else {
    j["path"] = nullptr;
  }
  return j.dump(2);
}

}  // namespace mpnet
