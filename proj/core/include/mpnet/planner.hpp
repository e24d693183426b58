#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "mpnet/geometry.hpp"
#include "mpnet/models.hpp"
#include "mpnet/rng.hpp"
#include "mpnet/rrtstar.hpp"

namespace mpnet {

enum class ReplanMode { NR, HR };

std::string to_string(ReplanMode mode);
ReplanMode replan_mode_from_string(const std::string& s);

struct MpnetConfig {
  int bidir_iters = 80;   // N in the bidirectional generation loop
  int replan_depth = 6;   // recursion limit of neural replanning
  ReplanMode mode = ReplanMode::HR;
  double plan_step = kPlanStep;     // steering checks during search
  double strict_step = kStrictStep; // final feasibility gates
  bool stochastic = true;           // dropout during online planning
  std::uint64_t seed = 0;
  RrtConfig hybrid_rrt{.max_iters = 20000, .goal_bias = 0.1, .steer_step = kStrictStep,
                       .post_solution_iters = 0};
  /// HR fallback samples a box around the broken segment inflated by this
  /// fraction of the workspace extent per dimension; false = reduced region.
  bool fallback_full_workspace = false;
  double fallback_region_inflation = 0.25;
};

struct PlanCounters {
  long pnet_calls = 0;
  long steer_checks = 0;
  long replan_calls = 0;
  long rrt_fallback_calls = 0;
  long failed_pnet_outputs = 0;
  long extensions_from_start = 0;
  long extensions_from_goal = 0;

  bool fallback_used() const { return rrt_fallback_calls > 0; }
};

struct PlanResult {
  std::optional<Path> path;
  bool succeeded = false;
  std::int64_t encode_time_us = 0;
  std::int64_t plan_time_us = 0;
  PlanCounters counters;
};

std::string plan_result_to_json(const PlanResult& result);

/// Next-state proposal; nullopt marks a failed query (e.g. non-finite model
/// output), which the planners count and skip.
using StepFn = std::function<std::optional<Config>(const Config& from, const Config& toward)>;

/// Greedy waypoint removal: from the current anchor, keep the farthest state
/// reachable by a free straight segment and repeat. Output is a subsequence
/// of the input with both endpoints preserved; a feasible input stays
/// feasible.
Path lazy_states_contraction(const Path& tau, const Workspace& w, double step,
                             const RigidBody* body = nullptr, long* steer_checks = nullptr);

/// Incremental bidirectional generation: two paths grow from start and goal,
/// the active one is extended by one proposal per iteration toward the other
/// path's tip, and a straight connection between tips ends the search. Roles
/// swap every iteration. Returns a start-to-goal ordered path, or nullopt
/// after cfg.bidir_iters iterations without a connection.
std::optional<Path> neural_planner_bidir(const StepFn& step_fn, const Config& x_start,
                                         const Config& x_goal, const Workspace& w,
                                         const MpnetConfig& cfg, const RigidBody* body,
                                         PlanCounters& counters);
std::optional<Path> neural_planner_bidir(const PlannerModel& pl, const Eigen::VectorXd& latent,
                                         const Config& x_start, const Config& x_goal,
                                         const Workspace& w, const MpnetConfig& cfg, RngStream& rng,
                                         const RigidBody* body, PlanCounters& counters);

/// Repairs a coarse path pair by pair. Steerable pairs are kept; broken ones
/// are bridged by recursive bidirectional generation (depth bounds the
/// recursion), and in HR mode any pair still broken afterwards is handed to
/// the classical fallback planner with strict-step collision checking.
/// Returns nullopt when a segment remains unrepaired.
std::optional<Path> replan(const Path& tau, const StepFn& step_fn, const Workspace& w,
                           const MpnetConfig& cfg, int depth, const RigidBody* body,
                           PlanCounters& counters);
std::optional<Path> replan(const Path& tau, const PlannerModel& pl, const Eigen::VectorXd& latent,
                           const Workspace& w, const MpnetConfig& cfg, int depth, RngStream& rng,
                           const RigidBody* body, PlanCounters& counters);

/// Full online pipeline: encode the cloud, generate a coarse bidirectional
/// path, contract, gate on strict feasibility, replan once if needed,
/// contract and gate again. A successful result always carries a path that
/// passes strict-step feasibility and ends inside the goal region.
PlanResult mpnet_plan(const Workspace& w, const PointCloud& cloud, const Config& x_init,
                      const GoalRegion& goal, const EncoderModel& enc, const PlannerModel& pl,
                      const MpnetConfig& cfg, RngStream& rng, const RigidBody* body = nullptr);

}  // namespace mpnet
