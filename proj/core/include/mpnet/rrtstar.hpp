#pragma once

#include <cstdint>
#include <optional>

#include "mpnet/geometry.hpp"

namespace mpnet {

struct RrtConfig {
  int max_iters = 5000;
  double eta = 1.0;          // extend step
  double goal_bias = 0.05;   // probability of sampling the goal center
  double gamma = 6.0;        // rewire radius scale: r(n) = min(gamma*(log n / n)^(1/d), eta)
  double steer_step = kPlanStep;
  std::uint64_t seed = 0;
  /// -1 runs the full iteration budget and returns the best goal-region
  /// solution; k >= 0 stops k iterations after the first solution (0 = time
  /// to first solution).
  int post_solution_iters = -1;
  /// Restricts spatial sampling to a sub-box of the workspace bounds (the
  /// rigid2d angle is always sampled over its full range).
  std::optional<Bounds> sample_region;
};

struct RrtTree {
  std::vector<Config> nodes;
  std::vector<int> parent;  // -1 for the root
  std::vector<double> cost_to_come;
};

/// Throws std::logic_error if parent links cycle or the cost recursion does
/// not hold to within tol.
void validate_tree(const RrtTree& tree, WorkspaceKind kind, double tol = 1e-9);

struct RrtResult {
  Path path;
  double cost = 0.0;
  int iterations = 0;
  int first_solution_iteration = -1;
};

/// Asymptotically-optimal RRT: sample, extend by at most eta toward the
/// sample, choose the cheapest collision-free parent within the shrinking
/// radius, rewire the neighborhood. Returns the best goal-region solution
/// found within the stopping rule, already validated at the strict steering
/// step, or nullopt when none was found (not an error).
std::optional<RrtResult> rrtstar_plan(const Workspace& w, const Config& x_init, const GoalRegion& goal,
                                      const RrtConfig& cfg, const RigidBody* body = nullptr,
                                      RrtTree* tree_out = nullptr);

/// Sum of metric distances over consecutive states (rigid2d uses the
/// wrap-aware SE(2) metric).
double path_cost(const Path& tau, WorkspaceKind kind);

}  // namespace mpnet
