#include "mpnet/rrtstar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mpnet/rng.hpp"

namespace mpnet {

namespace {

Config sample_state(const Workspace& w, const Bounds& region, RngStream& rng) {
  Config x = Config::zeros(state_dim(w.kind));
  for (int i = 0; i < w.dim_w; ++i) {
    const auto k = static_cast<std::size_t>(i);
    x[i] = rng.uniform(region.min[k], region.max[k]);
  }
  if (w.kind == WorkspaceKind::rigid2d) x[2] = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return x;
}

}  // namespace

void validate_tree(const RrtTree& tree, WorkspaceKind kind, double tol) {
  const std::size_t n = tree.nodes.size();
  if (tree.parent.size() != n || tree.cost_to_come.size() != n)
    throw std::logic_error("rrt tree: ragged arrays");
  for (std::size_t i = 0; i < n; ++i) {
    // Walk to the root; more than n hops means a cycle.
    std::size_t hops = 0;
    for (int at = static_cast<int>(i); at != -1; at = tree.parent[static_cast<std::size_t>(at)]) {
      if (++hops > n) throw std::logic_error("rrt tree: parent cycle at node " + std::to_string(i));
    }
    const int p = tree.parent[i];
    if (p == -1) {
      if (tree.cost_to_come[i] != 0.0) throw std::logic_error("rrt tree: root cost not zero");
      continue;
    }
    const double expect = tree.cost_to_come[static_cast<std::size_t>(p)] +
                          config_distance(tree.nodes[static_cast<std::size_t>(p)], tree.nodes[i], kind);
    if (std::abs(expect - tree.cost_to_come[i]) > tol)
      throw std::logic_error("rrt tree: cost recursion broken at node " + std::to_string(i));
  }
}

std::optional<RrtResult> rrtstar_plan(const Workspace& w, const Config& x_init, const GoalRegion& goal,
                                      const RrtConfig& cfg, const RigidBody* body, RrtTree* tree_out) {
  if (cfg.max_iters <= 0) throw std::invalid_argument("rrtstar_plan: max_iters must be positive");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("rrtstar_plan: eta must be positive");
  if (cfg.goal_bias < 0.0 || cfg.goal_bias >= 1.0)
    throw std::invalid_argument("rrtstar_plan: goal_bias must be in [0,1)");
  if (!point_in_free_space(x_init, w, body))
    throw std::invalid_argument("rrtstar_plan: x_init is not in free space");

  const WorkspaceKind kind = w.kind;
  const int d = state_dim(kind);
  const Bounds region = cfg.sample_region ? *cfg.sample_region : w.bounds;

  RngStream rng(cfg.seed);

  std::vector<Config> nodes{x_init};
  std::vector<int> parent{-1};
  std::vector<double> cost{0.0};
  std::vector<std::vector<int>> children{{}};
  std::vector<int> goal_nodes;

  // Trivial case: the start already satisfies the goal.
  if (config_distance(x_init, goal.center, kind) <= goal.radius) {
    if (tree_out) *tree_out = RrtTree{nodes, parent, cost};
    return RrtResult{Path{{x_init}}, 0.0, 0, 0};
  }

  int first_solution_iteration = -1;
  int iter = 0;

  auto nearest = [&](const Config& q) {
    int best = 0;
    double best_d = config_distance(nodes[0], q, kind);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      const double di = config_distance(nodes[i], q, kind);
      if (di < best_d) {
        best_d = di;
        best = static_cast<int>(i);
      }
    }
    return std::pair<int, double>(best, best_d);
  };

  // Exact cost propagation after a rewire.
  auto propagate_cost = [&](int root) {
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int at = stack.back();
      stack.pop_back();
      for (int ch : children[static_cast<std::size_t>(at)]) {
        cost[static_cast<std::size_t>(ch)] =
            cost[static_cast<std::size_t>(at)] +
            config_distance(nodes[static_cast<std::size_t>(at)], nodes[static_cast<std::size_t>(ch)], kind);
        stack.push_back(ch);
      }
    }
  };

  for (iter = 1; iter <= cfg.max_iters; ++iter) {
    const Config target = rng.bernoulli(cfg.goal_bias) ? goal.center : sample_state(w, region, rng);

    const auto [near_idx, near_dist] = nearest(target);
    if (near_dist < 1e-12) continue;  // duplicate of an existing node

    const Config& x_near = nodes[static_cast<std::size_t>(near_idx)];
    const Config x_new = near_dist <= cfg.eta ? target : interpolate(x_near, target, cfg.eta / near_dist, kind);

    if (!point_in_free_space(x_new, w, body)) continue;

    // Shrinking neighborhood radius, capped by the extend step.
    const auto n = static_cast<double>(nodes.size());
    const double radius =
        n < 2.0 ? cfg.eta
                : std::min(cfg.gamma * std::pow(std::log(n) / n, 1.0 / static_cast<double>(d)), cfg.eta);

    std::vector<int> neighbors;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (config_distance(nodes[i], x_new, kind) <= radius) neighbors.push_back(static_cast<int>(i));

    // Cheapest collision-free parent; fall back to the nearest node.
    int best_parent = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<bool> link_free(neighbors.size(), false);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      const auto idx = static_cast<std::size_t>(neighbors[i]);
      const double c = cost[idx] + config_distance(nodes[idx], x_new, kind);
      if (c >= best_cost) continue;
      if (segment_collision_free(nodes[idx], x_new, w, cfg.steer_step, body)) {
        link_free[i] = true;
        best_cost = c;
        best_parent = neighbors[i];
      }
    }
    if (best_parent == -1) {
      // The nearest node can fall outside the shrunken radius; connect
      // through it when its link is free.
      if (!segment_collision_free(x_near, x_new, w, cfg.steer_step, body)) continue;
      best_parent = near_idx;
    }

    const int new_idx = static_cast<int>(nodes.size());
    nodes.push_back(x_new);
    parent.push_back(best_parent);
    cost.push_back(cost[static_cast<std::size_t>(best_parent)] +
                   config_distance(nodes[static_cast<std::size_t>(best_parent)], x_new, kind));
    children.emplace_back();
    children[static_cast<std::size_t>(best_parent)].push_back(new_idx);

    // Rewire the neighborhood through the new node where that is cheaper.
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      const int nb = neighbors[i];
      if (nb == best_parent) continue;
      const auto nbu = static_cast<std::size_t>(nb);
      const double through = cost[static_cast<std::size_t>(new_idx)] + config_distance(x_new, nodes[nbu], kind);
      if (through + 1e-12 >= cost[nbu]) continue;
      const bool free = link_free[i] ? true : segment_collision_free(x_new, nodes[nbu], w, cfg.steer_step, body);
      if (!free) continue;
      auto& old_children = children[static_cast<std::size_t>(parent[nbu])];
      old_children.erase(std::find(old_children.begin(), old_children.end(), nb));
      parent[nbu] = new_idx;
      children[static_cast<std::size_t>(new_idx)].push_back(nb);
      cost[nbu] = through;
      propagate_cost(nb);
    }

    if (config_distance(x_new, goal.center, kind) <= goal.radius) {
      goal_nodes.push_back(new_idx);
      if (first_solution_iteration < 0) first_solution_iteration = iter;
    }

    if (first_solution_iteration >= 0 && cfg.post_solution_iters >= 0 &&
        iter >= first_solution_iteration + cfg.post_solution_iters)
      break;
  }

  if (tree_out) *tree_out = RrtTree{nodes, parent, cost};
  if (goal_nodes.empty()) return std::nullopt;

  // Best goal node first; skip any whose extracted path fails the strict
  // validation step (possible when plan-time steering grazed a corner).
  std::sort(goal_nodes.begin(), goal_nodes.end(),
            [&](int a, int b) { return cost[static_cast<std::size_t>(a)] < cost[static_cast<std::size_t>(b)]; });
  for (int gn : goal_nodes) {
    Path path;
    for (int at = gn; at != -1; at = parent[static_cast<std::size_t>(at)])
      path.states.push_back(nodes[static_cast<std::size_t>(at)]);
    std::reverse(path.states.begin(), path.states.end());
    if (path_feasible(path, w, kStrictStep, body))
      return RrtResult{std::move(path), cost[static_cast<std::size_t>(gn)], std::min(iter, cfg.max_iters),
                       first_solution_iteration};
  }
  return std::nullopt;
}

double path_cost(const Path& tau, WorkspaceKind kind) {
  if (tau.empty()) throw std::invalid_argument("path_cost: empty path");
  double c = 0.0;
  for (std::size_t i = 0; i + 1 < tau.size(); ++i)
    c += config_distance(tau.states[i], tau.states[i + 1], kind);
  return c;
}

}  // namespace mpnet
