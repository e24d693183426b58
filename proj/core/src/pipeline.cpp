#include "mpnet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <queue>
#include <sstream>
#include <thread>

#include "mpnet/errors.hpp"
#include "mpnet/rng.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

nlohmann::json config_json(const Config& c) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < c.dim(); ++i) a.push_back(c[i]);
  return a;
}

Config config_from_json(const nlohmann::json& a) {
  if (!a.is_array() || a.empty() || a.size() > 3) throw ParseError("bad config array");
  Config c = Config::zeros(static_cast<int>(a.size()));
  for (int i = 0; i < c.dim(); ++i) c[i] = a[static_cast<std::size_t>(i)].get<double>();
  return c;
}

double spatial_distance(const Config& a, const Config& b, int dim_w) {
  double s = 0.0;
  for (int i = 0; i < dim_w; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << text;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string file_hash_hex(const std::filesystem::path& file) {
  const std::string data = read_file(file);
  return hex64(fnv1a64(data.data(), data.size()));
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int t = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(1, std::min(t, n));
  if (t == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// --- configuration -----------------------------------------------------------

WorkspaceSpec default_workspace_spec(WorkspaceKind kind) {
  WorkspaceSpec spec;
  spec.kind = kind;
  spec.bounds.dim = workspace_dim(kind);
  for (int i = 0; i < spec.bounds.dim; ++i) {
    spec.bounds.min[static_cast<std::size_t>(i)] = -20.0;
    spec.bounds.max[static_cast<std::size_t>(i)] = 20.0;
  }
  switch (kind) {
    case WorkspaceKind::simple2d:
    case WorkspaceKind::rigid2d:
      spec.obstacle_count_min = spec.obstacle_count_max = 7;
      spec.obstacle_size_min = spec.obstacle_size_max = 5.0;
      spec.square_obstacles = true;
      break;
    case WorkspaceKind::complex2d:
      spec.obstacle_count_min = spec.obstacle_count_max = 10;
      spec.obstacle_size_min = 2.0;
      spec.obstacle_size_max = 8.0;
      spec.square_obstacles = false;
      break;
    case WorkspaceKind::complex3d:
      spec.obstacle_count_min = spec.obstacle_count_max = 10;
      spec.obstacle_size_min = 4.0;
      spec.obstacle_size_max = 10.0;
      spec.square_obstacles = false;
      break;
  }
  return spec;
}

WorkspaceSpec PipelineConfig::workspace_spec(WorkspaceKind kind) const {
  WorkspaceSpec spec = default_workspace_spec(kind);
  if (auto it = workspace_overrides.find(kind); it != workspace_overrides.end()) spec = it->second;
  spec.kind = kind;
  spec.seed = RngStream(master_seed).derive("workspaces").derive(to_string(kind)).seed();
  if (kind == WorkspaceKind::rigid2d)
    spec.connectivity_margin = 0.5 + body_for(kind)->circumradius();
  return spec;
}

CaeArchitecture PipelineConfig::cae_architecture(WorkspaceKind kind) const {
  CaeArchitecture arch = cae_arch;
  if (workspace_dim(kind) == 3) arch.latent_dim = latent_dim_3d;
  return arch;
}

RrtConfig PipelineConfig::expert_rrt_for(WorkspaceKind kind) const {
  RrtConfig rc = expert_rrt;
  rc.steer_step = mpnet.plan_step;
  if (kind == WorkspaceKind::complex3d) rc.eta = std::max(rc.eta, 2.0);
  return rc;
}

RrtConfig PipelineConfig::baseline_rrt_for(WorkspaceKind kind) const {
  RrtConfig rc;
  rc.max_iters = bench.baseline_max_iters;
  rc.post_solution_iters = 0;  // benchmark measures time to the first solution
  rc.steer_step = mpnet.plan_step;
  if (kind == WorkspaceKind::complex3d) rc.eta = 2.0;
  return rc;
}

MpnetConfig PipelineConfig::mpnet_for(WorkspaceKind kind) const {
  MpnetConfig mc = mpnet;
  if (kind == WorkspaceKind::complex3d) mc.hybrid_rrt.eta = std::max(mc.hybrid_rrt.eta, 2.0);
  return mc;
}

std::optional<RigidBody> PipelineConfig::body_for(WorkspaceKind kind) const {
  if (kind != WorkspaceKind::rigid2d) return std::nullopt;
  return RigidBody::rectangle(rigid_body_length, rigid_body_width);
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void parse_train(const nlohmann::json& j, TrainConfig& cfg) {
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "batch_size", cfg.batch_size);
  maybe(j, "learning_rate", cfg.learning_rate);
  maybe(j, "lambda", cfg.lambda);
  maybe(j, "validation_fraction", cfg.validation_fraction);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  PipelineConfig cfg;
  maybe(j, "master_seed", cfg.master_seed);
  if (j.contains("kinds")) {
    cfg.kinds.clear();
    for (const auto& k : j.at("kinds")) cfg.kinds.push_back(workspace_kind_from_string(k.get<std::string>()));
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    maybe(d, "paths_per_workspace", cfg.dataset.paths_per_workspace);
    maybe(d, "seen_problems_total", cfg.dataset.seen_problems_total);
    maybe(d, "problems_per_unseen", cfg.dataset.problems_per_unseen);
    maybe(d, "n_pc", cfg.dataset.n_pc);
    maybe(d, "goal_radius", cfg.dataset.goal_radius);
    maybe(d, "min_separation_fraction", cfg.dataset.min_separation_fraction);
    maybe(d, "attempt_budget", cfg.dataset.attempt_budget);
  }
  if (j.contains("workspace")) {
    for (const auto& [key, wj] : j.at("workspace").items()) {
      const WorkspaceKind kind = workspace_kind_from_string(key);
      WorkspaceSpec spec = default_workspace_spec(kind);
      maybe(wj, "train_count", spec.train_count);
      maybe(wj, "unseen_count", spec.unseen_count);
      maybe(wj, "obstacle_count_min", spec.obstacle_count_min);
      maybe(wj, "obstacle_count_max", spec.obstacle_count_max);
      maybe(wj, "obstacle_size_min", spec.obstacle_size_min);
      maybe(wj, "obstacle_size_max", spec.obstacle_size_max);
      maybe(wj, "square_obstacles", spec.square_obstacles);
      maybe(wj, "rejection_budget", spec.rejection_budget);
      if (wj.contains("bounds")) {
        const auto& b = wj.at("bounds");
        for (int i = 0; i < spec.bounds.dim; ++i) {
          spec.bounds.min[static_cast<std::size_t>(i)] = b.at("min").at(static_cast<std::size_t>(i)).get<double>();
          spec.bounds.max[static_cast<std::size_t>(i)] = b.at("max").at(static_cast<std::size_t>(i)).get<double>();
        }
      }
      cfg.workspace_overrides[kind] = spec;
    }
  }
  if (j.contains("expert_rrt")) {
    const auto& r = j.at("expert_rrt");
    maybe(r, "max_iters", cfg.expert_rrt.max_iters);
    maybe(r, "eta", cfg.expert_rrt.eta);
    maybe(r, "goal_bias", cfg.expert_rrt.goal_bias);
    maybe(r, "gamma", cfg.expert_rrt.gamma);
    maybe(r, "post_solution_iters", cfg.expert_rrt.post_solution_iters);
  }
  if (j.contains("cae")) {
    const auto& c = j.at("cae");
    parse_train(c, cfg.cae_train);
    maybe(c, "hidden", cfg.cae_arch.hidden);
    maybe(c, "latent_dim", cfg.cae_arch.latent_dim);
    maybe(c, "latent_dim_3d", cfg.latent_dim_3d);
  }
  if (j.contains("pnet")) {
    const auto& p = j.at("pnet");
    parse_train(p, cfg.pnet_train);
    maybe(p, "hidden", cfg.pnet_arch.hidden);
    maybe(p, "dropout_p", cfg.pnet_arch.dropout_p);
  }
  if (j.contains("mpnet")) {
    const auto& m = j.at("mpnet");
    maybe(m, "bidir_iters", cfg.mpnet.bidir_iters);
    maybe(m, "replan_depth", cfg.mpnet.replan_depth);
    maybe(m, "stochastic", cfg.mpnet.stochastic);
    maybe(m, "fallback_full_workspace", cfg.mpnet.fallback_full_workspace);
    maybe(m, "fallback_region_inflation", cfg.mpnet.fallback_region_inflation);
    maybe(m, "hybrid_max_iters", cfg.mpnet.hybrid_rrt.max_iters);
    if (m.contains("mode")) cfg.mpnet.mode = replan_mode_from_string(m.at("mode").get<std::string>());
  }
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    maybe(b, "seeds", cfg.bench.seeds);
    maybe(b, "threads", cfg.bench.threads);
    maybe(b, "problem_cap", cfg.bench.problem_cap);
    maybe(b, "baseline_max_iters", cfg.bench.baseline_max_iters);
  }
  if (j.contains("rigid_body")) {
    maybe(j.at("rigid_body"), "length", cfg.rigid_body_length);
    maybe(j.at("rigid_body"), "width", cfg.rigid_body_width);
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& file) {
  return pipeline_config_from_json(read_file(file));
}

// --- workspace generation ------------------------------------------------------

namespace {

/// Coarse occupancy-grid check that the four (eight in 3D) workspace corners
/// stay mutually reachable with `margin` clearance; keeps generated worlds
/// solvable for non-trivial queries.
bool corners_connected(const Workspace& w, double margin) {
  const int dims = w.dim_w;
  std::array<int, 3> n{1, 1, 1};
  std::array<double, 3> cell{1.0, 1.0, 1.0};
  for (int i = 0; i < dims; ++i) {
    const auto k = static_cast<std::size_t>(i);
    n[k] = std::max(8, static_cast<int>(std::ceil(w.bounds.extent(i))));
    cell[k] = w.bounds.extent(i) / n[k];
  }
  auto center = [&](int ix, int i) {
    const auto k = static_cast<std::size_t>(i);
    return w.bounds.min[k] + (ix + 0.5) * cell[k];
  };
  auto index = [&](const std::array<int, 3>& idx) {
    return (idx[2] * n[1] + idx[1]) * n[0] + idx[0];
  };
  auto blocked = [&](const std::array<int, 3>& idx) {
    for (int i = 0; i < dims; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double c = center(idx[k], i);
      if (c < w.bounds.min[k] + margin || c > w.bounds.max[k] - margin) return true;
    }
    for (const auto& ob : w.obstacles) {
      bool inside = true;
      for (int i = 0; i < dims; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double c = center(idx[k], i);
        if (c < ob.min_corner[k] - margin || c > ob.max_corner[k] + margin) {
          inside = false;
          break;
        }
      }
      if (inside) return true;
    }
    return false;
  };

  // Corner cells pulled inward past the margin.
  std::vector<std::array<int, 3>> corners;
  const int combos = 1 << dims;
  for (int mask = 0; mask < combos; ++mask) {
    std::array<int, 3> idx{0, 0, 0};
    bool ok = true;
    for (int i = 0; i < dims; ++i) {
      const auto k = static_cast<std::size_t>(i);
      int inset = static_cast<int>(std::ceil(margin / cell[k] - 0.5));
      inset = std::clamp(inset, 0, n[k] - 1);
      idx[k] = (mask & (1 << i)) ? n[k] - 1 - inset : inset;
      if (idx[k] < 0 || idx[k] >= n[k]) ok = false;
    }
    if (!ok) return false;
    if (blocked(idx)) return false;
    corners.push_back(idx);
  }

  const int total = n[0] * n[1] * n[2];
  std::vector<char> visited(static_cast<std::size_t>(total), 0);
  std::queue<std::array<int, 3>> frontier;
  frontier.push(corners[0]);
  visited[static_cast<std::size_t>(index(corners[0]))] = 1;
  while (!frontier.empty()) {
    const auto at = frontier.front();
    frontier.pop();
    for (int i = 0; i < dims; ++i) {
      for (int dir = -1; dir <= 1; dir += 2) {
        auto nb = at;
        nb[static_cast<std::size_t>(i)] += dir;
        const auto k = static_cast<std::size_t>(i);
        if (nb[k] < 0 || nb[k] >= n[k]) continue;
        const auto flat = static_cast<std::size_t>(index(nb));
        if (visited[flat] || blocked(nb)) continue;
        visited[flat] = 1;
        frontier.push(nb);
      }
    }
  }
  for (const auto& c : corners)
    if (!visited[static_cast<std::size_t>(index(c))]) return false;
  return true;
}

}  // namespace

std::vector<Workspace> gen_workspaces(const WorkspaceSpec& spec) {
  if (spec.train_count <= 0 || spec.unseen_count < 0)
    throw std::invalid_argument("gen_workspaces: counts must be positive");
  if (spec.obstacle_count_min <= 0 || spec.obstacle_count_max < spec.obstacle_count_min)
    throw std::invalid_argument("gen_workspaces: bad obstacle count range");
  const int dims = workspace_dim(spec.kind);
  for (int i = 0; i < dims; ++i)
    if (spec.obstacle_size_max > spec.bounds.extent(i))
      throw std::invalid_argument("gen_workspaces: obstacle size does not fit in bounds");

  RngStream rng(spec.seed);
  const int total = spec.train_count + spec.unseen_count;
  std::vector<Workspace> out;
  out.reserve(static_cast<std::size_t>(total));

  for (int wsi = 0; wsi < total; ++wsi) {
    RngStream ws_rng = rng.derive(static_cast<std::uint64_t>(wsi));
    bool accepted = false;
    for (int attempt = 0; attempt < spec.rejection_budget && !accepted; ++attempt) {
      RngStream a_rng = ws_rng.derive(static_cast<std::uint64_t>(attempt));
      Workspace w;
      w.kind = spec.kind;
      w.dim_w = dims;
      w.bounds = spec.bounds;
      w.bounds.dim = dims;
      const int count = spec.obstacle_count_min +
                        static_cast<int>(a_rng.uniform_index(
                            static_cast<std::uint64_t>(spec.obstacle_count_max - spec.obstacle_count_min + 1)));
      for (int o = 0; o < count; ++o) {
        Obstacle ob;
        double side = a_rng.uniform(spec.obstacle_size_min, spec.obstacle_size_max);
        for (int i = 0; i < dims; ++i) {
          const auto k = static_cast<std::size_t>(i);
          if (!spec.square_obstacles) side = a_rng.uniform(spec.obstacle_size_min, spec.obstacle_size_max);
          const double c = a_rng.uniform(w.bounds.min[k] + side / 2.0, w.bounds.max[k] - side / 2.0);
          ob.min_corner[k] = c - side / 2.0;
          ob.max_corner[k] = c + side / 2.0;
        }
        w.obstacles.push_back(ob);
      }
      if (!corners_connected(w, spec.connectivity_margin)) continue;
      out.push_back(std::move(w));
      accepted = true;
    }
    if (!accepted)
      throw std::runtime_error(
          "gen_workspaces: rejection budget exhausted for workspace " + std::to_string(wsi) +
          "; free space stays disconnected - use smaller or fewer obstacles");
  }
  return out;
}

// --- expert paths and problems -------------------------------------------------

namespace {

std::optional<Config> sample_free_config(const Workspace& w, const RigidBody* body, RngStream& rng,
                                         int max_draws = 10000) {
  const int d = state_dim(w.kind);
  for (int i = 0; i < max_draws; ++i) {
    Config x = Config::zeros(d);
    for (int j = 0; j < w.dim_w; ++j) {
      const auto k = static_cast<std::size_t>(j);
      x[j] = rng.uniform(w.bounds.min[k], w.bounds.max[k]);
    }
    if (w.kind == WorkspaceKind::rigid2d) x[2] = rng.uniform(-3.14159265358979323846, 3.14159265358979323846);
    if (point_in_free_space(x, w, body)) return x;
  }
  return std::nullopt;
}

struct QuerySample {
  Config start;
  Config goal;
};

std::optional<QuerySample> sample_query(const Workspace& w, const RigidBody* body,
                                        const DatasetConfig& dcfg, RngStream& rng) {
  const double min_sep = dcfg.min_separation_fraction * w.bounds.diagonal();
  for (int i = 0; i < 200; ++i) {
    const auto start = sample_free_config(w, body, rng);
    const auto goal = sample_free_config(w, body, rng);
    if (!start || !goal) return std::nullopt;
    if (spatial_distance(*start, *goal, w.dim_w) < min_sep) continue;
    return QuerySample{*start, *goal};
  }
  return std::nullopt;
}

}  // namespace

std::vector<ExpertPathRecord> gen_expert_paths(const Workspace& w, int count,
                                               const RrtConfig& rrt_cfg, std::uint64_t seed,
                                               const DatasetConfig& dcfg, const RigidBody* body,
                                               int threads) {
  std::vector<ExpertPathRecord> out(static_cast<std::size_t>(count));
  std::vector<std::string> failures(static_cast<std::size_t>(count));

  parallel_for(count, threads, [&](int k) {
    RngStream path_rng = RngStream(seed).derive(static_cast<std::uint64_t>(k));
    for (int attempt = 0; attempt < dcfg.attempt_budget; ++attempt) {
      RngStream a_rng = path_rng.derive(static_cast<std::uint64_t>(attempt));
      const auto query = sample_query(w, body, dcfg, a_rng);
      if (!query) continue;

      RrtConfig rc = rrt_cfg;
      rc.seed = a_rng.derive("rrt").seed();
      const GoalRegion goal{query->goal, dcfg.goal_radius};
      auto planned = rrtstar_plan(w, query->start, goal, rc, body);
      if (!planned) continue;

      Path path = std::move(planned->path);
      // Extend to the exact goal state so the stored demonstration terminates
      // on the state the planning network will later be conditioned on.
      if (!(path.back() == query->goal)) {
        if (!segment_collision_free(path.back(), query->goal, w, kStrictStep, body)) continue;
        path.states.push_back(query->goal);
      }
      const double raw_cost = path_cost(path, w.kind);
      Path stored = lazy_states_contraction(path, w, kStrictStep, body);
      if (!path_feasible(stored, w, kStrictStep, body)) continue;

      ExpertPathRecord rec;
      rec.id = w.id + "-path-" + std::to_string(k);
      rec.start = query->start;
      rec.goal = goal;
      rec.path = std::move(stored);
      rec.cost = path_cost(rec.path, w.kind);
      rec.raw_cost = raw_cost;
      out[static_cast<std::size_t>(k)] = std::move(rec);
      return;
    }
    failures[static_cast<std::size_t>(k)] =
        "no expert path for " + w.id + " slot " + std::to_string(k) + " within the retry budget";
  });

  for (const auto& f : failures)
    if (!f.empty()) throw std::runtime_error("gen_expert_paths: " + f);
  return out;
}

// --- dataset files ---------------------------------------------------------------

namespace {

nlohmann::json goal_json(const GoalRegion& g) {
  return {{"center", config_json(g.center)}, {"radius", g.radius}};
}

GoalRegion goal_from_json(const nlohmann::json& j) {
  return GoalRegion{config_from_json(j.at("center")), j.at("radius").get<double>()};
}

nlohmann::json path_json(const Path& p) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& s : p.states) a.push_back(config_json(s));
  return a;
}

Path path_from_json(const nlohmann::json& j) {
  Path p;
  for (const auto& s : j) p.states.push_back(config_from_json(s));
  return p;
}

std::string expert_paths_to_json(const std::string& workspace_id,
                                 const std::vector<ExpertPathRecord>& records) {
  nlohmann::json j;
  j["workspace_id"] = workspace_id;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records)
    arr.push_back({{"id", r.id},
                   {"start", config_json(r.start)},
                   {"goal", goal_json(r.goal)},
                   {"states", path_json(r.path)},
                   {"cost", r.cost},
                   {"raw_cost", r.raw_cost}});
  j["paths"] = std::move(arr);
  return j.dump();
}

std::string problems_to_json(const std::vector<PlanningProblem>& problems) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : problems)
    arr.push_back({{"id", p.id},
                   {"workspace_id", p.workspace_id},
                   {"start", config_json(p.start)},
                   {"goal", goal_json(p.goal)}});
  return nlohmann::json{{"problems", std::move(arr)}}.dump();
}

}  // namespace

std::vector<PlanningProblem> load_problems(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("problems file " + file.string() + ": " + e.what());
  }
  std::vector<PlanningProblem> out;
  for (const auto& p : j.at("problems"))
    out.push_back(PlanningProblem{p.at("id").get<std::string>(), p.at("workspace_id").get<std::string>(),
                                  config_from_json(p.at("start")), goal_from_json(p.at("goal"))});
  return out;
}

std::vector<ExpertPathRecord> load_expert_paths(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("paths file " + file.string() + ": " + e.what());
  }
  std::vector<ExpertPathRecord> out;
  for (const auto& r : j.at("paths")) {
    ExpertPathRecord rec;
    rec.id = r.at("id").get<std::string>();
    rec.start = config_from_json(r.at("start"));
    rec.goal = goal_from_json(r.at("goal"));
    rec.path = path_from_json(r.at("states"));
    rec.cost = r.at("cost").get<double>();
    rec.raw_cost = r.at("raw_cost").get<double>();
    out.push_back(std::move(rec));
  }
  return out;
}

// --- manifest ---------------------------------------------------------------------

void save_dataset_manifest(const DatasetManifest& m, const std::filesystem::path& kind_dir) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["seed"] = m.seed;
  j["n_pc"] = m.n_pc;
  j["goal_radius"] = m.goal_radius;
  j["settings"] = nlohmann::json::parse(m.settings_json);
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& e : m.workspaces) {
    nlohmann::json je = {{"id", e.id},
                         {"role", e.role},
                         {"workspace_file", e.workspace_file},
                         {"workspace_hash", e.workspace_hash},
                         {"cloud_file", e.cloud_file},
                         {"cloud_hash", e.cloud_hash}};
    if (!e.paths_file.empty()) {
      je["paths_file"] = e.paths_file;
      je["paths_hash"] = e.paths_hash;
      je["path_count"] = e.path_count;
    }
    ws.push_back(std::move(je));
  }
  j["workspaces"] = std::move(ws);
  j["problems"] = {{"seen", {{"file", m.seen_problems.file}, {"hash", m.seen_problems.hash}, {"count", m.seen_problems.count}}},
                   {"unseen", {{"file", m.unseen_problems.file}, {"hash", m.unseen_problems.hash}, {"count", m.unseen_problems.count}}}};
  j["fingerprint"] = m.fingerprint;
  write_file(kind_dir / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest load_dataset_manifest(const std::filesystem::path& kind_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(kind_dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("dataset manifest: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.kind = workspace_kind_from_string(j.at("kind").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_pc = j.at("n_pc").get<int>();
  m.goal_radius = j.at("goal_radius").get<double>();
  m.settings_json = j.at("settings").dump();
  for (const auto& je : j.at("workspaces")) {
    WorkspaceEntry e;
    e.id = je.at("id").get<std::string>();
    e.role = je.at("role").get<std::string>();
    e.workspace_file = je.at("workspace_file").get<std::string>();
    e.workspace_hash = je.at("workspace_hash").get<std::string>();
    e.cloud_file = je.at("cloud_file").get<std::string>();
    e.cloud_hash = je.at("cloud_hash").get<std::string>();
    if (je.contains("paths_file")) {
      e.paths_file = je.at("paths_file").get<std::string>();
      e.paths_hash = je.at("paths_hash").get<std::string>();
      e.path_count = je.at("path_count").get<int>();
    }
    m.workspaces.push_back(std::move(e));
  }
  const auto& probs = j.at("problems");
  m.seen_problems = {probs.at("seen").at("file").get<std::string>(), probs.at("seen").at("hash").get<std::string>(),
                     probs.at("seen").at("count").get<int>()};
  m.unseen_problems = {probs.at("unseen").at("file").get<std::string>(),
                       probs.at("unseen").at("hash").get<std::string>(),
                       probs.at("unseen").at("count").get<int>()};
  m.fingerprint = j.at("fingerprint").get<std::string>();
  return m;
}

void verify_dataset(const std::filesystem::path& kind_dir, const DatasetManifest& m) {
  auto check = [&](const std::string& file, const std::string& expected) {
    const std::string actual = file_hash_hex(kind_dir / file);
    if (actual != expected)
      throw std::runtime_error("dataset corruption: " + file + " hashes to " + actual + ", manifest says " +
                               expected);
  };
  for (const auto& e : m.workspaces) {
    check(e.workspace_file, e.workspace_hash);
    check(e.cloud_file, e.cloud_hash);
    if (!e.paths_file.empty()) check(e.paths_file, e.paths_hash);
  }
  check(m.seen_problems.file, m.seen_problems.hash);
  check(m.unseen_problems.file, m.unseen_problems.hash);
}

namespace {

std::string manifest_fingerprint(const DatasetManifest& m) {
  std::string acc = m.settings_json;
  for (const auto& e : m.workspaces) {
    acc += e.id + e.role + e.workspace_hash + e.cloud_hash + e.paths_hash;
    acc += std::to_string(e.path_count);
  }
  acc += m.seen_problems.hash + m.unseen_problems.hash;
  return hex64(fnv1a64(acc.data(), acc.size()));
}

std::vector<PlanningProblem> sample_problem_set(const Workspace& w, const RigidBody* body,
                                                const DatasetConfig& dcfg, const RrtConfig& certify,
                                                int count, const std::string& id_prefix,
                                                std::uint64_t seed, int threads) {
  std::vector<PlanningProblem> out(static_cast<std::size_t>(count));
  std::vector<std::string> failures(static_cast<std::size_t>(count));
  parallel_for(count, threads, [&](int k) {
    RngStream rng = RngStream(seed).derive(static_cast<std::uint64_t>(k));
    for (int attempt = 0; attempt < dcfg.attempt_budget; ++attempt) {
      RngStream a_rng = rng.derive(static_cast<std::uint64_t>(attempt));
      const auto query = sample_query(w, body, dcfg, a_rng);
      if (!query) continue;
      RrtConfig rc = certify;
      rc.seed = a_rng.derive("certify").seed();
      // Solvability certificate: the query must be provably feasible so the
      // benchmark's completeness statistics measure planners, not luck.
      const GoalRegion goal{query->goal, dcfg.goal_radius};
      if (!rrtstar_plan(w, query->start, goal, rc, body)) continue;
      out[static_cast<std::size_t>(k)] =
          PlanningProblem{id_prefix + std::to_string(k), w.id, query->start, goal};
      return;
    }
    failures[static_cast<std::size_t>(k)] = id_prefix + std::to_string(k);
  });
  for (const auto& f : failures)
    if (!f.empty()) throw std::runtime_error("sample_problem_set: no solvable query for " + f);
  return out;
}

}  // namespace

DatasetManifest generate_dataset(const PipelineConfig& cfg, WorkspaceKind kind,
                                 const std::filesystem::path& out_dir) {
  const WorkspaceSpec spec = cfg.workspace_spec(kind);
  const auto body_opt = cfg.body_for(kind);
  const RigidBody* body = body_opt ? &*body_opt : nullptr;
  const std::filesystem::path kind_dir = out_dir / to_string(kind);
  std::filesystem::create_directories(kind_dir / "workspaces");
  std::filesystem::create_directories(kind_dir / "clouds");
  std::filesystem::create_directories(kind_dir / "paths");
  std::filesystem::create_directories(kind_dir / "problems");

  RngStream master(cfg.master_seed);
  std::vector<Workspace> workspaces = gen_workspaces(spec);

  DatasetManifest manifest;
  manifest.kind = kind;
  manifest.seed = cfg.master_seed;
  manifest.n_pc = cfg.dataset.n_pc;
  manifest.goal_radius = cfg.dataset.goal_radius;
  {
    nlohmann::json settings;
    settings["workspace"] = {{"train_count", spec.train_count},
                             {"unseen_count", spec.unseen_count},
                             {"obstacle_count", {spec.obstacle_count_min, spec.obstacle_count_max}},
                             {"obstacle_size", {spec.obstacle_size_min, spec.obstacle_size_max}},
                             {"square_obstacles", spec.square_obstacles},
                             {"connectivity_margin", spec.connectivity_margin},
                             {"seed", spec.seed}};
    settings["dataset"] = {{"paths_per_workspace", cfg.dataset.paths_per_workspace},
                           {"seen_problems_total", cfg.dataset.seen_problems_total},
                           {"problems_per_unseen", cfg.dataset.problems_per_unseen},
                           {"n_pc", cfg.dataset.n_pc},
                           {"goal_radius", cfg.dataset.goal_radius},
                           {"min_separation_fraction", cfg.dataset.min_separation_fraction}};
    const RrtConfig er = cfg.expert_rrt_for(kind);
    settings["expert_rrt"] = {{"max_iters", er.max_iters},
                              {"eta", er.eta},
                              {"goal_bias", er.goal_bias},
                              {"gamma", er.gamma},
                              {"steer_step", er.steer_step},
                              {"post_solution_iters", er.post_solution_iters}};
    settings["expert_paths_contracted"] = true;  // stored demonstrations are LSC-processed
    manifest.settings_json = settings.dump();
  }

  std::vector<PlanningProblem> seen_problems;
  std::vector<PlanningProblem> unseen_problems;
  const RrtConfig certify = cfg.baseline_rrt_for(kind);

  for (int i = 0; i < static_cast<int>(workspaces.size()); ++i) {
    Workspace& w = workspaces[static_cast<std::size_t>(i)];
    const bool train = i < spec.train_count;
    const int local = train ? i : i - spec.train_count;
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%s-%03d", to_string(kind).c_str(),
                  train ? "train" : "unseen", local);
    w.id = idbuf;

    WorkspaceEntry entry;
    entry.id = w.id;
    entry.role = train ? "train" : "unseen";
    entry.workspace_file = "workspaces/" + w.id + ".json";
    save_workspace(w, kind_dir / entry.workspace_file);
    entry.workspace_hash = file_hash_hex(kind_dir / entry.workspace_file);

    const PointCloud cloud =
        sample_obstacle_cloud(w, cfg.dataset.n_pc, master.derive("cloud").derive(w.id).seed());
    entry.cloud_file = "clouds/" + w.id + ".json";
    save_cloud(cloud, kind_dir / entry.cloud_file);
    entry.cloud_hash = file_hash_hex(kind_dir / entry.cloud_file);

    if (train) {
      const auto records =
          gen_expert_paths(w, cfg.dataset.paths_per_workspace, cfg.expert_rrt_for(kind),
                           master.derive("experts").derive(w.id).seed(), cfg.dataset, body,
                           cfg.bench.threads);
      entry.paths_file = "paths/" + w.id + ".json";
      write_file(kind_dir / entry.paths_file, expert_paths_to_json(w.id, records));
      entry.paths_hash = file_hash_hex(kind_dir / entry.paths_file);
      entry.path_count = static_cast<int>(records.size());

      // Share of the seen-X_obs problem budget, remainder on the first few.
      const int base = cfg.dataset.seen_problems_total / spec.train_count;
      const int extra = local < cfg.dataset.seen_problems_total % spec.train_count ? 1 : 0;
      char prefix[96];
      std::snprintf(prefix, sizeof(prefix), "%s-seen-%03d-", to_string(kind).c_str(), local);
      auto probs = sample_problem_set(w, body, cfg.dataset, certify, base + extra, prefix,
                                      master.derive("seen-problems").derive(w.id).seed(),
                                      cfg.bench.threads);
      seen_problems.insert(seen_problems.end(), probs.begin(), probs.end());
    } else {
      char prefix[96];
      std::snprintf(prefix, sizeof(prefix), "%s-unseen-%03d-", to_string(kind).c_str(), local);
      auto probs = sample_problem_set(w, body, cfg.dataset, certify, cfg.dataset.problems_per_unseen,
                                      prefix, master.derive("unseen-problems").derive(w.id).seed(),
                                      cfg.bench.threads);
      unseen_problems.insert(unseen_problems.end(), probs.begin(), probs.end());
    }
    manifest.workspaces.push_back(std::move(entry));
  }

  write_file(kind_dir / "problems/seen.json", problems_to_json(seen_problems));
  write_file(kind_dir / "problems/unseen.json", problems_to_json(unseen_problems));
  manifest.seen_problems = {"problems/seen.json", file_hash_hex(kind_dir / "problems/seen.json"),
                            static_cast<int>(seen_problems.size())};
  manifest.unseen_problems = {"problems/unseen.json", file_hash_hex(kind_dir / "problems/unseen.json"),
                              static_cast<int>(unseen_problems.size())};
  manifest.fingerprint = manifest_fingerprint(manifest);
  save_dataset_manifest(manifest, kind_dir);
  return manifest;
}

// --- imitation dataset ------------------------------------------------------------

ImitationDataset build_imitation_dataset(const DatasetManifest& m,
                                         const std::filesystem::path& kind_dir) {
  ImitationDataset ds;
  ds.kind = m.kind;
  bool bounds_set = false;

  for (const auto& e : m.workspaces) {
    if (e.role != "train") continue;  // unseen workspaces never enter training
    const Workspace w = load_workspace(kind_dir / e.workspace_file);
    const PointCloud cloud = load_cloud(kind_dir / e.cloud_file);
    if (!bounds_set) {
      ds.state_bounds = state_bounds_for(w);
      bounds_set = true;
    } else {
      const Bounds b = state_bounds_for(w);
      for (int i = 0; i < b.dim; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (b.min[k] != ds.state_bounds.min[k] || b.max[k] != ds.state_bounds.max[k])
          throw std::invalid_argument("build_imitation_dataset: inconsistent workspace bounds");
      }
    }

    const std::vector<double> flat = flatten_cloud(cloud, w.bounds);
    ds.workspace_ids.push_back(e.id);
    ds.flat_clouds.push_back(
        Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size())));
    const int ws_index = static_cast<int>(ds.workspace_ids.size()) - 1;

    for (const auto& rec : load_expert_paths(kind_dir / e.paths_file)) {
      const Eigen::VectorXd goal_n = normalize_config(rec.goal.center, ds.state_bounds);
      for (std::size_t t = 0; t + 1 < rec.path.size(); ++t) {
        ImitationRecord r;
        r.workspace_index = ws_index;
        r.x_t = normalize_config(rec.path.states[t], ds.state_bounds);
        r.x_next = normalize_config(rec.path.states[t + 1], ds.state_bounds);
        r.x_goal = goal_n;
        r.path_id = rec.id;
        r.step_index = static_cast<int>(t);
        ds.records.push_back(std::move(r));
      }
    }
  }
  if (!bounds_set) throw std::invalid_argument("build_imitation_dataset: manifest has no train workspaces");
  return ds;
}

// --- training ----------------------------------------------------------------------

TrainArtifacts train_models(const PipelineConfig& cfg, const DatasetManifest& manifest,
                            const std::filesystem::path& kind_dir,
                            const std::filesystem::path& models_dir) {
  const WorkspaceKind kind = manifest.kind;
  std::vector<Eigen::VectorXd> clouds;
  CloudMeta meta;
  bool meta_set = false;
  for (const auto& e : manifest.workspaces) {
    if (e.role != "train") continue;
    const Workspace w = load_workspace(kind_dir / e.workspace_file);
    const PointCloud cloud = load_cloud(kind_dir / e.cloud_file);
    if (!meta_set) {
      meta = CloudMeta{manifest.n_pc, w.dim_w, w.bounds};
      meta_set = true;
    }
    const std::vector<double> flat = flatten_cloud(cloud, w.bounds);
    clouds.push_back(Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size())));
  }
  if (!meta_set) throw std::invalid_argument("train_models: manifest has no train workspaces");

  TrainConfig cae_cfg = cfg.cae_train;
  cae_cfg.seed = RngStream(cfg.master_seed).derive("train-cae").derive(to_string(kind)).seed();
  auto cae = train_cae(clouds, cfg.cae_architecture(kind), cae_cfg, meta);

  const ImitationDataset ds = build_imitation_dataset(manifest, kind_dir);
  TrainConfig pnet_cfg = cfg.pnet_train;
  pnet_cfg.seed = RngStream(cfg.master_seed).derive("train-pnet").derive(to_string(kind)).seed();
  auto pnet = train_pnet(ds, cae.encoder, cfg.pnet_arch, pnet_cfg);

  TrainArtifacts artifacts;
  artifacts.bundle.encoder = std::move(cae.encoder);
  artifacts.bundle.decoder = std::move(cae.decoder);
  artifacts.bundle.planner = std::move(pnet.planner);
  artifacts.bundle.dataset_fingerprint = manifest.fingerprint;
  artifacts.bundle.seed = cfg.master_seed;
  artifacts.cae_loss_history = std::move(cae.loss_history);
  artifacts.pnet_train_history = std::move(pnet.train_loss_history);
  artifacts.pnet_val_history = std::move(pnet.val_loss_history);

  save_models(artifacts.bundle, models_dir);
  nlohmann::json hist;
  hist["cae_loss"] = artifacts.cae_loss_history;
  hist["pnet_train_loss"] = artifacts.pnet_train_history;
  hist["pnet_val_loss"] = artifacts.pnet_val_history;
  write_file(models_dir / "loss_history.json", hist.dump(2) + "\n");
  return artifacts;
}

}  // namespace mpnet
