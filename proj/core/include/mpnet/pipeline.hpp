#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpnet/geometry.hpp"
#include "mpnet/models.hpp"
#include "mpnet/planner.hpp"
#include "mpnet/pointcloud.hpp"
#include "mpnet/rrtstar.hpp"

namespace mpnet {

// --- configuration -----------------------------------------------------------

struct WorkspaceSpec {
  WorkspaceKind kind = WorkspaceKind::simple2d;
  int train_count = 10;
  int unseen_count = 2;
  int obstacle_count_min = 7;
  int obstacle_count_max = 7;
  double obstacle_size_min = 5.0;
  double obstacle_size_max = 5.0;
  bool square_obstacles = true;  // one side length per obstacle vs per dimension
  Bounds bounds;
  std::uint64_t seed = 0;
  /// Clearance used by the generation-time connectivity check (grid path
  /// between the workspace corners must exist with this margin).
  double connectivity_margin = 0.5;
  int rejection_budget = 500;
};

/// Desk-scale defaults: simple2d = 7 squares of side 5 in [-20,20]^2,
/// complex2d = 10 mixed rectangles, complex3d = 10 boxes in [-20,20]^3,
/// rigid2d = simple2d geometry planned with a 3x1 rectangle body.
WorkspaceSpec default_workspace_spec(WorkspaceKind kind);

struct DatasetConfig {
  int paths_per_workspace = 100;
  int seen_problems_total = 100;  // spread across the train workspaces
  int problems_per_unseen = 50;
  int n_pc = 1400;
  double goal_radius = 1.0;
  double min_separation_fraction = 0.25;  // of the workspace diagonal
  int attempt_budget = 40;                // retries per path/problem before giving up
};

struct BenchConfig {
  int seeds = 1;
  int threads = 0;  // 0 = hardware concurrency
  int problem_cap = 0;  // 0 = all problems; otherwise cap per test set
  int baseline_max_iters = 20000;
};

struct PipelineConfig {
  std::uint64_t master_seed = 12345;
  std::vector<WorkspaceKind> kinds = {WorkspaceKind::simple2d, WorkspaceKind::complex2d,
                                      WorkspaceKind::complex3d, WorkspaceKind::rigid2d};
  std::map<WorkspaceKind, WorkspaceSpec> workspace_overrides;
  DatasetConfig dataset;
  RrtConfig expert_rrt{.max_iters = 4000, .goal_bias = 0.05, .post_solution_iters = 800};
  CaeArchitecture cae_arch;  // latent_dim applies to 2D; 3D uses latent_dim_3d
  int latent_dim_3d = 64;
  TrainConfig cae_train{.epochs = 300, .batch_size = 16, .learning_rate = 1e-3, .lambda = 1e-3};
  PnetArchitecture pnet_arch;
  TrainConfig pnet_train{.epochs = 120, .batch_size = 128, .learning_rate = 1e-3};
  MpnetConfig mpnet;
  BenchConfig bench;
  double rigid_body_length = 3.0;
  double rigid_body_width = 1.0;

  WorkspaceSpec workspace_spec(WorkspaceKind kind) const;
  CaeArchitecture cae_architecture(WorkspaceKind kind) const;
  RrtConfig expert_rrt_for(WorkspaceKind kind) const;
  RrtConfig baseline_rrt_for(WorkspaceKind kind) const;
  MpnetConfig mpnet_for(WorkspaceKind kind) const;
  std::optional<RigidBody> body_for(WorkspaceKind kind) const;
};

/// Reads overrides from a JSON config file; missing keys keep their defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& file);
PipelineConfig pipeline_config_from_json(const std::string& text);

// --- dataset -----------------------------------------------------------------

struct PlanningProblem {
  std::string id;
  std::string workspace_id;
  Config start;
  GoalRegion goal;
};

struct ExpertPathRecord {
  std::string id;
  Config start;
  GoalRegion goal;
  Path path;
  double cost = 0.0;
  double raw_cost = 0.0;  // before contraction
};

struct WorkspaceEntry {
  std::string id;
  std::string role;  // "train" or "unseen"
  std::string workspace_file;
  std::string workspace_hash;
  std::string cloud_file;
  std::string cloud_hash;
  std::string paths_file;  // empty for unseen workspaces
  std::string paths_hash;
  int path_count = 0;
};

struct ProblemSetEntry {
  std::string file;
  std::string hash;
  int count = 0;
};

struct DatasetManifest {
  WorkspaceKind kind = WorkspaceKind::simple2d;
  std::uint64_t seed = 0;
  int n_pc = 0;
  double goal_radius = 0.0;
  std::string settings_json;  // generator settings, verbatim
  std::vector<WorkspaceEntry> workspaces;
  ProblemSetEntry seen_problems;
  ProblemSetEntry unseen_problems;
  std::string fingerprint;
};

/// Samples workspaces from the spec, rejection-sampling until a margin grid
/// path connects all workspace corners. Throws std::runtime_error with
/// advice when the rejection budget is exhausted.
std::vector<Workspace> gen_workspaces(const WorkspaceSpec& spec);

/// Samples solvable (start, goal) pairs and plans near-optimal expert paths
/// with the classical planner; every stored path is contracted and validated
/// at the strict step. Throws after the retry budget.
std::vector<ExpertPathRecord> gen_expert_paths(const Workspace& w, int count,
                                               const RrtConfig& rrt_cfg, std::uint64_t seed,
                                               const DatasetConfig& dcfg,
                                               const RigidBody* body = nullptr, int threads = 0);

/// Full dataset for one kind under out_dir/<kind>/: workspaces, clouds,
/// expert paths, seen/unseen problem sets, manifest with content hashes.
DatasetManifest generate_dataset(const PipelineConfig& cfg, WorkspaceKind kind,
                                 const std::filesystem::path& out_dir);

DatasetManifest load_dataset_manifest(const std::filesystem::path& kind_dir);
void save_dataset_manifest(const DatasetManifest& m, const std::filesystem::path& kind_dir);
/// Re-hashes every referenced file; throws std::runtime_error on mismatch.
void verify_dataset(const std::filesystem::path& kind_dir, const DatasetManifest& m);

std::vector<PlanningProblem> load_problems(const std::filesystem::path& file);
std::vector<ExpertPathRecord> load_expert_paths(const std::filesystem::path& file);

/// Assembles normalized imitation records from the train workspaces listed
/// in the manifest.
ImitationDataset build_imitation_dataset(const DatasetManifest& m,
                                         const std::filesystem::path& kind_dir);

// --- training ----------------------------------------------------------------

struct TrainArtifacts {
  ModelBundle bundle;
  std::vector<double> cae_loss_history;
  std::vector<double> pnet_train_history;
  std::vector<double> pnet_val_history;
};

/// CAE pretraining on the train-workspace clouds, then frozen-encoder
/// imitation training of the planning network. Writes weights, the model
/// manifest, and loss histories under models_dir.
TrainArtifacts train_models(const PipelineConfig& cfg, const DatasetManifest& manifest,
                            const std::filesystem::path& kind_dir,
                            const std::filesystem::path& models_dir);

// --- benchmarking ------------------------------------------------------------

enum class PlannerId { mpnet_nr, mpnet_hr, rrtstar };

std::string to_string(PlannerId id);
PlannerId planner_id_from_string(const std::string& s);

struct BenchRow {
  std::string problem_id;
  std::string test_set;  // "seen" or "unseen"
  PlannerId planner = PlannerId::mpnet_nr;
  std::uint64_t seed = 0;
  bool success = false;
  std::int64_t time_us = 0;
  double cost = 0.0;  // NaN when failed
  PlanCounters counters;
};

struct BenchStats {
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_time_us = 0.0;
  double std_time_us = 0.0;
  double median_time_us = 0.0;
  double mean_cost = 0.0;  // over successes
};

struct BenchReport {
  WorkspaceKind kind = WorkspaceKind::simple2d;
  std::string dataset_fingerprint;
  std::vector<BenchRow> rows;
  // keyed by "<set>/<planner>", e.g. "seen/MPNet-NR"
  std::map<std::string, BenchStats> stats;
  // mean-time ratio RRT* / MPNet-NR per test set (Table-style speedup)
  std::map<std::string, double> speedup_vs_rrtstar;
};

/// Runs every requested planner on identical problem lists with matched
/// derived seeds. Refuses to run when the model bundle's dataset fingerprint
/// does not match the manifest.
BenchReport run_benchmark(const DatasetManifest& manifest, const std::filesystem::path& kind_dir,
                          const ModelBundle& models, const std::vector<PlannerId>& planners,
                          const PipelineConfig& cfg);

void save_bench_report(const BenchReport& report, const std::filesystem::path& json_file,
                       const std::filesystem::path& csv_file);
BenchReport load_bench_report(const std::filesystem::path& json_file);

// --- misc --------------------------------------------------------------------

/// FNV-1a content hash of a file, hex-encoded.
std::string file_hash_hex(const std::filesystem::path& file);

/// Runs fn(0..n-1) on a small thread pool; results must be written to
/// per-index slots so the outcome is independent of scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace mpnet
