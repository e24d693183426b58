// Command-line front end: dataset generation, training, planning, benchmarks
// and SVG rendering on top of the core library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpnet/pipeline.hpp"
#include "mpnet/svg.hpp"

namespace fs = std::filesystem;
using namespace mpnet;

namespace {

PipelineConfig make_config(const std::string& config_file, std::uint64_t seed) {
  PipelineConfig cfg;
  if (!config_file.empty()) cfg = load_pipeline_config(config_file);
  cfg.master_seed = seed;
  return cfg;
}

std::vector<WorkspaceKind> parse_kinds(const std::vector<std::string>& names,
                                       const PipelineConfig& cfg) {
  if (names.empty()) return cfg.kinds;
  std::vector<WorkspaceKind> kinds;
  for (const auto& n : names) kinds.push_back(workspace_kind_from_string(n));
  return kinds;
}

Config parse_config_csv(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  if (vals.empty() || vals.size() > 3) throw CLI::ValidationError("state must have 1-3 coordinates");
  Config c = Config::zeros(static_cast<int>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) c[static_cast<int>(i)] = vals[i];
  return c;
}

Path path_from_result_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  nlohmann::json j;
  in >> j;
  Path p;
  if (j.contains("path") && !j.at("path").is_null()) {
    for (const auto& row : j.at("path")) {
      Config c = Config::zeros(static_cast<int>(row.size()));
      for (int i = 0; i < c.dim(); ++i) c[i] = row[static_cast<std::size_t>(i)].get<double>();
      p.states.push_back(c);
    }
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural motion planner: data generation, training, planning and benchmarks"};
  app.require_subcommand(1);

  std::uint64_t seed = 12345;
  std::string config_file;
  std::string out_dir = "mpnet_out";
  app.add_option("--seed", seed, "Master seed for the whole pipeline")->capture_default_str();
  app.add_option("--config", config_file, "JSON config file overriding the desk-scale defaults");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();

  // gen-data ------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "Generate workspaces, clouds, expert paths and problems");
  std::vector<std::string> gen_kinds;
  gen->add_option("--kinds", gen_kinds, "Subset of kinds (default: all)");

  // train-cae -----------------------------------------------------------------
  auto* tcae = app.add_subcommand("train-cae", "Train the obstacle-cloud encoder/decoder");
  std::string tcae_kind = "simple2d";
  int tcae_epochs = -1;
  tcae->add_option("--kind", tcae_kind, "Workspace kind")->capture_default_str();
  tcae->add_option("--epochs", tcae_epochs, "Override training epochs");

  // train-pnet ----------------------------------------------------------------
  auto* tpnet = app.add_subcommand("train-pnet", "Train the planning network (runs CAE first if needed)");
  std::string tpnet_kind = "simple2d";
  int tpnet_epochs = -1;
  tpnet->add_option("--kind", tpnet_kind, "Workspace kind")->capture_default_str();
  tpnet->add_option("--epochs", tpnet_epochs, "Override training epochs");

  // plan ----------------------------------------------------------------------
  auto* plan = app.add_subcommand("plan", "Answer one planning query with the trained models");
  std::string plan_workspace, plan_cloud, plan_models, plan_start, plan_goal, plan_mode = "HR";
  std::string plan_out = "plan_result.json", plan_svg;
  double plan_goal_radius = 1.0;
  bool plan_deterministic = false;
  plan->add_option("--workspace", plan_workspace, "Workspace JSON file")->required();
  plan->add_option("--cloud", plan_cloud, "Point-cloud JSON file")->required();
  plan->add_option("--models", plan_models, "Model directory")->required();
  plan->add_option("--start", plan_start, "Start state, comma separated")->required();
  plan->add_option("--goal", plan_goal, "Goal state, comma separated")->required();
  plan->add_option("--goal-radius", plan_goal_radius, "Goal region radius")->capture_default_str();
  plan->add_option("--mode", plan_mode, "Replanning mode: NR or HR")->capture_default_str();
  plan->add_option("--out-file", plan_out, "Result JSON file")->capture_default_str();
  plan->add_option("--svg", plan_svg, "Optional SVG rendering of the result");
  plan->add_flag("--deterministic", plan_deterministic, "Disable dropout during planning");

  // bench ---------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Run the planner comparison on the generated problem sets");
  std::vector<std::string> bench_kinds;
  std::vector<std::string> bench_planners = {"MPNet-NR", "MPNet-HR", "RRTstar"};
  int bench_seeds = -1, bench_cap = -1;
  bench->add_option("--kinds", bench_kinds, "Subset of kinds (default: all)");
  bench->add_option("--planners", bench_planners, "Planners to run")->capture_default_str();
  bench->add_option("--trials", bench_seeds, "Seeded trials per problem");
  bench->add_option("--problem-cap", bench_cap, "Cap problems per test set");

  // render --------------------------------------------------------------------
  auto* render = app.add_subcommand("render", "Render a workspace and planned paths to SVG");
  std::string render_workspace, render_out = "scene.svg";
  std::vector<std::string> render_results;
  std::vector<std::string> render_colors;
  render->add_option("--workspace", render_workspace, "Workspace JSON file")->required();
  render->add_option("--result", render_results, "Plan result JSON files");
  render->add_option("--colors", render_colors, "Colors matching --result entries");
  render->add_option("--out-file", render_out, "Output SVG file")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig base_cfg = make_config(config_file, seed);

    if (*gen) {
      for (const WorkspaceKind kind : parse_kinds(gen_kinds, base_cfg)) {
        std::printf("generating %s dataset...\n", to_string(kind).c_str());
        const DatasetManifest m = generate_dataset(base_cfg, kind, out_dir);
        std::printf("  %zu workspaces, %d seen + %d unseen problems, fingerprint %s\n",
                    m.workspaces.size(), m.seen_problems.count, m.unseen_problems.count,
                    m.fingerprint.c_str());
      }
      return 0;
    }

    if (*tcae || *tpnet) {
      PipelineConfig cfg = base_cfg;
      const std::string kind_name = *tcae ? tcae_kind : tpnet_kind;
      if (*tcae && tcae_epochs >= 0) cfg.cae_train.epochs = tcae_epochs;
      if (*tpnet && tpnet_epochs >= 0) cfg.pnet_train.epochs = tpnet_epochs;
      const WorkspaceKind kind = workspace_kind_from_string(kind_name);
      const fs::path kind_dir = fs::path(out_dir) / to_string(kind);
      const DatasetManifest manifest = load_dataset_manifest(kind_dir);
      verify_dataset(kind_dir, manifest);
      const auto artifacts = train_models(cfg, manifest, kind_dir, kind_dir / "models");
      std::printf("cae loss: %.6g -> %.6g over %zu epochs\n", artifacts.cae_loss_history.front(),
                  artifacts.cae_loss_history.back(), artifacts.cae_loss_history.size() - 1);
      std::printf("pnet loss: %.6g -> %.6g over %zu epochs\n", artifacts.pnet_train_history.front(),
                  artifacts.pnet_train_history.back(), artifacts.pnet_train_history.size() - 1);
      std::printf("models written to %s\n", (kind_dir / "models").string().c_str());
      return 0;
    }

    if (*plan) {
      const Workspace w = load_workspace(plan_workspace);
      const PointCloud cloud = load_cloud(plan_cloud);
      const ModelBundle models = load_models(plan_models);
      MpnetConfig mc = base_cfg.mpnet_for(w.kind);
      mc.mode = replan_mode_from_string(plan_mode);
      mc.stochastic = !plan_deterministic;
      mc.seed = seed;
      const auto body_opt = base_cfg.body_for(w.kind);
      const RigidBody* body = body_opt ? &*body_opt : nullptr;
      RngStream rng(seed);
      const Config start = parse_config_csv(plan_start);
      const GoalRegion goal{parse_config_csv(plan_goal), plan_goal_radius};
      const PlanResult result = mpnet_plan(w, cloud, start, goal, models.encoder, models.planner, mc, rng, body);
      std::ofstream out(plan_out);
      out << plan_result_to_json(result) << '\n';
      std::printf("%s in %lld us (pnet calls %ld, fallback %s); result written to %s\n",
                  result.succeeded ? "solved" : "failed",
                  static_cast<long long>(result.plan_time_us), result.counters.pnet_calls,
                  result.counters.fallback_used() ? "yes" : "no", plan_out.c_str());
      if (!plan_svg.empty() && result.path) {
        render_svg(w, {{*result.path, "red"}}, plan_svg, &goal);
        std::printf("svg written to %s\n", plan_svg.c_str());
      }
      return result.succeeded ? 0 : 2;
    }

    if (*bench) {
      PipelineConfig cfg = base_cfg;
      if (bench_seeds > 0) cfg.bench.seeds = bench_seeds;
      if (bench_cap >= 0) cfg.bench.problem_cap = bench_cap;
      std::vector<PlannerId> planners;
      for (const auto& p : bench_planners) planners.push_back(planner_id_from_string(p));
      for (const WorkspaceKind kind : parse_kinds(bench_kinds, cfg)) {
        const fs::path kind_dir = fs::path(out_dir) / to_string(kind);
        const DatasetManifest manifest = load_dataset_manifest(kind_dir);
        verify_dataset(kind_dir, manifest);
        const ModelBundle models = load_models(kind_dir / "models");
        std::printf("benchmarking %s (%d seen + %d unseen problems, %d trial(s))...\n",
                    to_string(kind).c_str(), manifest.seen_problems.count,
                    manifest.unseen_problems.count, cfg.bench.seeds);
        const BenchReport report = run_benchmark(manifest, kind_dir, models, planners, cfg);
        fs::create_directories(kind_dir / "reports");
        save_bench_report(report, kind_dir / "reports/report.json", kind_dir / "reports/report.csv");
        for (const auto& [key, s] : report.stats)
          std::printf("  %-18s success %5.1f%%  time %8.1f +- %.1f ms (median %.1f)\n", key.c_str(),
                      100.0 * s.success_rate, s.mean_time_us / 1000.0, s.std_time_us / 1000.0,
                      s.median_time_us / 1000.0);
        for (const auto& [set, ratio] : report.speedup_vs_rrtstar)
          std::printf("  %s: RRT*/NR mean-time ratio %.1fx\n", set.c_str(), ratio);
      }
      return 0;
    }

    if (*render) {
      const Workspace w = load_workspace(render_workspace);
      static const std::vector<std::string> default_colors = {"red", "blue", "green", "orange", "purple"};
      std::vector<std::pair<Path, std::string>> paths;
      for (std::size_t i = 0; i < render_results.size(); ++i) {
        const std::string color = i < render_colors.size() ? render_colors[i]
                                                           : default_colors[i % default_colors.size()];
        paths.emplace_back(path_from_result_json(render_results[i]), color);
      }
      render_svg(w, paths, render_out);
      std::printf("svg written to %s\n", render_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
