#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mpnet/errors.hpp"
#include "mpnet/pipeline.hpp"
#include "mpnet/rng.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

using Clock = std::chrono::steady_clock;

struct LoadedWorkspace {
  Workspace workspace;
  PointCloud cloud;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(PlannerId id) {
  switch (id) {
    case PlannerId::mpnet_nr: return "MPNet-NR";
    case PlannerId::mpnet_hr: return "MPNet-HR";
    case PlannerId::rrtstar: return "RRTstar";
  }
  throw std::invalid_argument("unknown PlannerId");
}

PlannerId planner_id_from_string(const std::string& s) {
  if (s == "MPNet-NR") return PlannerId::mpnet_nr;
  if (s == "MPNet-HR") return PlannerId::mpnet_hr;
  if (s == "RRTstar") return PlannerId::rrtstar;
  throw std::invalid_argument("unknown planner: " + s);
}

BenchReport run_benchmark(const DatasetManifest& manifest, const std::filesystem::path& kind_dir,
                          const ModelBundle& models, const std::vector<PlannerId>& planners,
                          const PipelineConfig& cfg) {
  if (models.dataset_fingerprint != manifest.fingerprint)
    throw std::runtime_error("run_benchmark: model fingerprint " + models.dataset_fingerprint +
                             " does not match dataset fingerprint " + manifest.fingerprint +
                             "; refusing to run");

  const WorkspaceKind kind = manifest.kind;
  const auto body_opt = cfg.body_for(kind);
  const RigidBody* body = body_opt ? &*body_opt : nullptr;

  std::map<std::string, LoadedWorkspace> loaded;
  for (const auto& e : manifest.workspaces)
    loaded.emplace(e.id, LoadedWorkspace{load_workspace(kind_dir / e.workspace_file),
                                         load_cloud(kind_dir / e.cloud_file)});

  struct Job {
    const PlanningProblem* problem;
    std::string test_set;
    PlannerId planner;
    std::uint64_t seed;
  };

  auto seen = load_problems(kind_dir / manifest.seen_problems.file);
  auto unseen = load_problems(kind_dir / manifest.unseen_problems.file);
  if (cfg.bench.problem_cap > 0) {
    if (static_cast<int>(seen.size()) > cfg.bench.problem_cap) seen.resize(static_cast<std::size_t>(cfg.bench.problem_cap));
    if (static_cast<int>(unseen.size()) > cfg.bench.problem_cap) unseen.resize(static_cast<std::size_t>(cfg.bench.problem_cap));
  }

  std::vector<Job> jobs;
  const RngStream bench_rng = RngStream(cfg.master_seed).derive("bench").derive(to_string(kind));
  auto add_jobs = [&](const std::vector<PlanningProblem>& problems, const std::string& set) {
    for (const auto& p : problems) {
      for (int trial = 0; trial < cfg.bench.seeds; ++trial) {
        // One seed per (problem, trial), shared by every planner: matched runs.
        const std::uint64_t seed = bench_rng.derive(p.id).derive(static_cast<std::uint64_t>(trial)).seed();
        for (const PlannerId planner : planners) jobs.push_back(Job{&p, set, planner, seed});
      }
    }
  };
  add_jobs(seen, "seen");
  add_jobs(unseen, "unseen");

  std::vector<BenchRow> rows(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.bench.threads, [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    const LoadedWorkspace& lw = loaded.at(job.problem->workspace_id);
    BenchRow row;
    row.problem_id = job.problem->id;
    row.test_set = job.test_set;
    row.planner = job.planner;
    row.seed = job.seed;
    row.cost = std::numeric_limits<double>::quiet_NaN();

    if (job.planner == PlannerId::rrtstar) {
      RrtConfig rc = cfg.baseline_rrt_for(kind);
      rc.seed = job.seed;
      const auto t0 = Clock::now();
      const auto result = rrtstar_plan(lw.workspace, job.problem->start, job.problem->goal, rc, body);
      row.time_us = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
      row.success = result.has_value();
      if (result) row.cost = result->cost;
    } else {
      MpnetConfig mc = cfg.mpnet_for(kind);
      mc.mode = job.planner == PlannerId::mpnet_nr ? ReplanMode::NR : ReplanMode::HR;
      mc.seed = job.seed;
      RngStream rng(job.seed);
      const PlanResult result = mpnet_plan(lw.workspace, lw.cloud, job.problem->start,
                                           job.problem->goal, models.encoder, models.planner, mc,
                                           rng, body);
      row.time_us = result.plan_time_us;
      row.success = result.succeeded;
      row.counters = result.counters;
      if (result.succeeded) row.cost = path_cost(*result.path, kind);
    }
    rows[static_cast<std::size_t>(i)] = std::move(row);
  });

  std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.test_set, a.problem_id, a.planner, a.seed) <
           std::tie(b.test_set, b.problem_id, b.planner, b.seed);
  });

  BenchReport report;
  report.kind = kind;
  report.dataset_fingerprint = manifest.fingerprint;
  report.rows = std::move(rows);

  for (const std::string set : {"seen", "unseen"}) {
    for (const PlannerId planner : planners) {
      std::vector<double> times;
      std::vector<double> costs;
      int successes = 0;
      for (const auto& row : report.rows) {
        if (row.test_set != set || row.planner != planner) continue;
        times.push_back(static_cast<double>(row.time_us));
        if (row.success) {
          ++successes;
          costs.push_back(row.cost);
        }
      }
      if (times.empty()) continue;
      BenchStats stats;
      stats.runs = static_cast<int>(times.size());
      stats.successes = successes;
      stats.success_rate = static_cast<double>(successes) / static_cast<double>(times.size());
      stats.mean_time_us = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
      double var = 0.0;
      for (double t : times) var += (t - stats.mean_time_us) * (t - stats.mean_time_us);
      stats.std_time_us = std::sqrt(var / static_cast<double>(times.size()));
      stats.median_time_us = median(times);
      stats.mean_cost = costs.empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(costs.size());
      report.stats[set + "/" + to_string(planner)] = stats;
    }
    const auto rrt = report.stats.find(set + "/" + to_string(PlannerId::rrtstar));
    const auto nr = report.stats.find(set + "/" + to_string(PlannerId::mpnet_nr));
    if (rrt != report.stats.end() && nr != report.stats.end() && nr->second.mean_time_us > 0.0)
      report.speedup_vs_rrtstar[set] = rrt->second.mean_time_us / nr->second.mean_time_us;
  }
  return report;
}

void save_bench_report(const BenchReport& report, const std::filesystem::path& json_file,
                       const std::filesystem::path& csv_file) {
  nlohmann::json j;
  j["kind"] = to_string(report.kind);
  j["dataset_fingerprint"] = report.dataset_fingerprint;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row = {{"problem_id", r.problem_id},
                          {"test_set", r.test_set},
                          {"planner", to_string(r.planner)},
                          {"seed", r.seed},
                          {"success", r.success},
                          {"time_us", r.time_us}};
    if (std::isfinite(r.cost))
      row["cost"] = r.cost;
    else
      row["cost"] = nullptr;
    row["counters"] = {{"pnet_calls", r.counters.pnet_calls},
                       {"steer_checks", r.counters.steer_checks},
                       {"replan_calls", r.counters.replan_calls},
                       {"rrt_fallback_calls", r.counters.rrt_fallback_calls},
                       {"failed_pnet_outputs", r.counters.failed_pnet_outputs}};
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  nlohmann::json stats;
  for (const auto& [key, s] : report.stats)
    stats[key] = {{"runs", s.runs},
                  {"successes", s.successes},
                  {"success_rate", s.success_rate},
                  {"mean_time_us", s.mean_time_us},
                  {"std_time_us", s.std_time_us},
                  {"median_time_us", s.median_time_us},
                  {"mean_cost", std::isfinite(s.mean_cost) ? nlohmann::json(s.mean_cost) : nlohmann::json(nullptr)}};
  j["stats"] = std::move(stats);
  j["speedup_vs_rrtstar"] = report.speedup_vs_rrtstar;

  std::ofstream out(json_file);
  if (!out) throw std::runtime_error("cannot write report: " + json_file.string());
  out << j.dump(2) << '\n';

  std::ofstream csv(csv_file);
  if (!csv) throw std::runtime_error("cannot write report: " + csv_file.string());
  csv << "problem_id,planner,success,time_us,cost\n";
  for (const auto& r : report.rows) {
    csv << r.problem_id << ',' << to_string(r.planner) << ',' << (r.success ? 1 : 0) << ','
        << r.time_us << ',';
    if (std::isfinite(r.cost)) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.9g", r.cost);
      csv << buf;
    }
    csv << '\n';
  }
}

BenchReport load_bench_report(const std::filesystem::path& json_file) {
  std::ifstream in(json_file);
  if (!in) throw ParseError("cannot open report: " + json_file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bench report: " + std::string(e.what()));
  }
  BenchReport report;
  report.kind = workspace_kind_from_string(j.at("kind").get<std::string>());
  report.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  for (const auto& row : j.at("rows")) {
    BenchRow r;
    r.problem_id = row.at("problem_id").get<std::string>();
    r.test_set = row.at("test_set").get<std::string>();
    r.planner = planner_id_from_string(row.at("planner").get<std::string>());
    r.seed = row.at("seed").get<std::uint64_t>();
    r.success = row.at("success").get<bool>();
    r.time_us = row.at("time_us").get<std::int64_t>();
    r.cost = row.at("cost").is_null() ? std::numeric_limits<double>::quiet_NaN() : row.at("cost").get<double>();
    const auto& c = row.at("counters");
    r.counters.pnet_calls = c.at("pnet_calls").get<long>();
    r.counters.steer_checks = c.at("steer_checks").get<long>();
    r.counters.replan_calls = c.at("replan_calls").get<long>();
    r.counters.rrt_fallback_calls = c.at("rrt_fallback_calls").get<long>();
    r.counters.failed_pnet_outputs = c.at("failed_pnet_outputs").get<long>();
    report.rows.push_back(std::move(r));
  }
  for (const auto& [key, s] : j.at("stats").items()) {
    BenchStats st;
    st.runs = s.at("runs").get<int>();
    st.successes = s.at("successes").get<int>();
    st.success_rate = s.at("success_rate").get<double>();
    st.mean_time_us = s.at("mean_time_us").get<double>();
    st.std_time_us = s.at("std_time_us").get<double>();
    st.median_time_us = s.at("median_time_us").get<double>();
    st.mean_cost = s.at("mean_cost").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                               : s.at("mean_cost").get<double>();
    report.stats[key] = st;
  }
  if (j.contains("speedup_vs_rrtstar"))
    for (const auto& [key, v] : j.at("speedup_vs_rrtstar").items())
      report.speedup_vs_rrtstar[key] = v.get<double>();
  return report;
}

}  // namespace mpnet
