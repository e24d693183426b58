#include "mpnet/geometry.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mpnet/rng.hpp"
#include "support/oracles.hpp"

using namespace mpnet;

namespace {

Workspace box_world(std::vector<Obstacle> obstacles, WorkspaceKind kind = WorkspaceKind::simple2d) {
  Workspace w;
  w.kind = kind;
  w.dim_w = workspace_dim(kind);
  w.bounds.dim = w.dim_w;
  for (int i = 0; i < w.dim_w; ++i) {
    w.bounds.min[static_cast<std::size_t>(i)] = -20.0;
    w.bounds.max[static_cast<std::size_t>(i)] = 20.0;
  }
  w.obstacles = std::move(obstacles);
  return w;
}

Obstacle square(double cx, double cy, double side) {
  Obstacle ob;
  ob.min_corner = {cx - side / 2.0, cy - side / 2.0, 0.0};
  ob.max_corner = {cx + side / 2.0, cy + side / 2.0, 0.0};
  return ob;
}

Workspace random_world(WorkspaceKind kind, RngStream& rng, int obstacle_count = 6) {
  std::vector<Obstacle> obs;
  const int dims = workspace_dim(kind);
  for (int i = 0; i < obstacle_count; ++i) {
    Obstacle ob;
    for (int k = 0; k < dims; ++k) {
      const double side = rng.uniform(2.0, 7.0);
      const double c = rng.uniform(-20.0 + side / 2.0, 20.0 - side / 2.0);
      ob.min_corner[static_cast<std::size_t>(k)] = c - side / 2.0;
      ob.max_corner[static_cast<std::size_t>(k)] = c + side / 2.0;
    }
    obs.push_back(ob);
  }
  return box_world(std::move(obs), kind);
}

Config random_state(WorkspaceKind kind, RngStream& rng) {
  const int d = state_dim(kind);
  Config x = Config::zeros(d);
  const int dims = workspace_dim(kind);
  for (int i = 0; i < dims; ++i) x[i] = rng.uniform(-20.0, 20.0);
  if (kind == WorkspaceKind::rigid2d) x[2] = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return x;
}

}  // namespace

TEST_CASE("point_in_free_space: obstacle interior and bounds") {
  const Workspace w = box_world({square(0.0, 0.0, 5.0)});
  CHECK_FALSE(point_in_free_space(Config(0.0, 0.0), w));   // obstacle centroid
  CHECK_FALSE(point_in_free_space(Config(25.0, 0.0), w));  // outside bounds
  CHECK_FALSE(point_in_free_space(Config(2.5, 0.0), w));   // closed boundary counts
  CHECK_FALSE(point_in_free_space(Config(20.0, 0.0), w));  // bounds are closed complement
  CHECK(point_in_free_space(Config(10.0, 10.0), w));
}

TEST_CASE("point_in_free_space: dimension contract") {
  const Workspace w = box_world({square(0.0, 0.0, 5.0)});
  CHECK_THROWS_AS(point_in_free_space(Config(0.0, 0.0, 0.0), w), std::invalid_argument);
  const RigidBody body = RigidBody::rectangle(3.0, 1.0);
  CHECK_THROWS_AS(point_in_free_space(Config(0.0, 0.0), w, &body), std::invalid_argument);
  const Workspace wr = box_world({square(0.0, 0.0, 5.0)}, WorkspaceKind::rigid2d);
  CHECK_THROWS_AS(point_in_free_space(Config(0.0, 0.0, 0.0), wr), std::invalid_argument);
}

TEST_CASE("rigid2d pose straddling an obstacle edge matches the SAT oracle") {
  const Workspace w = box_world({Obstacle{{0.0, 0.0, 0.0}, {2.0, 2.0, 0.0}}}, WorkspaceKind::rigid2d);
  const RigidBody body = RigidBody::rectangle(3.0, 1.0);

  // Polygon sticks 0.1 into the box side at theta = 0.
  const Config straddle(-1.4, 1.0, 0.0);
  CHECK_FALSE(point_in_free_space(straddle, w, &body));
  const std::vector<std::array<double, 2>> poly = {
      {straddle[0] + 1.5, straddle[1] - 0.5},
      {straddle[0] + 1.5, straddle[1] + 0.5},
      {straddle[0] - 1.5, straddle[1] + 0.5},
      {straddle[0] - 1.5, straddle[1] - 0.5}};
  CHECK(testing::sat_polygon_box_overlap(poly, {0.0, 0.0}, {2.0, 2.0}));

  const Config clear(-3.0, 1.0, 0.0);
  CHECK(point_in_free_space(clear, w, &body));
}

TEST_CASE("rigid2d collision agrees with the SAT oracle on random poses") {
  RngStream rng(101);
  const Workspace w = random_world(WorkspaceKind::rigid2d, rng);
  const RigidBody body = RigidBody::rectangle(3.0, 1.0);
  int collisions = 0;
  for (int i = 0; i < 2000; ++i) {
    const Config pose = random_state(WorkspaceKind::rigid2d, rng);
    const double c = std::cos(pose[2]), s = std::sin(pose[2]);
    std::vector<std::array<double, 2>> poly;
    for (const auto& v : body.vertices)
      poly.push_back({pose[0] + c * v[0] - s * v[1], pose[1] + s * v[0] + c * v[1]});
    bool oracle_hit = false;
    for (const auto& ob : w.obstacles)
      if (testing::sat_polygon_box_overlap(poly, {ob.min_corner[0], ob.min_corner[1]},
                                           {ob.max_corner[0], ob.max_corner[1]})) {
        oracle_hit = true;
        break;
      }
    bool oracle_out = false;
    for (const auto& v : poly)
      if (v[0] <= -20.0 || v[0] >= 20.0 || v[1] <= -20.0 || v[1] >= 20.0) oracle_out = true;
    const bool expected_free = !oracle_hit && !oracle_out;
    CHECK_EQ(point_in_free_space(pose, w, &body), expected_free);
    if (!expected_free) ++collisions;
  }
  CHECK_GT(collisions, 100);  // the sample actually exercised both verdicts
}

TEST_CASE("segment_collision_free: basics") {
  const Workspace empty = box_world({});
  const Config a(-10.0, -10.0), b(10.0, 10.0);
  CHECK(segment_collision_free(a, b, empty, kPlanStep));
  CHECK(segment_collision_free(a, a, empty, kPlanStep));  // zero-length

  const Workspace w = box_world({Obstacle{{-0.5, -0.5, 0.0}, {0.5, 0.5, 0.0}}});
  CHECK_FALSE(segment_collision_free(Config(-1.0, 0.0), Config(1.0, 0.0), w, 0.05));
  CHECK_FALSE(testing::dense_segment_free(Config(-1.0, 0.0), Config(1.0, 0.0), w, 0.005));
  CHECK_THROWS_AS(segment_collision_free(a, b, w, 0.0), std::invalid_argument);
}

TEST_CASE("segment_collision_free: symmetry and halving refinement") {
  RngStream rng(7);
  for (const WorkspaceKind kind : {WorkspaceKind::simple2d, WorkspaceKind::complex3d, WorkspaceKind::rigid2d}) {
    const RigidBody body = RigidBody::rectangle(3.0, 1.0);
    const RigidBody* bp = kind == WorkspaceKind::rigid2d ? &body : nullptr;
    Workspace w = random_world(kind, rng);
    for (int i = 0; i < 300; ++i) {
      const Config a = random_state(kind, rng);
      const Config b = random_state(kind, rng);
      const bool fwd = segment_collision_free(a, b, w, kPlanStep, bp);
      CHECK_EQ(fwd, segment_collision_free(b, a, w, kPlanStep, bp));
      if (!fwd) {
        CHECK_FALSE(segment_collision_free(a, b, w, kPlanStep / 2.0, bp));
        CHECK_FALSE(segment_collision_free(a, b, w, kPlanStep / 4.0, bp));
      }
    }
  }
}

TEST_CASE("segment_collision_free: oracle agreement with clearance exemption") {
  RngStream rng(11);
  for (const WorkspaceKind kind :
       {WorkspaceKind::simple2d, WorkspaceKind::complex2d, WorkspaceKind::complex3d, WorkspaceKind::rigid2d}) {
    const RigidBody body = RigidBody::rectangle(3.0, 1.0);
    const RigidBody* bp = kind == WorkspaceKind::rigid2d ? &body : nullptr;
    Workspace w = random_world(kind, rng);
    int disagreements = 0;
    for (int i = 0; i < 1000; ++i) {
      const Config a = random_state(kind, rng);
      const Config b = random_state(kind, rng);
      const bool coarse = segment_collision_free(a, b, w, kPlanStep, bp);
      const bool fine = segment_collision_free(a, b, w, kPlanStep / 10.0, bp);
      if (coarse == fine) continue;
      ++disagreements;
      // Coarse-misses are only excusable on grazing segments.
      CHECK(coarse);
      if (kind != WorkspaceKind::rigid2d)
        CHECK_LT(testing::segment_clearance(a, b, w, kPlanStep / 20.0), kPlanStep);
    }
    CHECK_LT(disagreements, 20);  // < 2% of 1000
  }
}

TEST_CASE("path_feasible: composition and contracts") {
  const Workspace w = box_world({Obstacle{{-0.5, -0.5, 0.0}, {0.5, 0.5, 0.0}}});
  CHECK(path_feasible(Path{{Config(5.0, 5.0)}}, w, kPlanStep));
  CHECK_FALSE(path_feasible(Path{{Config(-1.0, 0.0), Config(1.0, 0.0)}}, w, kPlanStep));
  CHECK_THROWS_AS(path_feasible(Path{}, w, kPlanStep), std::invalid_argument);

  // Concatenating feasible sub-paths that share an endpoint stays feasible.
  const Path p1{{Config(-5.0, -5.0), Config(-5.0, 5.0)}};
  const Path p2{{Config(-5.0, 5.0), Config(5.0, 5.0)}};
  CHECK(path_feasible(p1, w, kPlanStep));
  CHECK(path_feasible(p2, w, kPlanStep));
  Path joined = p1;
  joined.states.insert(joined.states.end(), p2.states.begin() + 1, p2.states.end());
  CHECK(path_feasible(joined, w, kPlanStep));
}

TEST_CASE("config metric and interpolation wrap the rigid2d angle") {
  const double pi = std::numbers::pi;
  const Config a(0.0, 0.0, pi - 0.1);
  const Config b(0.0, 0.0, -pi + 0.1);
  CHECK_EQ(config_distance(a, b, WorkspaceKind::rigid2d), doctest::Approx(0.2));
  const Config mid = interpolate(a, b, 0.5, WorkspaceKind::rigid2d);
  CHECK(std::abs(wrap_angle(mid[2] - pi)) < 1e-12);

  // Plain points are Euclidean.
  CHECK_EQ(config_distance(Config(0.0, 0.0), Config(3.0, 4.0), WorkspaceKind::simple2d), doctest::Approx(5.0));
}

TEST_CASE("point_in_free_space is deterministic") {
  RngStream rng(13);
  const Workspace w = random_world(WorkspaceKind::simple2d, rng);
  for (int i = 0; i < 100; ++i) {
    const Config x = random_state(WorkspaceKind::simple2d, rng);
    CHECK_EQ(point_in_free_space(x, w), point_in_free_space(x, w));
  }
}

TEST_CASE("workspace json round trip and validation") {
  RngStream rng(17);
  Workspace w = random_world(WorkspaceKind::complex3d, rng);
  w.id = "roundtrip";
  const std::string text = workspace_to_json(w);
  const Workspace back = workspace_from_json(text);
  CHECK_EQ(back.kind, w.kind);
  CHECK_EQ(back.id, w.id);
  REQUIRE_EQ(back.obstacles.size(), w.obstacles.size());
  for (std::size_t i = 0; i < w.obstacles.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      CHECK_EQ(back.obstacles[i].min_corner[static_cast<std::size_t>(k)],
               w.obstacles[i].min_corner[static_cast<std::size_t>(k)]);
      CHECK_EQ(back.obstacles[i].max_corner[static_cast<std::size_t>(k)],
               w.obstacles[i].max_corner[static_cast<std::size_t>(k)]);
    }

  Workspace bad = w;
  bad.obstacles.front().max_corner[0] = 50.0;  // outside bounds
  CHECK_THROWS_AS(workspace_from_json(workspace_to_json(bad)), std::invalid_argument);
}

TEST_CASE("rigid body validation rejects non-convex and clockwise polygons") {
  CHECK_NOTHROW(validate_rigid_body(RigidBody::rectangle(3.0, 1.0)));
  RigidBody clockwise{{{1.0, -1.0}, {-1.0, -1.0}, {-1.0, 1.0}, {1.0, 1.0}}};
  CHECK_THROWS_AS(validate_rigid_body(clockwise), std::invalid_argument);
  RigidBody tiny{{{0.0, 0.0}, {1.0, 0.0}}};
  CHECK_THROWS_AS(validate_rigid_body(tiny), std::invalid_argument);
}
