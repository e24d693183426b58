#include "mpnet/pointcloud.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mpnet/rng.hpp"

using namespace mpnet;

namespace {

Workspace two_squares() {
  Workspace w;
  w.kind = WorkspaceKind::simple2d;
  w.dim_w = 2;
  w.bounds.dim = 2;
  w.bounds.min = {-20.0, -20.0, 0.0};
  w.bounds.max = {20.0, 20.0, 0.0};
  w.obstacles.push_back(Obstacle{{-10.0, -10.0, 0.0}, {-5.0, -5.0, 0.0}});
  w.obstacles.push_back(Obstacle{{5.0, 5.0, 0.0}, {10.0, 10.0, 0.0}});
  w.id = "two-squares";
  return w;
}

// Distance from a point to the surface (face set) of a box.
double surface_distance(const std::array<double, 3>& p, const Obstacle& ob, int dims) {
  double best = 1e300;
  for (int axis = 0; axis < dims; ++axis) {
    for (const double value : {ob.min_corner[static_cast<std::size_t>(axis)],
                               ob.max_corner[static_cast<std::size_t>(axis)]}) {
      double s = (p[static_cast<std::size_t>(axis)] - value) * (p[static_cast<std::size_t>(axis)] - value);
      for (int i = 0; i < dims; ++i) {
        if (i == axis) continue;
        const auto k = static_cast<std::size_t>(i);
        const double below = ob.min_corner[k] - p[k];
        const double above = p[k] - ob.max_corner[k];
        const double d = std::max({0.0, below, above});
        s += d * d;
      }
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("sample_obstacle_cloud: determinism and on-surface membership") {
  const Workspace w = two_squares();
  const PointCloud c1 = sample_obstacle_cloud(w, 500, 42);
  const PointCloud c2 = sample_obstacle_cloud(w, 500, 42);
  REQUIRE_EQ(c1.size(), 500);
  CHECK_EQ(c1.source_workspace_id, "two-squares");
  for (int i = 0; i < c1.size(); ++i)
    for (int k = 0; k < 2; ++k)
      CHECK_EQ(c1.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
               c2.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);

  for (const auto& p : c1.points) {
    const double d = std::min(surface_distance(p, w.obstacles[0], 2), surface_distance(p, w.obstacles[1], 2));
    CHECK_LT(d, 1e-9);
  }
}

TEST_CASE("sample_obstacle_cloud: equal-area obstacles split points binomially") {
  const Workspace w = two_squares();  // identical 5x5 squares
  const PointCloud cloud = sample_obstacle_cloud(w, 2000, 7);
  int first = 0;
  for (const auto& p : cloud.points)
    if (p[0] <= -5.0) ++first;
  // Binomial(2000, 1/2): sigma = sqrt(2000*0.25) ~ 22.36; 3 sigma ~ 67.
  CHECK_GT(first, 1000 - 67);
  CHECK_LT(first, 1000 + 67);
}

TEST_CASE("sample_obstacle_cloud: contract violations") {
  Workspace w = two_squares();
  CHECK_THROWS_AS(sample_obstacle_cloud(w, 0, 1), std::invalid_argument);
  w.obstacles.clear();
  CHECK_THROWS_AS(sample_obstacle_cloud(w, 100, 1), std::invalid_argument);
}

TEST_CASE("normalize/denormalize: endpoints, midpoint, round trip") {
  Bounds b;
  b.dim = 2;
  b.min = {-20.0, -10.0, 0.0};
  b.max = {20.0, 30.0, 0.0};

  const auto mid = normalize({0.0, 10.0}, b);
  CHECK_EQ(mid[0], doctest::Approx(0.0));
  CHECK_EQ(mid[1], doctest::Approx(0.0));
  const auto lo = normalize({-20.0, -10.0}, b);
  CHECK_EQ(lo[0], doctest::Approx(-1.0));
  CHECK_EQ(lo[1], doctest::Approx(-1.0));

  RngStream rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> v = {rng.uniform(-20.0, 20.0), rng.uniform(-10.0, 30.0)};
    const auto back = denormalize(normalize(v, b), b);
    CHECK_EQ(back[0], doctest::Approx(v[0]).epsilon(1e-12));
    CHECK_EQ(back[1], doctest::Approx(v[1]).epsilon(1e-12));
  }

  // No clamping: out-of-range inputs map affinely.
  const auto out = normalize({60.0, -10.0}, b);
  CHECK_EQ(out[0], doctest::Approx(3.0));
}

TEST_CASE("flatten_cloud: canonical order and shape") {
  Bounds b;
  b.dim = 2;
  b.min = {-20.0, -20.0, 0.0};
  b.max = {20.0, 20.0, 0.0};

  PointCloud one;
  one.dim_w = 2;
  one.points = {{0.0, 0.0, 0.0}};
  const auto flat = flatten_cloud(one, b);
  REQUIRE_EQ(flat.size(), 2);
  CHECK_EQ(flat[0], doctest::Approx(0.0));
  CHECK_EQ(flat[1], doctest::Approx(0.0));

  PointCloud cloud;
  cloud.dim_w = 2;
  RngStream rng(3);
  for (int i = 0; i < 64; ++i) cloud.points.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20), 0.0});
  PointCloud permuted = cloud;
  rng.shuffle(permuted.points);
  CHECK(flatten_cloud(cloud, b) == flatten_cloud(permuted, b));

  const Workspace w = two_squares();
  const PointCloud big = sample_obstacle_cloud(w, 1400, 9);
  CHECK_EQ(flatten_cloud(big, b).size(), 2800);
}

TEST_CASE("cloud json round trip") {
  const Workspace w = two_squares();
  const PointCloud cloud = sample_obstacle_cloud(w, 64, 21);
  const PointCloud back = cloud_from_json(cloud_to_json(cloud));
  REQUIRE_EQ(back.size(), cloud.size());
  CHECK_EQ(back.source_workspace_id, cloud.source_workspace_id);
  for (int i = 0; i < cloud.size(); ++i)
    for (int k = 0; k < 2; ++k)
      CHECK_EQ(back.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
               cloud.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
}
