#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpnet/geometry.hpp"

namespace mpnet {

/// Obstacle-surface point cloud; the raw network input x_obs.
struct PointCloud {
  std::vector<std::array<double, 3>> points;  // n_pc entries, dim_w coords each
  int dim_w = 2;
  std::string source_workspace_id;

  int size() const { return static_cast<int>(points.size()); }
};

/// Draws n_pc points uniformly by surface measure (perimeter in 2D, face
/// area in 3D) across all obstacle faces. Deterministic for a fixed seed.
/// Throws std::invalid_argument when the workspace has no obstacles or
/// n_pc <= 0.
PointCloud sample_obstacle_cloud(const Workspace& w, int n_pc, std::uint64_t seed);

/// Componentwise affine map sending b.min -> -1 and b.max -> +1. Inputs
/// outside the bounds map affinely without clamping.
std::vector<double> normalize(const std::vector<double>& values, const Bounds& b);
/// Exact inverse of normalize.
std::vector<double> denormalize(const std::vector<double>& values, const Bounds& b);

/// Row-major flattening of the normalized cloud. Points are sorted
/// lexicographically by raw coordinates first, so the output is invariant
/// under any permutation of the input points.
std::vector<double> flatten_cloud(const PointCloud& pc, const Bounds& b);

std::string cloud_to_json(const PointCloud& pc);
PointCloud cloud_from_json(const std::string& text);
void save_cloud(const PointCloud& pc, const std::filesystem::path& file);
PointCloud load_cloud(const std::filesystem::path& file);

}  // namespace mpnet
