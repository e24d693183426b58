#include "mpnet/pointcloud.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mpnet/errors.hpp"
#include "mpnet/rng.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

// One axis-aligned face of an obstacle: the face lies in the plane
// axis = value, spanning the box extent in the remaining dimensions.
struct Face {
  const Obstacle* box;
  int axis;
  double value;
  double measure;  // edge length in 2D, face area in 3D
};

std::vector<Face> obstacle_faces(const Workspace& w) {
  std::vector<Face> faces;
  for (const auto& ob : w.obstacles) {
    for (int axis = 0; axis < w.dim_w; ++axis) {
      double measure = 1.0;
      for (int i = 0; i < w.dim_w; ++i) {
        if (i == axis) continue;
        const auto k = static_cast<std::size_t>(i);
        measure *= ob.max_corner[k] - ob.min_corner[k];
      }
      const auto ka = static_cast<std::size_t>(axis);
      faces.push_back({&ob, axis, ob.min_corner[ka], measure});
      faces.push_back({&ob, axis, ob.max_corner[ka], measure});
    }
  }
  return faces;
}

}  // namespace

PointCloud sample_obstacle_cloud(const Workspace& w, int n_pc, std::uint64_t seed) {
  if (n_pc <= 0) throw std::invalid_argument("sample_obstacle_cloud: n_pc must be positive");
  if (w.obstacles.empty())
    throw std::invalid_argument("sample_obstacle_cloud: workspace has no obstacles (encoder input undefined)");

  const std::vector<Face> faces = obstacle_faces(w);
  std::vector<double> cumulative(faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    total += faces[i].measure;
    cumulative[i] = total;
  }

  RngStream rng(seed);
  PointCloud pc;
  pc.dim_w = w.dim_w;
  pc.source_workspace_id = w.id;
  pc.points.resize(static_cast<std::size_t>(n_pc));
  for (auto& p : pc.points) {
    const double r = rng.uniform() * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
    const auto& face = faces[static_cast<std::size_t>(it - cumulative.begin())];
    p = {0.0, 0.0, 0.0};
    for (int i = 0; i < w.dim_w; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (i == face.axis) {
        p[k] = face.value;
      } else {
        p[k] = rng.uniform(face.box->min_corner[k], face.box->max_corner[k]);
      }
    }
  }
  return pc;
}

std::vector<double> normalize(const std::vector<double>& values, const Bounds& b) {
  if (static_cast<int>(values.size()) != b.dim)
    throw std::invalid_argument("normalize: value length does not match bounds dimension");
  std::vector<double> out(values.size());
  for (int i = 0; i < b.dim; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = 2.0 * (values[k] - b.min[k]) / (b.max[k] - b.min[k]) - 1.0;
  }
  return out;
}

std::vector<double> denormalize(const std::vector<double>& values, const Bounds& b) {
  if (static_cast<int>(values.size()) != b.dim)
    throw std::invalid_argument("denormalize: value length does not match bounds dimension");
  std::vector<double> out(values.size());
  for (int i = 0; i < b.dim; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = b.min[k] + (values[k] + 1.0) * 0.5 * (b.max[k] - b.min[k]);
  }
  return out;
}

std::vector<double> flatten_cloud(const PointCloud& pc, const Bounds& b) {
  if (b.dim != pc.dim_w) throw std::invalid_argument("flatten_cloud: bounds dimension != cloud dimension");
  std::vector<std::array<double, 3>> sorted = pc.points;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(sorted.size() * static_cast<std::size_t>(pc.dim_w));
  for (const auto& p : sorted) {
    for (int i = 0; i < pc.dim_w; ++i) {
      const auto k = static_cast<std::size_t>(i);
      out.push_back(2.0 * (p[k] - b.min[k]) / (b.max[k] - b.min[k]) - 1.0);
    }
  }
  return out;
}

std::string cloud_to_json(const PointCloud& pc) {
  nlohmann::json j;
  j["workspace_id"] = pc.source_workspace_id;
  j["n_pc"] = pc.size();
  j["dim"] = pc.dim_w;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : pc.points) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < pc.dim_w; ++i) row.push_back(p[static_cast<std::size_t>(i)]);
    pts.push_back(std::move(row));
  }
  j["points"] = std::move(pts);
  return j.dump();
}

PointCloud cloud_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("cloud json: ") + e.what());
  }
  PointCloud pc;
  try {
    pc.source_workspace_id = j.at("workspace_id").get<std::string>();
    pc.dim_w = j.at("dim").get<int>();
    const auto n = j.at("n_pc").get<int>();
    const auto& pts = j.at("points");
    if (static_cast<int>(pts.size()) != n) throw ParseError("cloud json: n_pc does not match point count");
    for (const auto& row : pts) {
      if (static_cast<int>(row.size()) != pc.dim_w) throw ParseError("cloud json: point dimension mismatch");
      std::array<double, 3> p{0.0, 0.0, 0.0};
      for (int i = 0; i < pc.dim_w; ++i) p[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(i)].get<double>();
      pc.points.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("cloud json: ") + e.what());
  }
  return pc;
}

void save_cloud(const PointCloud& pc, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << cloud_to_json(pc) << '\n';
}

PointCloud load_cloud(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return cloud_from_json(ss.str());
}

}  // namespace mpnet
