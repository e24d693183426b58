#include "mpnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mpnet/errors.hpp"
#include "json.hpp"

namespace mpnet {

namespace {

constexpr double kPi = std::numbers::pi;

void check_dims(const Config& x, const Workspace& w, const RigidBody* body, const char* op) {
  if (x.dim() != state_dim(w.kind))
    throw std::invalid_argument(std::string(op) + ": config dimension " + std::to_string(x.dim()) +
                                " does not match workspace kind " + to_string(w.kind));
  const bool rigid = w.kind == WorkspaceKind::rigid2d;
  if (rigid && body == nullptr)
    throw std::invalid_argument(std::string(op) + ": rigid2d workspace requires a body");
  if (!rigid && body != nullptr)
    throw std::invalid_argument(std::string(op) + ": body given for a point-robot workspace");
}

// Transformed body polygon for pose (x, y, theta).
void posed_polygon(const RigidBody& body, const Config& pose, std::vector<std::array<double, 2>>& out) {
  const double c = std::cos(pose[2]);
  const double s = std::sin(pose[2]);
  out.resize(body.vertices.size());
  for (std::size_t i = 0; i < body.vertices.size(); ++i) {
    const double bx = body.vertices[i][0];
    const double by = body.vertices[i][1];
    out[i] = {pose[0] + c * bx - s * by, pose[1] + s * bx + c * by};
  }
}

struct Interval {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

Interval project_polygon(const std::vector<std::array<double, 2>>& poly, double ax, double ay) {
  Interval iv;
  for (const auto& v : poly) iv.add(ax * v[0] + ay * v[1]);
  return iv;
}

Interval project_box(const Obstacle& box, double ax, double ay) {
  Interval iv;
  iv.add(ax * box.min_corner[0] + ay * box.min_corner[1]);
  iv.add(ax * box.min_corner[0] + ay * box.max_corner[1]);
  iv.add(ax * box.max_corner[0] + ay * box.min_corner[1]);
  iv.add(ax * box.max_corner[0] + ay * box.max_corner[1]);
  return iv;
}

// Separating-axis test between a convex polygon and an AABB, both closed:
// zero-width contact counts as intersection.
bool polygon_intersects_box(const std::vector<std::array<double, 2>>& poly, const Obstacle& box) {
  // Box axes.
  {
    Interval p = project_polygon(poly, 1.0, 0.0);
    if (p.hi < box.min_corner[0] || p.lo > box.max_corner[0]) return false;
    p = project_polygon(poly, 0.0, 1.0);
    if (p.hi < box.min_corner[1] || p.lo > box.max_corner[1]) return false;
  }
  // Polygon edge normals.
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    const double ax = -(b[1] - a[1]);
    const double ay = b[0] - a[0];
    const Interval pp = project_polygon(poly, ax, ay);
    const Interval pb = project_box(box, ax, ay);
    if (pp.hi < pb.lo || pb.hi < pp.lo) return false;
  }
  return true;
}

}  // namespace

std::string to_string(WorkspaceKind kind) {
  switch (kind) {
    case WorkspaceKind::simple2d: return "simple2d";
    case WorkspaceKind::complex2d: return "complex2d";
    case WorkspaceKind::complex3d: return "complex3d";
    case WorkspaceKind::rigid2d: return "rigid2d";
  }
  throw std::invalid_argument("unknown WorkspaceKind");
}

WorkspaceKind workspace_kind_from_string(const std::string& s) {
  if (s == "simple2d") return WorkspaceKind::simple2d;
  if (s == "complex2d") return WorkspaceKind::complex2d;
  if (s == "complex3d") return WorkspaceKind::complex3d;
  if (s == "rigid2d") return WorkspaceKind::rigid2d;
  throw std::invalid_argument("unknown workspace kind: " + s);
}

int state_dim(WorkspaceKind kind) {
  switch (kind) {
    case WorkspaceKind::simple2d:
    case WorkspaceKind::complex2d: return 2;
    case WorkspaceKind::complex3d:
    case WorkspaceKind::rigid2d: return 3;
  }
  throw std::invalid_argument("unknown WorkspaceKind");
}

int workspace_dim(WorkspaceKind kind) {
  return kind == WorkspaceKind::complex3d ? 3 : 2;
}

Config Config::zeros(int dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("Config dimension must be in [1,3]");
  Config c;
  c.dim_ = dim;
  return c;
}

bool Config::all_finite() const {
  for (int i = 0; i < dim_; ++i)
    if (!std::isfinite(coords_[static_cast<std::size_t>(i)])) return false;
  return true;
}

double Bounds::diagonal() const {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += extent(i) * extent(i);
  return std::sqrt(s);
}

RigidBody RigidBody::rectangle(double length, double width) {
  const double hl = length / 2.0;
  const double hw = width / 2.0;
  return RigidBody{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
}

double RigidBody::circumradius() const {
  double r2 = 0.0;
  for (const auto& v : vertices) r2 = std::max(r2, v[0] * v[0] + v[1] * v[1]);
  return std::sqrt(r2);
}

void validate_rigid_body(const RigidBody& body) {
  const std::size_t n = body.vertices.size();
  if (n < 3) throw std::invalid_argument("rigid body needs at least 3 vertices");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = body.vertices[i];
    const auto& b = body.vertices[(i + 1) % n];
    const auto& c = body.vertices[(i + 2) % n];
    const double cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    if (cross <= 0.0)
      throw std::invalid_argument("rigid body must be convex with counterclockwise vertex order");
  }
}

void validate_workspace(const Workspace& w) {
  if (w.dim_w != workspace_dim(w.kind))
    throw std::invalid_argument("workspace dim_w inconsistent with kind");
  if (w.bounds.dim != w.dim_w) throw std::invalid_argument("bounds dimension != dim_w");
  for (int i = 0; i < w.dim_w; ++i)
    if (!(w.bounds.min[static_cast<std::size_t>(i)] < w.bounds.max[static_cast<std::size_t>(i)]))
      throw std::invalid_argument("bounds min must be < max componentwise");
  for (const auto& ob : w.obstacles) {
    for (int i = 0; i < w.dim_w; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (!(ob.min_corner[k] < ob.max_corner[k]))
        throw std::invalid_argument("obstacle min_corner must be < max_corner componentwise");
      if (ob.min_corner[k] < w.bounds.min[k] || ob.max_corner[k] > w.bounds.max[k])
        throw std::invalid_argument("obstacle outside workspace bounds");
    }
  }
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

double config_distance(const Config& a, const Config& b, WorkspaceKind kind) {
  if (a.dim() != b.dim()) throw std::invalid_argument("config_distance: dimension mismatch");
  if (kind == WorkspaceKind::rigid2d) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dt = wrap_angle(a[2] - b[2]);
    return std::sqrt(dx * dx + dy * dy + dt * dt);
  }
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Config interpolate(const Config& a, const Config& b, double t, WorkspaceKind kind) {
  Config out = Config::zeros(a.dim());
  if (kind == WorkspaceKind::rigid2d) {
    out[0] = a[0] + t * (b[0] - a[0]);
    out[1] = a[1] + t * (b[1] - a[1]);
    out[2] = wrap_angle(a[2] + t * wrap_angle(b[2] - a[2]));
    return out;
  }
  for (int i = 0; i < a.dim(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

bool point_in_free_space(const Config& x, const Workspace& w, const RigidBody* body) {
  check_dims(x, w, body, "point_in_free_space");

  if (w.kind == WorkspaceKind::rigid2d) {
    static thread_local std::vector<std::array<double, 2>> poly;
    posed_polygon(*body, x, poly);
    for (const auto& v : poly) {
      for (int i = 0; i < 2; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (v[k] <= w.bounds.min[k] || v[k] >= w.bounds.max[k]) return false;
      }
    }
    for (const auto& ob : w.obstacles)
      if (polygon_intersects_box(poly, ob)) return false;
    return true;
  }

  for (int i = 0; i < w.dim_w; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (x[i] <= w.bounds.min[k] || x[i] >= w.bounds.max[k]) return false;
  }
  for (const auto& ob : w.obstacles) {
    bool inside = true;
    for (int i = 0; i < w.dim_w; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (x[i] < ob.min_corner[k] || x[i] > ob.max_corner[k]) {
        inside = false;
        break;
      }
    }
    if (inside) return false;
  }
  return true;
}

bool segment_collision_free(const Config& x1, const Config& x2, const Workspace& w, double step,
                            const RigidBody* body) {
  if (!(step > 0.0)) throw std::invalid_argument("segment_collision_free: step must be positive");
  check_dims(x1, w, body, "segment_collision_free");
  if (x2.dim() != x1.dim()) throw std::invalid_argument("segment_collision_free: dimension mismatch");

  const double length = config_distance(x1, x2, w.kind);
  if (!point_in_free_space(x1, w, body)) return false;
  if (!point_in_free_space(x2, w, body)) return false;
  if (length == 0.0) return true;

  const double dstep = step / length;
  const auto samples = static_cast<long>(std::floor(1.0 / dstep));
  for (long k = 1; k <= samples; ++k) {
    const double delta = static_cast<double>(k) * dstep;
    if (delta >= 1.0) break;
    if (!point_in_free_space(interpolate(x1, x2, delta, w.kind), w, body)) return false;
    // Mirror sample measured from the far endpoint; keeps the grid symmetric.
    if (!point_in_free_space(interpolate(x1, x2, 1.0 - delta, w.kind), w, body)) return false;
  }
  return true;
}

bool path_feasible(const Path& tau, const Workspace& w, double step, const RigidBody* body) {
  if (tau.empty()) throw std::invalid_argument("path_feasible: empty path");
  if (tau.size() == 1) return point_in_free_space(tau.states[0], w, body);
  for (std::size_t i = 0; i + 1 < tau.size(); ++i)
    if (!segment_collision_free(tau.states[i], tau.states[i + 1], w, step, body)) return false;
  return true;
}

// --- serialization ---------------------------------------------------------

namespace {

nlohmann::json corner_json(const std::array<double, 3>& c, int dim) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) a.push_back(c[static_cast<std::size_t>(i)]);
  return a;
}

std::array<double, 3> corner_from_json(const nlohmann::json& a, int dim, const char* what) {
  if (!a.is_array() || static_cast<int>(a.size()) != dim)
    throw ParseError(std::string("workspace json: bad ") + what);
  std::array<double, 3> out{0.0, 0.0, 0.0};
  for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)].get<double>();
  return out;
}

}  // namespace

std::string workspace_to_json(const Workspace& w) {
  nlohmann::json j;
  j["dim"] = w.dim_w;
  j["kind"] = to_string(w.kind);
  j["id"] = w.id;
  j["bounds"] = {{"min", corner_json(w.bounds.min, w.dim_w)}, {"max", corner_json(w.bounds.max, w.dim_w)}};
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& ob : w.obstacles)
    obs.push_back({{"min", corner_json(ob.min_corner, w.dim_w)}, {"max", corner_json(ob.max_corner, w.dim_w)}});
  j["obstacles"] = std::move(obs);
  return j.dump(2);
}

Workspace workspace_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("workspace json: ") + e.what());
  }
  Workspace w;
  try {
    w.dim_w = j.at("dim").get<int>();
    w.kind = workspace_kind_from_string(j.at("kind").get<std::string>());
    w.id = j.value("id", std::string{});
    w.bounds.dim = w.dim_w;
    w.bounds.min = corner_from_json(j.at("bounds").at("min"), w.dim_w, "bounds.min");
    w.bounds.max = corner_from_json(j.at("bounds").at("max"), w.dim_w, "bounds.max");
    for (const auto& ob : j.at("obstacles")) {
      Obstacle o;
      o.min_corner = corner_from_json(ob.at("min"), w.dim_w, "obstacle.min");
      o.max_corner = corner_from_json(ob.at("max"), w.dim_w, "obstacle.max");
      w.obstacles.push_back(o);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("workspace json: ") + e.what());
  }
  validate_workspace(w);
  return w;
}

void save_workspace(const Workspace& w, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << workspace_to_json(w) << '\n';
}

Workspace load_workspace(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return workspace_from_json(ss.str());
}

}  // namespace mpnet
