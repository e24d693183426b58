#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mpnet {

/// Plan-time steering resolution (workspace units).
inline constexpr double kPlanStep = 0.05;
/// Strict resolution used for final path validation.
inline constexpr double kStrictStep = 0.005;

enum class WorkspaceKind { simple2d, complex2d, complex3d, rigid2d };

std::string to_string(WorkspaceKind kind);
WorkspaceKind workspace_kind_from_string(const std::string& s);

/// Planning-space dimension d: 2 for planar points, 3 for spatial points and
/// for SE(2) poses stored as (x, y, theta).
int state_dim(WorkspaceKind kind);
/// Workspace dimension d_w: 2 or 3.
int workspace_dim(WorkspaceKind kind);

/// One robot state. Fixed capacity 3; only the first dim() entries are
/// meaningful. For rigid2d the layout is (x, y, theta) with theta in [-pi, pi).
class Config {
 public:
  Config() = default;
  Config(double x, double y) : coords_{x, y, 0.0}, dim_(2) {}
  Config(double x, double y, double z) : coords_{x, y, z}, dim_(3) {}
  static Config zeros(int dim);

  int dim() const { return dim_; }
  double& operator[](int i) { return coords_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return coords_[static_cast<std::size_t>(i)]; }

  bool all_finite() const;

  friend bool operator==(const Config& a, const Config& b) {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i)
      if (a.coords_[static_cast<std::size_t>(i)] != b.coords_[static_cast<std::size_t>(i)]) return false;
    return true;
  }

 private:
  std::array<double, 3> coords_{0.0, 0.0, 0.0};
  int dim_ = 0;
};

/// Axis-aligned box obstacle; min_corner < max_corner componentwise. Closed:
/// boundary contact counts as collision.
struct Obstacle {
  std::array<double, 3> min_corner{0.0, 0.0, 0.0};
  std::array<double, 3> max_corner{0.0, 0.0, 0.0};
};

/// Axis-aligned box, min < max componentwise.
struct Bounds {
  std::array<double, 3> min{0.0, 0.0, 0.0};
  std::array<double, 3> max{0.0, 0.0, 0.0};
  int dim = 0;

  double extent(int i) const { return max[static_cast<std::size_t>(i)] - min[static_cast<std::size_t>(i)]; }
  double diagonal() const;
};

/// Convex polygon in the body frame, counterclockwise vertex order.
struct RigidBody {
  std::vector<std::array<double, 2>> vertices;

  /// Axis-aligned rectangle of the given dimensions centered on the origin.
  static RigidBody rectangle(double length, double width);
  /// Radius of the smallest origin-centered disk containing the body.
  double circumradius() const;
};

/// Throws std::invalid_argument unless the body is a convex CCW polygon with
/// at least 3 vertices.
void validate_rigid_body(const RigidBody& body);

struct Workspace {
  WorkspaceKind kind = WorkspaceKind::simple2d;
  int dim_w = 2;
  Bounds bounds;
  std::vector<Obstacle> obstacles;
  std::string id;  // assigned by dataset generation; empty for ad-hoc workspaces
};

/// Throws std::invalid_argument if bounds/obstacles violate the workspace
/// invariants (obstacle outside bounds, inverted corners, bad dimension).
void validate_workspace(const Workspace& w);

struct Path {
  std::vector<Config> states;

  bool empty() const { return states.empty(); }
  std::size_t size() const { return states.size(); }
  const Config& front() const { return states.front(); }
  const Config& back() const { return states.back(); }
};

struct GoalRegion {
  Config center;
  double radius = 0.0;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

/// Metric distance between two states. Euclidean for point robots; for
/// rigid2d, Euclidean on (x, y, theta) with unit angular weight and
/// wrap-aware angle difference.
double config_distance(const Config& a, const Config& b, WorkspaceKind kind);

/// Straight interpolation tau(t) = (1-t) a + t b; for rigid2d the angle
/// follows the shortest arc and is re-wrapped.
Config interpolate(const Config& a, const Config& b, double t, WorkspaceKind kind);

/// Membership in X_free. Obstacles and the complement of the bounds are
/// closed sets, so boundary contact is a collision. For rigid2d the body
/// polygon posed at x must avoid every obstacle and stay strictly inside the
/// bounds. `body` must be present iff w.kind == rigid2d.
bool point_in_free_space(const Config& x, const Workspace& w, const RigidBody* body = nullptr);

/// Discrete steering check from x1 to x2. Samples the segment at delta
/// spacing `step / |x2 - x1|` from both endpoints inclusive (the two-sided
/// grid makes the verdict symmetric in its arguments and step-halving
/// refines it into a superset). True iff every sample is in X_free.
bool segment_collision_free(const Config& x1, const Config& x2, const Workspace& w, double step,
                            const RigidBody* body = nullptr);

/// True iff every consecutive pair of states passes segment_collision_free;
/// a single-state path reduces to point_in_free_space.
bool path_feasible(const Path& tau, const Workspace& w, double step, const RigidBody* body = nullptr);

// --- serialization ---------------------------------------------------------

std::string workspace_to_json(const Workspace& w);
Workspace workspace_from_json(const std::string& text);
void save_workspace(const Workspace& w, const std::filesystem::path& file);
Workspace load_workspace(const std::filesystem::path& file);

}  // namespace mpnet
