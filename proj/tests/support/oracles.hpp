#pragma once

// Test-only oracles, kept independent of the library code paths they check.

#include <array>
#include <cmath>
#include <vector>

#include "mpnet/geometry.hpp"
#include "mpnet/neuralnet.hpp"
#include "mpnet/rng.hpp"

namespace mpnet::testing {

/// Independent separating-axis verdict for one convex CCW polygon (given in
/// world coordinates) versus a closed axis-aligned box. Written from the
/// textbook definition rather than reusing the library SAT.
inline bool sat_polygon_box_overlap(const std::vector<std::array<double, 2>>& poly,
                                    const std::array<double, 2>& bmin,
                                    const std::array<double, 2>& bmax) {
  std::vector<std::array<double, 2>> axes = {{1.0, 0.0}, {0.0, 1.0}};
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    axes.push_back({-(b[1] - a[1]), b[0] - a[0]});
  }
  const std::array<std::array<double, 2>, 4> corners = {
      {{bmin[0], bmin[1]}, {bmin[0], bmax[1]}, {bmax[0], bmin[1]}, {bmax[0], bmax[1]}}};
  for (const auto& ax : axes) {
    double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
    for (const auto& v : poly) {
      const double p = ax[0] * v[0] + ax[1] * v[1];
      pmin = std::min(pmin, p);
      pmax = std::max(pmax, p);
    }
    for (const auto& c : corners) {
      const double q = ax[0] * c[0] + ax[1] * c[1];
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
    }
    if (pmax < qmin || qmax < pmin) return false;  // strict gap: closed sets touching still overlap
  }
  return true;
}

/// Dense-sampling steering oracle: checks points every `step` along the
/// segment by walking the interpolation parameter directly.
inline bool dense_segment_free(const Config& a, const Config& b, const Workspace& w, double step,
                               const RigidBody* body = nullptr) {
  const double length = config_distance(a, b, w.kind);
  const long n = std::max<long>(1, static_cast<long>(std::ceil(length / step)));
  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n);
    if (!point_in_free_space(interpolate(a, b, t, w.kind), w, body)) return false;
  }
  return true;
}

/// Euclidean distance from a point to a closed axis-aligned box.
inline double point_box_distance(const Config& x, const Obstacle& ob, int dims) {
  double s = 0.0;
  for (int i = 0; i < dims; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double below = ob.min_corner[k] - x[i];
    const double above = x[i] - ob.max_corner[k];
    const double d = std::max({0.0, below, above});
    s += d * d;
  }
  return std::sqrt(s);
}

/// Approximate clearance of a segment to the obstacle set (and to the
/// outside of the bounds), measured on a dense parameter grid.
inline double segment_clearance(const Config& a, const Config& b, const Workspace& w,
                                double resolution) {
  const double length = config_distance(a, b, w.kind);
  const long n = std::max<long>(1, static_cast<long>(std::ceil(length / resolution)));
  double clearance = 1e300;
  for (long k = 0; k <= n; ++k) {
    const Config x = interpolate(a, b, static_cast<double>(k) / static_cast<double>(n), w.kind);
    for (const auto& ob : w.obstacles)
      clearance = std::min(clearance, point_box_distance(x, ob, w.dim_w));
    for (int i = 0; i < w.dim_w; ++i) {
      const auto ki = static_cast<std::size_t>(i);
      clearance = std::min(clearance, x[i] - w.bounds.min[ki]);
      clearance = std::min(clearance, w.bounds.max[ki] - x[i]);
    }
  }
  return clearance;
}

/// Central finite-difference gradient of `loss` with respect to one scalar
/// parameter reached through the accessor.
template <typename Loss>
double central_difference(double& param, double h, const Loss& loss) {
  const double saved = param;
  param = saved + h;
  const double up = loss();
  param = saved - h;
  const double down = loss();
  param = saved;
  return (up - down) / (2.0 * h);
}

/// Two-sided relative error with an absolute floor, the usual gradient-check
/// metric: exact relative error for gradients above the floor, absolute
/// comparison below it where float noise dominates.
inline double gradcheck_error(double analytic, double numeric) {
  const double denom = std::max({1e-3, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

/// Signs of every pre-activation for a fixed input and mask stream. A probe
/// whose +-h evaluations differ in this signature crossed a PReLU kink, where
/// a central difference is not a valid derivative oracle; such probes must
/// be redrawn.
inline std::vector<std::uint8_t> prelu_sign_signature(const MlpParams& params,
                                                      const Eigen::MatrixXd& x, ForwardMode mode,
                                                      const RngStream& mask_seed) {
  RngStream rng = mask_seed;
  ForwardCache cache;
  forward(params, x, mode, rng, &cache);
  std::vector<std::uint8_t> signs;
  for (const auto& z : cache.pre)
    for (Eigen::Index i = 0; i < z.size(); ++i) signs.push_back(z.data()[i] >= 0.0 ? 1 : 0);
  return signs;
}

}  // namespace mpnet::testing
