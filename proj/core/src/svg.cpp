#include "mpnet/svg.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mpnet {

namespace {

constexpr double kCanvas = 640.0;
constexpr double kMargin = 20.0;

// Fixed-format numbers keep the byte output independent of locale and
// stream state.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_svg_string(const Workspace& w,
                              const std::vector<std::pair<Path, std::string>>& paths,
                              const GoalRegion* goal) {
  const double wx = w.bounds.extent(0);
  const double wy = w.bounds.extent(1);
  const double scale = (kCanvas - 2.0 * kMargin) / std::max(wx, wy);
  const double width = wx * scale + 2.0 * kMargin;
  const double height = wy * scale + 2.0 * kMargin;

  // SVG y grows downward; flip the vertical axis.
  auto sx = [&](double x) { return kMargin + (x - w.bounds.min[0]) * scale; };
  auto sy = [&](double y) { return height - kMargin - (y - w.bounds.min[1]) * scale; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n";
  out << "  <rect x=\"" << fmt(sx(w.bounds.min[0])) << "\" y=\"" << fmt(sy(w.bounds.max[1]))
      << "\" width=\"" << fmt(wx * scale) << "\" height=\"" << fmt(wy * scale)
      << "\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (const auto& ob : w.obstacles) {
    out << "  <rect class=\"obstacle\" x=\"" << fmt(sx(ob.min_corner[0])) << "\" y=\""
        << fmt(sy(ob.max_corner[1])) << "\" width=\"" << fmt((ob.max_corner[0] - ob.min_corner[0]) * scale)
        << "\" height=\"" << fmt((ob.max_corner[1] - ob.min_corner[1]) * scale)
        << "\" fill=\"#555555\"/>\n";
  }

  if (goal) {
    out << "  <circle class=\"goal\" cx=\"" << fmt(sx(goal->center[0])) << "\" cy=\""
        << fmt(sy(goal->center[1])) << "\" r=\"" << fmt(goal->radius * scale)
        << "\" fill=\"#a0522d\" fill-opacity=\"0.6\"/>\n";
  }

  for (const auto& [path, color] : paths) {
    if (path.empty()) continue;
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i) out << ' ';
      out << fmt(sx(path.states[i][0])) << ',' << fmt(sy(path.states[i][1]));
    }
    out << "\"/>\n";
    out << "  <circle cx=\"" << fmt(sx(path.front()[0])) << "\" cy=\"" << fmt(sy(path.front()[1]))
        << "\" r=\"4\" fill=\"green\"/>\n";
    out << "  <circle cx=\"" << fmt(sx(path.back()[0])) << "\" cy=\"" << fmt(sy(path.back()[1]))
        << "\" r=\"4\" fill=\"" << color << "\"/>\n";
  }

  out << "</svg>\n";
  return out.str();
}

void render_svg(const Workspace& w, const std::vector<std::pair<Path, std::string>>& paths,
                const std::filesystem::path& out, const GoalRegion* goal) {
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open for writing: " + out.string());
  f << render_svg_string(w, paths, goal);
}

}  // namespace mpnet
