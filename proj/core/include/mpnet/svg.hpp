#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mpnet/geometry.hpp"

namespace mpnet {

/// Renders the workspace and paths to SVG: obstacles as filled rectangles,
/// paths as colored polylines with start/end markers, and optionally the
/// goal region as a disk. 3D workspaces render their XY projection. Output
/// bytes are deterministic for fixed inputs.
std::string render_svg_string(const Workspace& w,
                              const std::vector<std::pair<Path, std::string>>& paths,
                              const GoalRegion* goal = nullptr);

void render_svg(const Workspace& w, const std::vector<std::pair<Path, std::string>>& paths,
                const std::filesystem::path& out, const GoalRegion* goal = nullptr);

}  // namespace mpnet
