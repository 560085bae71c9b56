#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pfstab/partition.hpp"
#include "pfstab/policy.hpp"
#include "pfstab/verify.hpp"

namespace pfstab {

/// Partition-shaped CSV with header `grid_i, grid_j, x_center, y_center,
/// value`: one row per ordinary cell in index order (row-major grid order),
/// then the sink and attractor rows with grid indices -1. `values` has one
/// entry per ordinary cell, per restricted index, or per chain index;
/// missing sink/attractor entries are written as 0. Two-dimensional grids
/// only. Throws Error(Usage) on a length mismatch.
std::string grid_csv(std::span<const double> values, const Partition& partition);
void export_grid_csv(std::span<const double> values, const Partition& partition, const std::filesystem::path& path);

/// Value column of a grid CSV, in file order. Throws Error(CorruptFile).
std::vector<double> parse_grid_csv(const std::string& text);

/// `cell_index, grid_i, grid_j, action_index, control_value`.
std::string policy_csv(const Policy& policy, const Partition& partition);

/// `step, x, xdot, u, xi`; the final state has empty u and xi.
std::string trajectory_csv(const Trajectory& trajectory);

/// Plain greyscale PGM (P2) of a per-ordinary-cell vector; the first grid
/// dimension runs left to right, the second bottom to top. Attractor cells
/// are drawn black. Values are scaled linearly between their min and max.
std::string heatmap_pgm(std::span<const double> values, const Partition& partition);

}  // namespace pfstab
