#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace pfstab {

using Point = std::vector<double>;

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Axis-aligned box, one interval per dimension.
struct Box {
    std::vector<Interval> sides;

    friend bool operator==(const Box&, const Box&) = default;
};

/// Index into the chain's state space, or Outside for points that left a
/// non-periodic dimension.
struct CellIndex {
    static constexpr std::size_t kOutside = std::numeric_limits<std::size_t>::max();

    std::size_t value = kOutside;

    static constexpr CellIndex outside() { return CellIndex{}; }
    constexpr bool is_outside() const { return value == kOutside; }
    friend constexpr bool operator==(CellIndex, CellIndex) = default;
};

enum class SampleScheme { UniformSubgrid, StratifiedRandom };

std::string to_string(SampleScheme scheme);
SampleScheme parse_sample_scheme(const std::string& name);

/// Uniform box grid with an attractor lump and an out-of-domain sink.
///
/// Index layout (N = index_count()):
///   [0, N-2)  ordinary grid cells, in row-major grid order (dimension 0
///             slowest), skipping the lumped attractor cells
///   N-2       sink; no geometric extent, absorbs out-of-domain mass
///   N-1       attractor, the union of every grid cell that meets the
///             attractor region
///
/// Cells are half-open [lo, hi) per dimension, except the last cell of a
/// non-periodic dimension which is closed. Immutable after construction.
class Partition {
public:
    /// Throws Error(Config) when the bounds are empty, a count is below 2,
    /// or the attractor region covers no cell or every cell.
    static Partition build_grid(std::vector<Interval> bounds,
                                std::vector<std::size_t> counts,
                                std::vector<bool> wrap,
                                const Box& attractor_region);

    std::size_t dimension() const { return bounds_.size(); }
    const std::vector<Interval>& bounds() const { return bounds_; }
    const std::vector<std::size_t>& counts() const { return counts_; }
    const std::vector<bool>& wrap() const { return wrap_; }
    const Box& attractor_region() const { return attractor_region_; }

    std::size_t grid_cell_count() const { return grid_to_index_.size(); }
    std::size_t index_count() const { return ordinary_count() + 2; }
    std::size_t ordinary_count() const { return ordinary_to_grid_.size(); }
    std::size_t restricted_size() const { return ordinary_count() + 1; }
    std::size_t sink_index() const { return ordinary_count(); }
    std::size_t attractor_index() const { return ordinary_count() + 1; }

    /// Grid-linear ids of the lumped cells, ascending.
    const std::vector<std::size_t>& attractor_grid_cells() const { return attractor_grid_cells_; }

    /// Maps a point into the periodic dimensions' fundamental domain.
    void wrap_in_place(std::span<double> point) const;
    Point wrapped(std::span<const double> point) const;
    /// Projects finite coordinates of non-periodic dimensions onto the bounds.
    void clamp_in_place(std::span<double> point) const;

    CellIndex locate(std::span<const double> point) const;
    bool in_attractor(std::span<const double> point) const;

    std::size_t grid_linear(std::size_t ordinary) const;
    std::vector<std::size_t> grid_coords(std::size_t ordinary) const;
    std::vector<std::size_t> grid_coords_of_linear(std::size_t linear) const;
    CellIndex index_of_grid_cell(std::size_t linear) const;

    Box cell_box(std::size_t ordinary) const;
    Point cell_center(std::size_t ordinary) const;
    Box grid_cell_box(std::size_t linear) const;

    /// Volume of one grid cell (all cells are equal on a uniform grid).
    double cell_volume() const;
    double attractor_volume() const { return cell_volume() * static_cast<double>(attractor_grid_cells_.size()); }
    double domain_volume() const;

    /// Points strictly inside an ordinary cell. UniformSubgrid is a centered
    /// sublattice with the most balanced factorization of `count` (largest
    /// factor first); StratifiedRandom draws one point per sublattice box
    /// from a stream keyed by (seed, cell). Throws Error(Usage) for the sink
    /// or attractor index.
    std::vector<Point> cell_samples(std::size_t cell, std::size_t count,
                                    SampleScheme scheme, std::uint64_t seed) const;

    /// Stable textual description; input to grid_hash().
    std::string canonical() const;
    std::uint64_t grid_hash() const;

private:
    Partition() = default;

    std::vector<Interval> bounds_;
    std::vector<std::size_t> counts_;
    std::vector<bool> wrap_;
    std::vector<double> widths_;
    std::vector<std::size_t> strides_;
    Box attractor_region_;
    std::vector<std::size_t> attractor_grid_cells_;
    std::vector<std::size_t> ordinary_to_grid_;
    std::vector<std::size_t> grid_to_index_;
};

/// Most balanced factorization of `count` into `dims` factors, descending.
std::vector<std::size_t> balanced_factors(std::size_t count, std::size_t dims);

}  // namespace pfstab
