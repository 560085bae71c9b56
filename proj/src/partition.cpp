#include "pfstab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "pfstab/error.hpp"
#include "pfstab/rng.hpp"
#include "pfstab/text.hpp"

namespace pfstab {

namespace {

double wrap_coordinate(double x, const Interval& b) {
    if (x >= b.lower && x < b.upper) return x;
    const double period = b.upper - b.lower;
    double r = std::fmod(x - b.lower, period);
    if (r < 0.0) r += period;
    const double v = b.lower + r;
    return v >= b.upper ? b.lower : v;
}

}  // namespace

std::string to_string(SampleScheme scheme) {
    return scheme == SampleScheme::UniformSubgrid ? "uniform-subgrid" : "stratified-random";
}

SampleScheme parse_sample_scheme(const std::string& name) {
    if (name == "uniform-subgrid") return SampleScheme::UniformSubgrid;
    if (name == "stratified-random") return SampleScheme::StratifiedRandom;
    fail(ErrorKind::Config, "unknown sample scheme '" + name + "'");
}

std::vector<std::size_t> balanced_factors(std::size_t count, std::size_t dims) {
    if (dims == 0) return {};
    std::vector<std::size_t> best;
    double best_ratio = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> current;
    // Non-increasing factor sequences only, so each multiset is visited once.
    std::function<void(std::size_t, std::size_t)> search = [&](std::size_t rest, std::size_t cap) {
        if (current.size() + 1 == dims) {
            if (rest > cap) return;
            current.push_back(rest);
            const double ratio = static_cast<double>(current.front()) / static_cast<double>(current.back());
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best = current;
            }
            current.pop_back();
            return;
        }
        for (std::size_t f = std::min(rest, cap); f >= 1; --f) {
            if (rest % f != 0) continue;
            current.push_back(f);
            search(rest / f, f);
            current.pop_back();
        }
    };
    search(count, count);
    return best;
}

Partition Partition::build_grid(std::vector<Interval> bounds, std::vector<std::size_t> counts,
                                std::vector<bool> wrap, const Box& attractor_region) {
    const std::size_t d = bounds.size();
    if (d == 0) fail(ErrorKind::Config, "grid needs at least one dimension");
    if (counts.size() != d || wrap.size() != d || attractor_region.sides.size() != d)
        fail(ErrorKind::Config, "grid bounds, counts, wrap and attractor box disagree on dimension");
    for (std::size_t k = 0; k < d; ++k) {
        if (!(std::isfinite(bounds[k].lower) && std::isfinite(bounds[k].upper) &&
              bounds[k].lower < bounds[k].upper))
            fail(ErrorKind::Config, "grid dimension " + std::to_string(k) + " needs lower < upper");
        if (counts[k] < 2)
            fail(ErrorKind::Config, "grid dimension " + std::to_string(k) + " needs at least 2 cells");
        if (!(attractor_region.sides[k].lower <= attractor_region.sides[k].upper))
            fail(ErrorKind::Config, "attractor box is empty in dimension " + std::to_string(k));
    }

    Partition p;
    p.bounds_ = std::move(bounds);
    p.counts_ = std::move(counts);
    p.wrap_ = std::move(wrap);
    p.attractor_region_ = attractor_region;
    p.widths_.resize(d);
    p.strides_.assign(d, 1);
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) {
        p.widths_[k] = (p.bounds_[k].upper - p.bounds_[k].lower) / static_cast<double>(p.counts_[k]);
        total *= p.counts_[k];
    }
    for (std::size_t k = d - 1; k-- > 0;) p.strides_[k] = p.strides_[k + 1] * p.counts_[k + 1];

    // A cell is lumped when its overlap with the attractor box has positive
    // extent in every dimension; the slack absorbs rounding in the cell edges
    // so boxes aligned with grid lines do not pick up their neighbours.
    std::vector<bool> lumped(total, false);
    for (std::size_t linear = 0; linear < total; ++linear) {
        const Box cell = p.grid_cell_box(linear);
        bool meets = true;
        for (std::size_t k = 0; k < d && meets; ++k) {
            const double overlap = std::min(cell.sides[k].upper, attractor_region.sides[k].upper) -
                                   std::max(cell.sides[k].lower, attractor_region.sides[k].lower);
            meets = overlap > 1e-9 * p.widths_[k];
        }
        lumped[linear] = meets;
    }
    p.grid_to_index_.assign(total, 0);
    for (std::size_t linear = 0; linear < total; ++linear) {
        if (lumped[linear]) {
            p.attractor_grid_cells_.push_back(linear);
        } else {
            p.grid_to_index_[linear] = p.ordinary_to_grid_.size();
            p.ordinary_to_grid_.push_back(linear);
        }
    }
    if (p.attractor_grid_cells_.empty())
        fail(ErrorKind::Config, "attractor region covers no grid cell");
    if (p.ordinary_to_grid_.empty())
        fail(ErrorKind::Config, "attractor region covers every grid cell");
    for (std::size_t linear : p.attractor_grid_cells_) p.grid_to_index_[linear] = p.attractor_index();
    return p;
}

void Partition::wrap_in_place(std::span<double> point) const {
    for (std::size_t k = 0; k < dimension(); ++k) {
        if (wrap_[k] && std::isfinite(point[k])) point[k] = wrap_coordinate(point[k], bounds_[k]);
    }
}

Point Partition::wrapped(std::span<const double> point) const {
    Point p(point.begin(), point.end());
    wrap_in_place(p);
    return p;
}

void Partition::clamp_in_place(std::span<double> point) const {
    for (std::size_t k = 0; k < dimension(); ++k)
        if (!wrap_[k] && std::isfinite(point[k])) point[k] = std::clamp(point[k], bounds_[k].lower, bounds_[k].upper);
}

CellIndex Partition::locate(std::span<const double> point) const {
    std::size_t linear = 0;
    for (std::size_t k = 0; k < dimension(); ++k) {
        double x = point[k];
        if (!std::isfinite(x)) return CellIndex::outside();
        if (wrap_[k]) {
            x = wrap_coordinate(x, bounds_[k]);
        } else if (x < bounds_[k].lower || x > bounds_[k].upper) {
            return CellIndex::outside();
        }
        const double lo = bounds_[k].lower;
        const std::size_t n = counts_[k];
        auto idx = static_cast<std::ptrdiff_t>(std::floor((x - lo) / widths_[k]));
        idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n) - 1);
        // Make the half-open convention exact with respect to lo + i * width.
        if (idx > 0 && x < lo + static_cast<double>(idx) * widths_[k]) --idx;
        if (idx + 1 < static_cast<std::ptrdiff_t>(n) && x >= lo + static_cast<double>(idx + 1) * widths_[k]) ++idx;
        linear += static_cast<std::size_t>(idx) * strides_[k];
    }
    return CellIndex{grid_to_index_[linear]};
}

bool Partition::in_attractor(std::span<const double> point) const {
    return locate(point).value == attractor_index();
}

std::size_t Partition::grid_linear(std::size_t ordinary) const {
    if (ordinary >= ordinary_count())
        fail(ErrorKind::Usage, "index " + std::to_string(ordinary) + " is not an ordinary cell");
    return ordinary_to_grid_[ordinary];
}

std::vector<std::size_t> Partition::grid_coords_of_linear(std::size_t linear) const {
    std::vector<std::size_t> coords(dimension());
    for (std::size_t k = 0; k < dimension(); ++k) {
        coords[k] = linear / strides_[k];
        linear %= strides_[k];
    }
    return coords;
}

std::vector<std::size_t> Partition::grid_coords(std::size_t ordinary) const {
    return grid_coords_of_linear(grid_linear(ordinary));
}

CellIndex Partition::index_of_grid_cell(std::size_t linear) const {
    if (linear >= grid_cell_count()) return CellIndex::outside();
    return CellIndex{grid_to_index_[linear]};
}

Box Partition::grid_cell_box(std::size_t linear) const {
    Box box;
    box.sides.resize(dimension());
    const auto coords = grid_coords_of_linear(linear);
    for (std::size_t k = 0; k < dimension(); ++k) {
        const double lo = bounds_[k].lower;
        box.sides[k].lower = lo + static_cast<double>(coords[k]) * widths_[k];
        box.sides[k].upper = coords[k] + 1 == counts_[k]
                                 ? bounds_[k].upper
                                 : lo + static_cast<double>(coords[k] + 1) * widths_[k];
    }
    return box;
}

Box Partition::cell_box(std::size_t ordinary) const { return grid_cell_box(grid_linear(ordinary)); }

Point Partition::cell_center(std::size_t ordinary) const {
    const Box box = cell_box(ordinary);
    Point c(dimension());
    for (std::size_t k = 0; k < dimension(); ++k) c[k] = 0.5 * (box.sides[k].lower + box.sides[k].upper);
    return c;
}

double Partition::cell_volume() const {
    double v = 1.0;
    for (double w : widths_) v *= w;
    return v;
}

double Partition::domain_volume() const {
    double v = 1.0;
    for (const auto& b : bounds_) v *= b.upper - b.lower;
    return v;
}

std::vector<Point> Partition::cell_samples(std::size_t cell, std::size_t count, SampleScheme scheme,
                                           std::uint64_t seed) const {
    if (cell >= ordinary_count())
        fail(ErrorKind::Usage, "cannot sample index " + std::to_string(cell) + ": not an ordinary cell");
    if (count == 0) fail(ErrorKind::Usage, "samples_per_cell must be at least 1");

    const std::size_t d = dimension();
    const Box box = cell_box(cell);
    const auto factors = balanced_factors(count, d);
    Rng rng(derive_seed({seed, grid_linear(cell), 0x5a3b1e}));

    std::vector<Point> points;
    points.reserve(count);
    std::vector<std::size_t> sub(d, 0);
    for (std::size_t s = 0; s < count; ++s) {
        Point p(d);
        for (std::size_t k = 0; k < d; ++k) {
            const double lo = box.sides[k].lower;
            const double step = (box.sides[k].upper - lo) / static_cast<double>(factors[k]);
            const double offset = scheme == SampleScheme::UniformSubgrid ? 0.5 : rng.uniform_open();
            p[k] = lo + (static_cast<double>(sub[k]) + offset) * step;
        }
        points.push_back(std::move(p));
        for (std::size_t k = d; k-- > 0;) {
            if (++sub[k] < factors[k]) break;
            sub[k] = 0;
        }
    }
    return points;
}

std::string Partition::canonical() const {
    std::string s = "grid/v1 dim=" + std::to_string(dimension());
    for (std::size_t k = 0; k < dimension(); ++k) {
        s += " [" + format_double(bounds_[k].lower) + "," + format_double(bounds_[k].upper) + "]x" +
             std::to_string(counts_[k]) + (wrap_[k] ? "w" : "");
    }
    s += " attractor=";
    for (std::size_t linear : attractor_grid_cells_) s += std::to_string(linear) + ",";
    return s;
}

std::uint64_t Partition::grid_hash() const { return fnv1a64(canonical()); }

}  // namespace pfstab
