#include "pfstab/export.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pfstab/error.hpp"
#include "pfstab/fileio.hpp"
#include "pfstab/text.hpp"

namespace pfstab {

namespace {

void require_2d(const Partition& partition) {
    if (partition.dimension() != 2) fail(ErrorKind::Usage, "grid exports need a two-dimensional partition");
}

}  // namespace

std::string grid_csv(std::span<const double> values, const Partition& partition) {
    require_2d(partition);
    const std::size_t cells = partition.ordinary_count();
    if (values.size() != cells && values.size() != partition.restricted_size() &&
        values.size() != partition.index_count())
        fail(ErrorKind::Usage, "grid export got " + std::to_string(values.size()) + " values for " +
                                   std::to_string(cells) + " cells");
    auto extra = [&](std::size_t idx) { return idx < values.size() ? values[idx] : 0.0; };
    std::ostringstream out;
    out << "grid_i, grid_j, x_center, y_center, value\n";
    for (std::size_t c = 0; c < cells; ++c) {
        const auto g = partition.grid_coords(c);
        const Point x = partition.cell_center(c);
        out << g[0] << ", " << g[1] << ", " << format_double(x[0]) << ", " << format_double(x[1]) << ", "
            << format_double(values[c]) << "\n";
    }
    const auto& region = partition.attractor_region().sides;
    out << "-1, -1, nan, nan, " << format_double(extra(partition.sink_index())) << "\n";
    out << "-1, -1, " << format_double(0.5 * (region[0].lower + region[0].upper)) << ", "
        << format_double(0.5 * (region[1].lower + region[1].upper)) << ", "
        << format_double(extra(partition.attractor_index())) << "\n";
    return out.str();
}

void export_grid_csv(std::span<const double> values, const Partition& partition, const std::filesystem::path& path) {
    write_text_file(path, grid_csv(values, partition));
}

std::vector<double> parse_grid_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "grid_i, grid_j, x_center, y_center, value")
        fail(ErrorKind::CorruptFile, "grid CSV has an unexpected header");
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto pos = line.rfind(',');
        if (pos == std::string::npos || std::count(line.begin(), line.end(), ',') != 4)
            fail(ErrorKind::CorruptFile, "grid CSV line " + std::to_string(lineno) + " needs five fields");
        try {
            values.push_back(std::stod(line.substr(pos + 1)));
        } catch (const std::exception&) {
            fail(ErrorKind::CorruptFile, "grid CSV line " + std::to_string(lineno) + " has a bad value");
        }
    }
    return values;
}

std::string policy_csv(const Policy& policy, const Partition& partition) {
    require_2d(partition);
    if (policy.size() != partition.restricted_size()) fail(ErrorKind::Usage, "policy does not match the partition");
    std::ostringstream out;
    out << "cell_index, grid_i, grid_j, action_index, control_value\n";
    for (std::size_t c = 0; c < partition.ordinary_count(); ++c) {
        const auto g = partition.grid_coords(c);
        out << c << ", " << g[0] << ", " << g[1] << ", " << policy.action[c] << ", "
            << format_double(policy.control(c).at(0)) << "\n";
    }
    return out.str();
}

std::string trajectory_csv(const Trajectory& tr) {
    std::ostringstream out;
    out << "step, x, xdot, u, xi\n";
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
        const Point& x = tr.states[t];
        out << t << ", " << format_double(x.at(0)) << ", " << format_double(x.at(1)) << ", ";
        if (t < tr.controls.size())
            out << format_double(tr.controls[t].at(0)) << ", " << format_double(tr.noises[t].at(0));
        else
            out << ", ";
        out << "\n";
    }
    return out.str();
}

std::string heatmap_pgm(std::span<const double> values, const Partition& partition) {
    require_2d(partition);
    const std::size_t cells = partition.ordinary_count();
    if (values.size() < cells) fail(ErrorKind::Usage, "heatmap needs one value per ordinary cell");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t c = 0; c < cells; ++c) {
        if (!std::isfinite(values[c])) continue;
        lo = std::min(lo, values[c]);
        hi = std::max(hi, values[c]);
    }
    const std::size_t w = partition.counts()[0];
    const std::size_t h = partition.counts()[1];
    std::vector<int> pixels(w * h, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        const auto g = partition.grid_coords(c);
        double t = hi > lo ? (values[c] - lo) / (hi - lo) : 0.5;
        if (!std::isfinite(t)) t = 0.0;
        pixels[(h - 1 - g[1]) * w + g[0]] = static_cast<int>(std::lround(16.0 + 239.0 * t));
    }
    std::ostringstream out;
    out << "P2\n" << w << " " << h << "\n255\n";
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) out << (c ? " " : "") << pixels[r * w + c];
        out << "\n";
    }
    return out.str();
}

}  // namespace pfstab
