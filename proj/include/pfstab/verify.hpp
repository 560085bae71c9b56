#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pfstab/exec.hpp"
#include "pfstab/models.hpp"
#include "pfstab/partition.hpp"
#include "pfstab/policy.hpp"

namespace pfstab {

struct Trajectory {
    std::vector<Point> states;    ///< x_0 .. x_T (wrapped); T < horizon on escape
    std::vector<Point> controls;  ///< u_t applied at x_t, one per transition
    std::vector<Point> noises;    ///< xi_t drawn at x_t, one per transition
    bool escaped = false;         ///< left the domain before the horizon
    bool attracted = false;       ///< final state lies in the attractor region
};

/// How noise is drawn along trajectories.
struct NoiseSampling {
    const NoiseModel* quantized = nullptr;
    /// When set, each xi is uniform on [-h, h] instead of a quantized level.
    std::optional<double> continuous_halfwidth;
};

/// Closed loop x_{t+1} = T(x_t, u(cell(x_t)), xi_t); inside the attractor
/// region the policy's local controller acts (zero input by default). Stops
/// early when the state leaves the domain.
/// Throws Error(Usage) if the policy does not match the partition.
Trajectory simulate_trajectory(const SystemModel& system, const Policy& policy, const Partition& partition,
                               const NoiseSampling& noise, const Point& x0, std::size_t horizon,
                               std::uint64_t seed);

/// Policy applying `control` in every ordinary cell (open-loop baseline).
Policy constant_policy(const Partition& partition, const Point& control);

struct VerifyOptions {
    std::size_t inits_per_cell = 8;
    std::size_t horizon = 100;
    std::uint64_t seed = 0;
    std::vector<Point> sample_starts;  ///< trajectories kept in the report
};

struct VerificationReport {
    std::vector<double> cell_fraction;  ///< per ordinary cell, in [0, 1]
    double overall = 0.0;               ///< mass-weighted mean of cell_fraction
    std::size_t trajectories = 0;
    std::size_t escaped = 0;
    std::size_t inits_per_cell = 0;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    Box attractor_region;
    std::vector<Trajectory> samples;
};

/// Launches inits_per_cell stratified trajectories from every ordinary cell;
/// trajectory (cell, r) uses a stream derived from (seed, cell, r), so the
/// report is identical for serial and parallel execution. `weights` (one per
/// ordinary cell) defaults to uniform.
VerificationReport basin_fraction(const SystemModel& system, const Policy& policy, const Partition& partition,
                                  const NoiseSampling& noise, const VerifyOptions& options,
                                  std::span<const double> weights = {}, Exec exec = Exec::Parallel);

}  // namespace pfstab
