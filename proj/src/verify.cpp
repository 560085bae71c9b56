#include "pfstab/verify.hpp"

#include <algorithm>

#include "parallel_for.hpp"
#include "pfstab/error.hpp"
#include "pfstab/rng.hpp"

namespace pfstab {

namespace {

constexpr std::uint64_t kInitStream = 0x1a17c0deULL;

void check_policy(const Policy& policy, const Partition& partition) {
    if (policy.size() != partition.restricted_size())
        fail(ErrorKind::Usage, "policy has " + std::to_string(policy.size()) + " entries, partition needs " +
                                   std::to_string(partition.restricted_size()));
    if (policy.controls.empty()) fail(ErrorKind::Usage, "policy has no control values");
}

Point draw_noise(const NoiseSampling& noise, Rng& rng) {
    if (noise.continuous_halfwidth) {
        const double h = *noise.continuous_halfwidth;
        return {-h + 2.0 * h * rng.uniform_open()};
    }
    return noise.quantized->value(noise.quantized->pick(rng.uniform_open()));
}

}  // namespace

Trajectory simulate_trajectory(const SystemModel& system, const Policy& policy, const Partition& partition,
                               const NoiseSampling& noise, const Point& x0, std::size_t horizon,
                               std::uint64_t seed) {
    check_policy(policy, partition);
    if (!noise.quantized && !noise.continuous_halfwidth) fail(ErrorKind::Usage, "no noise model given");
    if (x0.size() != partition.dimension()) fail(ErrorKind::Usage, "initial state has the wrong dimension");
    Rng rng(seed);
    Trajectory tr;
    Point x = partition.wrapped(x0);
    tr.states.push_back(x);
    for (std::size_t t = 0; t < horizon; ++t) {
        const CellIndex cell = partition.locate(x);
        if (cell.is_outside()) {
            tr.escaped = true;
            break;
        }
        const Point u = cell.value == partition.attractor_index() ? policy.local_control(x) : policy.control(cell.value);
        Point xi = draw_noise(noise, rng);
        Point next = system.step(x, u, xi);
        partition.wrap_in_place(next);
        tr.controls.push_back(u);
        tr.noises.push_back(std::move(xi));
        tr.states.push_back(next);
        x = std::move(next);
    }
    if (!tr.escaped && partition.locate(x).is_outside()) tr.escaped = true;
    tr.attracted = !tr.escaped && partition.in_attractor(x);
    return tr;
}

Policy constant_policy(const Partition& partition, const Point& control) {
    Policy p;
    p.controls = {control};
    p.action.assign(partition.restricted_size(), 0);
    p.action[partition.sink_index()] = kNoAction;
    return p;
}

VerificationReport basin_fraction(const SystemModel& system, const Policy& policy, const Partition& partition,
                                  const NoiseSampling& noise, const VerifyOptions& options,
                                  std::span<const double> weights, Exec exec) {
    check_policy(policy, partition);
    if (options.inits_per_cell == 0) fail(ErrorKind::Usage, "inits_per_cell must be at least 1");
    const std::size_t cells = partition.ordinary_count();
    if (!weights.empty() && weights.size() != cells)
        fail(ErrorKind::Usage, "weights must have one entry per ordinary cell");

    VerificationReport rep;
    rep.inits_per_cell = options.inits_per_cell;
    rep.horizon = options.horizon;
    rep.seed = options.seed;
    rep.attractor_region = partition.attractor_region();
    rep.cell_fraction.assign(cells, 0.0);
    std::vector<std::size_t> escaped(cells, 0);
    const std::uint64_t init_seed = derive_seed({options.seed, kInitStream});

    detail::parallel_for(cells, exec, [&](std::size_t c) {
        const auto starts =
            partition.cell_samples(c, options.inits_per_cell, SampleScheme::StratifiedRandom, init_seed);
        std::size_t hits = 0;
        for (std::size_t r = 0; r < starts.size(); ++r) {
            const Trajectory tr = simulate_trajectory(system, policy, partition, noise, starts[r], options.horizon,
                                                      derive_seed({options.seed, c, r}));
            hits += tr.attracted ? 1 : 0;
            escaped[c] += tr.escaped ? 1 : 0;
        }
        rep.cell_fraction[c] = static_cast<double>(hits) / static_cast<double>(starts.size());
    });

    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        const double w = weights.empty() ? 1.0 : weights[c];
        num += w * rep.cell_fraction[c];
        den += w;
        rep.escaped += escaped[c];
    }
    rep.overall = den > 0.0 ? num / den : 0.0;
    rep.trajectories = cells * options.inits_per_cell;
    for (std::size_t k = 0; k < options.sample_starts.size(); ++k)
        rep.samples.push_back(simulate_trajectory(system, policy, partition, noise, options.sample_starts[k],
                                                  options.horizon, derive_seed({options.seed, ~std::uint64_t{0}, k})));
    return rep;
}

}  // namespace pfstab
