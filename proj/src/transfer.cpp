#include "pfstab/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "parallel_for.hpp"
#include "pfstab/error.hpp"
#include "pfstab/text.hpp"

namespace pfstab {

namespace {

std::string where(std::size_t cell, std::size_t sample, std::size_t action, std::size_t noise) {
    return "cell " + std::to_string(cell) + ", sample " + std::to_string(sample) + ", action " +
           std::to_string(action) + ", noise " + std::to_string(noise);
}

std::vector<Entry> histogram_row(std::vector<std::size_t>& hits, std::size_t samples) {
    std::sort(hits.begin(), hits.end());
    std::vector<Entry> row;
    const double denom = static_cast<double>(samples);
    for (std::size_t k = 0; k < hits.size();) {
        std::size_t e = k;
        while (e < hits.size() && hits[e] == hits[k]) ++e;
        row.push_back({hits[k], static_cast<double>(e - k) / denom});
        k = e;
    }
    return row;
}

}  // namespace

std::string to_string(OutOfDomain mode) { return mode == OutOfDomain::Sink ? "sink" : "clamp"; }

OutOfDomain parse_out_of_domain(const std::string& name) {
    if (name == "sink") return OutOfDomain::Sink;
    if (name == "clamp") return OutOfDomain::Clamp;
    fail(ErrorKind::Config, "unknown out_of_domain mode '" + name + "' (expected sink or clamp)");
}

SampleSet make_sample_set(const Partition& partition, std::size_t per_cell, SampleScheme scheme,
                          std::uint64_t seed) {
    if (per_cell == 0) fail(ErrorKind::Usage, "samples_per_cell must be at least 1");
    SampleSet s{per_cell, scheme, seed, {}};
    s.points.reserve(partition.ordinary_count());
    for (std::size_t c = 0; c < partition.ordinary_count(); ++c)
        s.points.push_back(partition.cell_samples(c, per_cell, scheme, seed));
    return s;
}

SparseMatrix build_pf_matrix(const SystemModel& system, const Partition& partition, const Point& control,
                             const Point& noise, const SampleSet& samples, Exec exec, std::size_t action_id,
                             std::size_t noise_id, OutOfDomain out_of_domain,
                             std::vector<double>* exit_fraction) {
    const std::size_t n = partition.index_count();
    const std::size_t cells = partition.ordinary_count();
    if (samples.points.size() != cells) fail(ErrorKind::Usage, "sample set does not match the partition");

    std::vector<std::vector<Entry>> rows(n);
    if (exit_fraction) exit_fraction->assign(cells, 0.0);
    detail::parallel_for(cells, exec, [&](std::size_t i) {
        const auto& pts = samples.points[i];
        std::size_t exits = 0;
        std::vector<std::size_t> hits;
        hits.reserve(pts.size());
        Point next(system.state_dim());
        for (std::size_t s = 0; s < pts.size(); ++s) {
            try {
                system.step(pts[s], control, noise, next);
            } catch (const Error& e) {
                fail(ErrorKind::Numeric, e.what() + std::string(" at ") + where(i, s, action_id, noise_id));
            }
            for (double v : next)
                if (!std::isfinite(v))
                    fail(ErrorKind::Numeric, "non-finite image at " + where(i, s, action_id, noise_id));
            CellIndex dest = partition.locate(next);
            if (dest.is_outside()) {
                ++exits;
                if (out_of_domain == OutOfDomain::Clamp) {
                    partition.clamp_in_place(next);
                    dest = partition.locate(next);
                }
            }
            hits.push_back(dest.is_outside() ? partition.sink_index() : dest.value);
        }
        rows[i] = histogram_row(hits, pts.size());
        if (exit_fraction) (*exit_fraction)[i] = static_cast<double>(exits) / static_cast<double>(pts.size());
    });
    rows[partition.sink_index()] = {{partition.sink_index(), 1.0}};
    rows[partition.attractor_index()] = {{partition.attractor_index(), 1.0}};
    return SparseMatrix::from_rows(n, rows);
}

SparseMatrix build_pf_matrix(const SystemModel& system, const Partition& partition, const Point& control,
                             const Point& noise, std::size_t samples_per_cell, SampleScheme scheme,
                             std::uint64_t seed, Exec exec) {
    return build_pf_matrix(system, partition, control, noise,
                           make_sample_set(partition, samples_per_cell, scheme, seed), exec);
}

SparseMatrix weighted_sum(const std::vector<SparseMatrix>& matrices, const std::vector<double>& weights,
                          Exec exec) {
    if (matrices.empty() || matrices.size() != weights.size())
        fail(ErrorKind::Usage, "weighted sum needs one weight per matrix");
    const std::size_t rows = matrices.front().rows();
    const std::size_t cols = matrices.front().cols();
    for (const auto& m : matrices)
        if (m.rows() != rows || m.cols() != cols) fail(ErrorKind::Usage, "matrices differ in shape");
    if (matrices.size() == 1 && weights.front() == 1.0) return matrices.front();

    std::vector<std::vector<Entry>> out(rows);
    detail::parallel_for(rows, exec, [&](std::size_t i) {
        // (col, term index) ordering keeps the summation order fixed.
        std::vector<std::pair<std::size_t, std::size_t>> keys;
        std::vector<double> terms;
        for (std::size_t l = 0; l < matrices.size(); ++l) {
            const auto cols_i = matrices[l].row_cols(i);
            const auto vals_i = matrices[l].row_values(i);
            for (std::size_t e = 0; e < cols_i.size(); ++e) {
                keys.emplace_back(cols_i[e], terms.size());
                terms.push_back(weights[l] * vals_i[e]);
            }
        }
        std::sort(keys.begin(), keys.end());
        auto& row = out[i];
        for (std::size_t k = 0; k < keys.size();) {
            double s = 0.0;
            std::size_t e = k;
            for (; e < keys.size() && keys[e].first == keys[k].first; ++e) s += terms[keys[e].second];
            if (s != 0.0) row.push_back({keys[k].first, s});
            k = e;
        }
    });
    return SparseMatrix::from_rows(cols, out);
}

SparseMatrix average_over_noise(const std::vector<SparseMatrix>& matrices, const NoiseModel& noise, Exec exec) {
    if (matrices.size() != noise.size())
        fail(ErrorKind::Usage, "got " + std::to_string(matrices.size()) + " matrices for " +
                                   std::to_string(noise.size()) + " noise values");
    return weighted_sum(matrices, noise.probs(), exec);
}

SparseMatrix restrict_to_complement(const SparseMatrix& full) {
    if (full.rows() != full.cols() || full.rows() < 2) fail(ErrorKind::Usage, "restriction needs a square matrix");
    std::vector<std::size_t> keep(full.rows() - 1);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    return full.principal_submatrix(keep);
}

std::string to_string(CostQuadrature q) { return q == CostQuadrature::Samples ? "samples" : "center"; }

CostQuadrature parse_cost_quadrature(const std::string& name) {
    if (name == "samples") return CostQuadrature::Samples;
    if (name == "center") return CostQuadrature::Center;
    fail(ErrorKind::Config, "unknown cost quadrature '" + name + "'");
}

std::vector<std::vector<double>> build_cost_table(const StageCost& cost, const Partition& partition,
                                                  const ControlGrid& controls, const NoiseModel& noise,
                                                  const SampleSet& samples, double sink_penalty,
                                                  CostQuadrature quadrature, Exec exec) {
    const std::size_t cells = partition.ordinary_count();
    if (samples.points.size() != cells) fail(ErrorKind::Usage, "sample set does not match the partition");
    if (!(sink_penalty >= 0.0) || !std::isfinite(sink_penalty))
        fail(ErrorKind::Config, "sink penalty must be finite and nonnegative");

    std::vector<std::vector<double>> table(controls.size(), std::vector<double>(partition.restricted_size(), 0.0));
    detail::parallel_for(cells, exec, [&](std::size_t j) {
        std::vector<Point> center;
        const std::vector<Point>* pts = &samples.points[j];
        if (quadrature == CostQuadrature::Center) {
            center.push_back(partition.cell_center(j));
            pts = &center;
        }
        for (std::size_t a = 0; a < controls.size(); ++a) {
            double g_a = 0.0;
            for (std::size_t l = 0; l < noise.size(); ++l) {
                double mean = 0.0;
                for (const Point& p : *pts) {
                    const double g = cost(p, controls[a], noise.value(l));
                    if (!(g >= 0.0) || !std::isfinite(g))
                        fail(ErrorKind::Model, "stage cost " + format_double(g) + " at cell " + std::to_string(j) +
                                                   ", action " + std::to_string(a) + " is negative or not finite");
                    mean += g;
                }
                g_a += noise.prob(l) * (mean / static_cast<double>(pts->size()));
            }
            table[a][j] = g_a;
        }
    });
    for (auto& g : table) g[partition.sink_index()] = sink_penalty;
    return table;
}

void TransferEnsemble::validate() const {
    const std::size_t m = action_count();
    const std::size_t n1 = restricted_size();
    auto bad = [](const std::string& what) { fail(ErrorKind::Validation, what); };
    if (m == 0) bad("ensemble has no actions");
    if (full.size() != m || costs.size() != m) bad("ensemble action counts disagree");
    if (!controls.empty() && controls.size() != m) bad("ensemble control list length disagrees with action count");
    if (sink && *sink >= n1) bad("sink index out of range");
    for (std::size_t j = 0; j < n1; ++j) {
        if (!(mass[j] >= 0.0) || !std::isfinite(mass[j])) bad("mass entry " + std::to_string(j) + " is invalid");
        const bool is_sink = sink && *sink == j;
        if (is_sink && mass[j] != 0.0) bad("sink mass must be zero");
        if (!is_sink && !(mass[j] > 0.0)) bad("mass entry " + std::to_string(j) + " must be positive");
    }
    for (std::size_t a = 0; a < m; ++a) {
        const auto& f = full[a];
        const auto& r = restricted[a];
        const std::string tag = "action " + std::to_string(a);
        if (f.rows() != n1 + 1 || f.cols() != n1 + 1) bad(tag + ": full matrix has wrong shape");
        if (r.rows() != n1 || r.cols() != n1) bad(tag + ": restricted matrix has wrong shape");
        if (costs[a].size() != n1) bad(tag + ": cost vector has wrong length");
        for (std::size_t j = 0; j < n1; ++j)
            if (!(costs[a][j] >= 0.0) || !std::isfinite(costs[a][j]))
                bad(tag + ": cost at " + std::to_string(j) + " is negative or not finite");
        for (double v : f.values())
            if (!(v >= 0.0 && v <= 1.0)) bad(tag + ": full matrix entry outside [0,1]");
        for (std::size_t i = 0; i < f.rows(); ++i)
            if (std::abs(f.row_sum(i) - 1.0) > 1e-12)
                bad(tag + ": row " + std::to_string(i) + " of the full matrix sums to " + format_double(f.row_sum(i)));
        for (std::size_t i = 0; i < r.rows(); ++i)
            if (r.row_sum(i) > 1.0 + 1e-12) bad(tag + ": restricted row " + std::to_string(i) + " exceeds one");
        if (!(restrict_to_complement(f) == r)) bad(tag + ": restricted matrix is not the restriction of the full one");
        if (std::abs(f.at(n1, n1) - 1.0) > 1e-12) bad(tag + ": attractor row is not absorbing");
        if (sink && std::abs(f.at(*sink, *sink) - 1.0) > 1e-12) bad(tag + ": sink row is not a unit self-loop");
    }
}

TransferEnsemble ensemble_from_restricted(std::vector<SparseMatrix> restricted,
                                          std::vector<std::vector<double>> costs, std::vector<double> mass) {
    TransferEnsemble e;
    const std::size_t n1 = mass.size();
    for (const auto& r : restricted) {
        if (r.rows() != n1 || r.cols() != n1) fail(ErrorKind::Usage, "restricted matrix shape mismatch");
        std::vector<std::vector<Entry>> rows(n1 + 1);
        for (std::size_t i = 0; i < n1; ++i) {
            const auto cols = r.row_cols(i);
            const auto vals = r.row_values(i);
            for (std::size_t k = 0; k < cols.size(); ++k) rows[i].push_back({cols[k], vals[k]});
            const double rest = 1.0 - r.row_sum(i);
            if (rest > 0.0) rows[i].push_back({n1, rest});
        }
        rows[n1] = {{n1, 1.0}};
        e.full.push_back(SparseMatrix::from_rows(n1 + 1, rows));
    }
    e.restricted = std::move(restricted);
    // Completing with 1 - rowsum can round the row sum; rebuild the restricted
    // block from the full matrix so the two stay consistent by construction.
    for (std::size_t a = 0; a < e.full.size(); ++a) e.restricted[a] = restrict_to_complement(e.full[a]);
    e.costs = std::move(costs);
    e.mass = std::move(mass);
    e.validate();
    return e;
}

TransferEnsemble build_ensemble(const SystemModel& system, const StageCost& cost, const Partition& partition,
                                const ControlGrid& controls, const NoiseModel& noise, const BuildOptions& options,
                                Exec exec) {
    const SampleSet samples = make_sample_set(partition, options.samples_per_cell, options.scheme, options.seed);
    TransferEnsemble e;
    e.controls = controls.values();
    e.sink = partition.sink_index();
    std::vector<std::vector<double>> exits(controls.size(), std::vector<double>(partition.ordinary_count(), 0.0));
    for (std::size_t a = 0; a < controls.size(); ++a) {
        std::vector<SparseMatrix> per_noise;
        per_noise.reserve(noise.size());
        std::vector<double> frac;
        for (std::size_t l = 0; l < noise.size(); ++l) {
            per_noise.push_back(build_pf_matrix(system, partition, controls[a], noise.value(l), samples, exec, a, l,
                                                options.out_of_domain, &frac));
            for (std::size_t j = 0; j < frac.size(); ++j) exits[a][j] += noise.prob(l) * frac[j];
            const auto& p = per_noise.back();
            for (std::size_t i = 0; i < p.rows(); ++i)
                e.max_component_row_defect = std::max(e.max_component_row_defect, std::abs(p.row_sum(i) - 1.0));
        }
        e.full.push_back(average_over_noise(per_noise, noise, exec));
        e.restricted.push_back(restrict_to_complement(e.full.back()));
    }
    e.costs = build_cost_table(cost, partition, controls, noise, samples, options.sink_penalty, options.quadrature, exec);
    if (options.out_of_domain == OutOfDomain::Clamp)
        for (std::size_t a = 0; a < controls.size(); ++a)
            for (std::size_t j = 0; j < partition.ordinary_count(); ++j)
                e.costs[a][j] += options.sink_penalty * exits[a][j];
    e.mass.assign(partition.restricted_size(),
                  options.mass == MassChoice::CellVolume ? partition.cell_volume() : 1.0);
    e.mass[partition.sink_index()] = 0.0;
    e.provenance.grid_hash = partition.grid_hash();
    e.provenance.build_hash = options.build_hash;
    e.provenance.sample_scheme = to_string(options.scheme);
    e.provenance.samples_per_cell = options.samples_per_cell;
    e.provenance.seed = options.seed;
    e.provenance.model = system.description();
    e.provenance.out_of_domain = to_string(options.out_of_domain);
    e.validate();
    return e;
}

}  // namespace pfstab
