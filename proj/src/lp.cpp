#include "pfstab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "linalg.hpp"
#include "parallel_for.hpp"
#include "pfstab/error.hpp"
#include "pfstab/text.hpp"

namespace pfstab {

double Tolerances::feas_tol(std::span<const double> mass) const {
    return feasibility * (1.0 + detail::max_abs(mass));
}

std::string to_string(LPStatus status) {
    switch (status) {
        case LPStatus::Optimal: return "optimal";
        case LPStatus::Infeasible: return "infeasible";
        case LPStatus::Unbounded: return "unbounded";
    }
    return "unknown";
}

StabilizationLP assemble_lp(const TransferEnsemble& ensemble, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) fail(ErrorKind::Usage, "gamma must be positive and finite");
    const std::size_t n = ensemble.restricted_size();
    if (ensemble.action_count() == 0 || ensemble.costs.size() != ensemble.action_count())
        fail(ErrorKind::Usage, "ensemble has inconsistent action data");
    for (std::size_t a = 0; a < ensemble.action_count(); ++a) {
        if (ensemble.restricted[a].rows() != n || ensemble.restricted[a].cols() != n || ensemble.costs[a].size() != n)
            fail(ErrorKind::Usage, "action " + std::to_string(a) + " has mismatched LP data");
    }
    StabilizationLP lp;
    lp.gamma = gamma;
    lp.matrices = ensemble.restricted;
    lp.costs = ensemble.costs;
    lp.mass = ensemble.mass;
    lp.sink = ensemble.sink;
    return lp;
}

std::vector<std::vector<double>> reduced_costs(const StabilizationLP& lp, std::span<const double> value, Exec exec) {
    const std::size_t n = lp.state_count();
    std::vector<std::vector<double>> r(lp.action_count(), std::vector<double>(n, 0.0));
    detail::parallel_for(n, exec, [&](std::size_t j) {
        for (std::size_t a = 0; a < lp.action_count(); ++a) {
            const auto cols = lp.matrices[a].row_cols(j);
            const auto vals = lp.matrices[a].row_values(j);
            double pv = 0.0;
            for (std::size_t k = 0; k < cols.size(); ++k) pv += vals[k] * value[cols[k]];
            r[a][j] = lp.costs[a][j] - value[j] + lp.gamma * pv;
        }
    });
    return r;
}

void compute_lp_metrics(const StabilizationLP& lp, LPSolution& sol) {
    const std::size_t n = lp.state_count();
    sol.primal_objective = 0.0;
    std::vector<double> residual(lp.mass);
    for (std::size_t a = 0; a < lp.action_count(); ++a) {
        const auto flow = lp.matrices[a].multiply_transposed(sol.theta[a]);
        for (std::size_t j = 0; j < n; ++j) {
            residual[j] += lp.gamma * flow[j] - sol.theta[a][j];
            sol.primal_objective += lp.costs[a][j] * sol.theta[a][j];
        }
    }
    sol.primal_residual = detail::max_abs(residual);
    sol.dual_objective = std::inner_product(lp.mass.begin(), lp.mass.end(), sol.value.begin(), 0.0);
    sol.duality_gap = std::abs(sol.primal_objective - sol.dual_objective);
    const auto r = reduced_costs(lp, sol.value, Exec::Serial);
    sol.dual_violation = 0.0;
    for (const auto& ra : r)
        for (double v : ra) sol.dual_violation = std::max(sol.dual_violation, -v);
}

SlacknessReport check_complementary_slackness(const StabilizationLP& lp, const LPSolution& sol,
                                              const Tolerances& tol) {
    SlacknessReport rep;
    double theta_max = 0.0;
    for (const auto& t : sol.theta) theta_max = std::max(theta_max, detail::max_abs(t));
    const double tau = tol.positivity * theta_max;
    const auto r = reduced_costs(lp, sol.value, Exec::Serial);
    for (std::size_t j = 0; j < lp.state_count(); ++j) {
        if (!(lp.mass[j] > 0.0)) continue;
        bool found = false;
        for (std::size_t a = 0; a < lp.action_count() && !found; ++a)
            found = sol.theta[a][j] > tau && std::abs(r[a][j]) <= tol.slack;
        if (!found) {
            rep.holds = false;
            rep.failing_states.push_back(j);
        }
    }
    return rep;
}

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

/// The LP after presolve: states kept, and per state the admissible actions.
/// Action index M (== lp.action_count()) denotes the artificial column.
class MdpSimplex {
public:
    MdpSimplex(const StabilizationLP& lp, const SolverOptions& options)
        : lp_(lp), opt_(options), m_(lp.action_count()), artificial_(m_) {
        const std::size_t n1 = lp.state_count();
        drop_sink_ = lp.sink.has_value() && lp.gamma >= 1.0;
        local_of_.assign(n1, kNone);
        for (std::size_t j = 0; j < n1; ++j) {
            if (drop_sink_ && j == *lp.sink) continue;
            local_of_[j] = states_.size();
            states_.push_back(j);
        }
        actions_.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const std::size_t j = states_[i];
            for (std::size_t a = 0; a < m_; ++a) {
                if (drop_sink_ && lp.matrices[a].at(j, *lp.sink) > 0.0) continue;
                actions_[i].push_back(a);
            }
            if (actions_[i].empty()) leak_cells_.push_back(j);
        }
        mass_.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) mass_[i] = lp.mass[states_[i]];
        feas_tol_ = opt_.tolerances.feas_tol(lp.mass);
    }

    const std::vector<std::size_t>& leak_cells() const { return leak_cells_; }

    /// Returns true when a basis free of artificials was found.
    bool phase1() {
        if (!leak_cells_.empty()) {
            unresolved_ = leak_cells_;
            return false;
        }
        policy_.assign(states_.size(), artificial_);
        if (lp_.gamma < 1.0) {
            // Every policy is proper; start from the cheapest action per state.
            for (std::size_t i = 0; i < states_.size(); ++i) {
                std::size_t best = actions_[i].front();
                for (std::size_t a : actions_[i])
                    if (lp_.costs[a][states_[i]] < lp_.costs[best][states_[i]]) best = a;
                policy_[i] = best;
            }
            current_ = evaluate(policy_, /*phase=*/2);
            if (!current_.ok) fail(ErrorKind::Solver, "initial basis is not feasible for gamma < 1" + summary());
            return true;
        }
        current_ = evaluate(policy_, 1);
        run(1);
        for (std::size_t i = 0; i < states_.size(); ++i)
            if (policy_[i] == artificial_) unresolved_.push_back(states_[i]);
        return unresolved_.empty();
    }

    void phase2() {
        current_ = evaluate(policy_, 2);
        if (!current_.ok) fail(ErrorKind::Solver, "phase-1 basis lost feasibility" + summary());
        trace_.objective_history.push_back(current_.objective);
        run(2);
    }

    LPSolution solution() const {
        LPSolution sol;
        sol.gamma = lp_.gamma;
        sol.trace = trace_;
        sol.leak_cells = leak_cells_;
        sol.unresolved_rows = unresolved_;
        return sol;
    }

    void fill_optimal(LPSolution& sol) const {
        const std::size_t n1 = lp_.state_count();
        sol.status = LPStatus::Optimal;
        sol.theta.assign(m_, std::vector<double>(n1, 0.0));
        sol.value.assign(n1, 0.0);
        sol.basis.assign(n1, kNone);
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const std::size_t j = states_[i];
            sol.theta[policy_[i]][j] = current_.theta[i];
            sol.value[j] = current_.value[i];
            sol.basis[j] = policy_[i];
        }
        if (drop_sink_) sol.value[*lp_.sink] = sink_value(sol.value);
        compute_lp_metrics(lp_, sol);
    }

private:
    struct Evaluation {
        bool ok = false;
        std::vector<double> value;
        std::vector<double> theta;
        double objective = 0.0;
    };

    double cost(std::size_t i, std::size_t a, int phase) const {
        if (a == artificial_) return phase == 1 ? 1.0 : std::numeric_limits<double>::infinity();
        return phase == 1 ? 0.0 : lp_.costs[a][states_[i]];
    }

    Evaluation evaluate(const std::vector<std::size_t>& policy, int phase) {
        ++trace_.factorizations;
        std::vector<std::vector<Entry>> rows(states_.size());
        std::vector<double> c(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) {
            c[i] = cost(i, policy[i], phase);
            if (policy[i] == artificial_) continue;
            const auto& p = lp_.matrices[policy[i]];
            const auto cols = p.row_cols(states_[i]);
            const auto vals = p.row_values(states_[i]);
            for (std::size_t k = 0; k < cols.size(); ++k) rows[i].push_back({local_of_[cols[k]], vals[k]});
        }
        Evaluation ev;
        try {
            const detail::ShiftedSolver solver(SparseMatrix::from_rows(states_.size(), rows), lp_.gamma);
            ev.value = solver.solve(c);
            ev.theta = solver.solve_transposed(mass_);
        } catch (const Error&) {
            return ev;
        }
        // A basis is primal feasible iff theta >= 0; with m > 0 that forces
        // theta >= m, so anything below m (beyond rounding) marks an improper policy.
        const double slack = 1e-9 * (1.0 + detail::max_abs(ev.theta));
        for (std::size_t i = 0; i < states_.size(); ++i)
            if (!(ev.theta[i] >= mass_[i] - slack)) return ev;
        ev.objective = std::inner_product(mass_.begin(), mass_.end(), ev.value.begin(), 0.0);
        ev.ok = std::isfinite(ev.objective);
        return ev;
    }

    struct Candidate {
        std::size_t state;
        std::size_t action;
        double reduced;
    };

    std::vector<Candidate> price(int phase) const {
        const std::size_t n = states_.size();
        std::vector<Candidate> best(n, Candidate{kNone, kNone, 0.0});
        const auto& v = current_.value;
        const double threshold = std::max(0.5 * feas_tol_, 1e-13 * (1.0 + detail::max_abs(v)));
        detail::parallel_for(n, opt_.exec, [&](std::size_t i) {
            const std::size_t j = states_[i];
            double best_r = -threshold;
            std::size_t best_a = kNone;
            for (std::size_t a : actions_[i]) {
                if (a == policy_[i]) continue;
                const auto cols = lp_.matrices[a].row_cols(j);
                const auto vals = lp_.matrices[a].row_values(j);
                double pv = 0.0;
                for (std::size_t k = 0; k < cols.size(); ++k) pv += vals[k] * v[local_of_[cols[k]]];
                const double r = cost(i, a, phase) - v[i] + lp_.gamma * pv;
                if (r < best_r) {
                    best_r = r;
                    best_a = a;
                }
            }
            if (best_a != kNone) best[i] = Candidate{i, best_a, best_r};
        });
        std::vector<Candidate> out;
        for (const auto& c : best)
            if (c.state != kNone) out.push_back(c);
        std::stable_sort(out.begin(), out.end(),
                         [](const Candidate& x, const Candidate& y) { return x.reduced < y.reduced; });
        return out;
    }

    void run(int phase) {
        std::size_t& iterations = phase == 1 ? trace_.phase1_iterations : trace_.phase2_iterations;
        while (true) {
            if (phase == 1 && std::none_of(policy_.begin(), policy_.end(),
                                           [&](std::size_t a) { return a == artificial_; }))
                return;
            if (iterations >= opt_.max_iterations)
                fail(ErrorKind::Solver, "iteration limit reached" + summary());
            const auto candidates = price(phase);
            if (candidates.empty()) return;
            ++iterations;

            std::size_t block = opt_.block_pivots ? candidates.size() : 1;
            while (true) {
                auto trial = policy_;
                for (std::size_t k = 0; k < block; ++k) trial[candidates[k].state] = candidates[k].action;
                Evaluation ev = evaluate(trial, phase);
                const double allowed = current_.objective + 1e-12 * (1.0 + std::abs(current_.objective));
                if (ev.ok && ev.objective <= allowed) {
                    const bool progressed = ev.objective < current_.objective;
                    policy_ = std::move(trial);
                    current_ = std::move(ev);
                    if (block > 1) ++trace_.block_pivots;
                    if (phase == 2) trace_.objective_history.push_back(current_.objective);
                    if (!progressed && phase == 2) return;  // stalled on rounding
                    break;
                }
                if (block == 1) {
                    if (!ev.ok)
                        fail(ErrorKind::Solver, "single pivot on state " + std::to_string(states_[candidates[0].state]) +
                                                    " produced an infeasible basis" + summary());
                    return;  // no strict improvement left above rounding
                }
                block = std::max<std::size_t>(1, block / 2);
                ++trace_.partial_pivots;
            }
        }
    }

    /// Dual value at the dropped sink: any value large enough to satisfy the
    /// dual rows of the leaking columns (m_sink = 0, so the objective does
    /// not depend on it).
    double sink_value(const std::vector<double>& value) const {
        const std::size_t s = *lp_.sink;
        double v = 0.0;
        for (std::size_t a = 0; a < m_; ++a) {
            const auto& p = lp_.matrices[a];
            for (std::size_t j = 0; j < lp_.state_count(); ++j) {
                if (j == s) continue;
                const double leak = p.at(j, s);
                if (leak <= 0.0) continue;
                double pv = 0.0;
                const auto cols = p.row_cols(j);
                const auto vals = p.row_values(j);
                for (std::size_t k = 0; k < cols.size(); ++k)
                    if (cols[k] != s) pv += vals[k] * value[cols[k]];
                v = std::max(v, (value[j] - lp_.gamma * pv - lp_.costs[a][j]) / (lp_.gamma * leak));
            }
        }
        return v;
    }

    std::string summary() const {
        return " (phase-1 iterations " + std::to_string(trace_.phase1_iterations) + ", phase-2 iterations " +
               std::to_string(trace_.phase2_iterations) + ", factorizations " +
               std::to_string(trace_.factorizations) + ", gamma " + format_double(lp_.gamma) + ")";
    }

    const StabilizationLP& lp_;
    SolverOptions opt_;
    std::size_t m_;
    std::size_t artificial_;
    bool drop_sink_ = false;
    std::vector<std::size_t> states_;
    std::vector<std::size_t> local_of_;
    std::vector<std::vector<std::size_t>> actions_;
    std::vector<double> mass_;
    std::vector<std::size_t> leak_cells_;
    std::vector<std::size_t> unresolved_;
    std::vector<std::size_t> policy_;
    Evaluation current_;
    SolverTrace trace_;
    double feas_tol_ = 0.0;
};

void check_lp(const StabilizationLP& lp) {
    const std::size_t n = lp.state_count();
    if (lp.action_count() == 0 || lp.costs.size() != lp.action_count())
        fail(ErrorKind::Usage, "LP has inconsistent action data");
    for (std::size_t a = 0; a < lp.action_count(); ++a)
        if (lp.matrices[a].rows() != n || lp.matrices[a].cols() != n || lp.costs[a].size() != n)
            fail(ErrorKind::Usage, "LP action " + std::to_string(a) + " has mismatched shapes");
    for (std::size_t j = 0; j < n; ++j) {
        const bool is_sink = lp.sink && *lp.sink == j;
        if (!(lp.mass[j] > 0.0) && !(is_sink && lp.mass[j] == 0.0))
            fail(ErrorKind::Usage, "LP mass must be positive on every non-sink state (state " + std::to_string(j) + ")");
        for (std::size_t a = 0; a < lp.action_count(); ++a)
            if (!(lp.costs[a][j] >= 0.0)) fail(ErrorKind::Usage, "LP costs must be nonnegative");
    }
}

}  // namespace

LPSolution solve_lp(const StabilizationLP& lp, const SolverOptions& options) {
    check_lp(lp);
    MdpSimplex simplex(lp, options);
    if (!simplex.phase1()) {
        LPSolution sol = simplex.solution();
        sol.status = LPStatus::Infeasible;
        return sol;
    }
    simplex.phase2();
    LPSolution sol = simplex.solution();
    simplex.fill_optimal(sol);
    return sol;
}

std::vector<ProbeResult> feasibility_probe(const TransferEnsemble& ensemble, std::span<const double> gammas,
                                           const SolverOptions& options) {
    if (!std::is_sorted(gammas.begin(), gammas.end()))
        fail(ErrorKind::Usage, "feasibility probe needs gammas in ascending order");
    std::vector<ProbeResult> out;
    for (double gamma : gammas) {
        const StabilizationLP lp = assemble_lp(ensemble, gamma);
        check_lp(lp);
        MdpSimplex simplex(lp, options);
        ProbeResult r;
        r.gamma = gamma;
        r.feasible = simplex.phase1();
        const LPSolution s = simplex.solution();
        r.leak_cells = s.leak_cells;
        r.unresolved_rows = s.unresolved_rows;
        out.push_back(std::move(r));
    }
    return out;
}

void export_lp(const StabilizationLP& lp, std::ostream& out) {
    const std::size_t n = lp.state_count();
    const std::size_t m = lp.action_count();
    auto var = [&](std::size_t a, std::size_t j) { return "t_" + std::to_string(a) + "_" + std::to_string(j); };
    out << "\\ stabilization LP: gamma = " << format_double(lp.gamma) << ", " << m << " actions, " << n
        << " states\n";
    out << "Minimize\n obj:";
    std::size_t on_line = 0;
    auto term = [&](double coef, const std::string& name) {
        out << (coef < 0 ? " - " : " + ") << format_double(std::abs(coef)) << " " << name;
        if (++on_line % 4 == 0) out << "\n ";
    };
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t j = 0; j < n; ++j)
            if (lp.costs[a][j] != 0.0) term(lp.costs[a][j], var(a, j));
    out << "\nSubject To\n";
    // Row i: sum_{a,j} (gamma P_a[j,i] - delta_ij) theta^a_j = -m_i
    std::vector<std::vector<std::pair<std::string, double>>> rows(n);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto cols = lp.matrices[a].row_cols(j);
            const auto vals = lp.matrices[a].row_values(j);
            double diag = -1.0;
            for (std::size_t k = 0; k < cols.size(); ++k) {
                if (cols[k] == j)
                    diag += lp.gamma * vals[k];
                else
                    rows[cols[k]].emplace_back(var(a, j), lp.gamma * vals[k]);
            }
            if (diag != 0.0) rows[j].emplace_back(var(a, j), diag);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out << " c" << i << ":";
        on_line = 0;
        for (const auto& [name, coef] : rows[i]) term(coef, name);
        if (rows[i].empty()) out << " 0 " << var(0, i);
        out << " = " << format_double(-lp.mass[i]) << "\n";
    }
    out << "End\n";
}

}  // namespace pfstab
