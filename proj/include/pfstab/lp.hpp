#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pfstab/exec.hpp"
#include "pfstab/sparse.hpp"
#include "pfstab/transfer.hpp"

namespace pfstab {

/// Scale-aware tolerances for the stabilization LP.
struct Tolerances {
    double feasibility = 1e-9;  ///< feas_tol = feasibility * (1 + |m|_inf)
    double gap = 1e-8;          ///< |primal - dual| <= gap * (1 + |primal|)
    double slack = 1e-7;        ///< complementary slackness, absolute
    double positivity = 1e-9;   ///< tau = positivity * max theta

    double feas_tol(std::span<const double> mass) const;
};

/// min sum_a (G^a)' theta^a
/// s.t. gamma sum_a (P1_a)' theta^a - sum_a theta^a = -m,  theta >= 0
///
/// Variables are ordered action-major: variable a*(N-1)+j is theta^a_j.
struct StabilizationLP {
    double gamma = 1.0;
    std::vector<SparseMatrix> matrices;      ///< P1_a, (N-1) x (N-1)
    std::vector<std::vector<double>> costs;  ///< G^a
    std::vector<double> mass;                ///< m
    std::optional<std::size_t> sink;

    std::size_t action_count() const { return matrices.size(); }
    std::size_t state_count() const { return mass.size(); }
    std::size_t variable_count() const { return action_count() * state_count(); }
    std::size_t constraint_count() const { return state_count(); }
};

/// Throws Error(Usage) on shape mismatch or gamma outside (0, inf).
StabilizationLP assemble_lp(const TransferEnsemble& ensemble, double gamma);

enum class LPStatus { Optimal, Infeasible, Unbounded };
std::string to_string(LPStatus status);

struct SolverTrace {
    std::size_t phase1_iterations = 0;
    std::size_t phase2_iterations = 0;
    std::size_t block_pivots = 0;
    std::size_t partial_pivots = 0;  ///< iterations that fell back to a smaller pivot block
    std::size_t factorizations = 0;
    std::vector<double> objective_history;  ///< m'V after each accepted phase-2 basis
};

struct LPSolution {
    LPStatus status = LPStatus::Infeasible;
    double gamma = 1.0;
    std::vector<std::vector<double>> theta;  ///< theta[a][j]
    std::vector<double> value;               ///< dual V
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;     ///< |gamma sum P' theta - sum theta + m|_inf
    double dual_violation = 0.0;      ///< max(V - gamma P V - G), floored at 0
    double duality_gap = 0.0;         ///< |primal - dual|
    std::vector<std::size_t> basis;   ///< action per state in the final basis (ordinary states)
    /// Infeasible only: constraint rows whose residual could not be driven
    /// to zero, and cells where every action leaks into the sink.
    std::vector<std::size_t> unresolved_rows;
    std::vector<std::size_t> leak_cells;
    SolverTrace trace;
};

struct SolverOptions {
    Tolerances tolerances;
    std::size_t max_iterations = 10000;
    bool block_pivots = true;  ///< false gives textbook single-pivot (Dantzig) simplex
    Exec exec = Exec::Parallel;
};

/// Primal simplex specialised to the occupation-measure structure.
///
/// With m > 0 every basic feasible solution holds exactly one positive
/// variable per state, so a basis is a deterministic policy and the basis
/// matrix is I - gamma P_pi'. Bases are factorised with a sparse LU; dual
/// multipliers come from the transposed solve. Phase 1 starts from an
/// artificial basis (one artificial per row, equivalent to a teleport into
/// the attractor). Pricing selects, per state, the most negative reduced
/// cost; the resulting block pivot is accepted only if the new basis stays
/// primal feasible, otherwise the block is halved down to a single pivot.
///
/// When gamma >= 1 the sink row forces every sink-leaking column to zero;
/// those columns are fixed by presolve and the sink row is dropped.
///
/// Throws Error(Solver) with an iteration summary on numerical breakdown.
LPSolution solve_lp(const StabilizationLP& lp, const SolverOptions& options = {});

/// Dense two-phase tableau simplex with Bland's rule on the same LP. An
/// independent cross-check for small instances (variable_count <= 400).
LPSolution solve_lp_dense(const StabilizationLP& lp, const Tolerances& tolerances = {});

/// Fills residual, dual violation, gap and objectives of `sol` from scratch.
void compute_lp_metrics(const StabilizationLP& lp, LPSolution& sol);

struct SlacknessReport {
    bool holds = true;
    std::vector<std::size_t> failing_states;
};

/// Every state with positive mass has an action with theta > tau whose dual
/// constraint is tight within the slack tolerance.
SlacknessReport check_complementary_slackness(const StabilizationLP& lp, const LPSolution& sol,
                                              const Tolerances& tolerances = {});

/// Reduced cost G^a_j - V_j + gamma (P1_a V)_j for every (a, j).
std::vector<std::vector<double>> reduced_costs(const StabilizationLP& lp, std::span<const double> value,
                                               Exec exec = Exec::Parallel);

struct ProbeResult {
    double gamma = 1.0;
    bool feasible = false;
    std::vector<std::size_t> leak_cells;
    std::vector<std::size_t> unresolved_rows;
};

/// Phase-1 feasibility per gamma. The largest feasible gamma brackets the
/// feasibility limit from below. Throws Error(Usage) if `gammas` is not
/// ascending.
std::vector<ProbeResult> feasibility_probe(const TransferEnsemble& ensemble, std::span<const double> gammas,
                                           const SolverOptions& options = {});

/// CPLEX LP text: `Minimize` objective, one equality row `c<j>` per state,
/// variables `t_<a>_<j>` (default bounds theta >= 0).
void export_lp(const StabilizationLP& lp, std::ostream& out);

}  // namespace pfstab
