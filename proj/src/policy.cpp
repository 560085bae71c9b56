#include "pfstab/policy.hpp"

#include <algorithm>
#include <numeric>

#include "linalg.hpp"
#include "pfstab/error.hpp"

namespace pfstab {

Point Policy::local_control(std::span<const double> state) const {
    const std::size_t du = controls.front().size();
    Point u(du, 0.0);
    if (local_gain.empty()) return u;
    if (local_gain.size() != du * state.size()) fail(ErrorKind::Usage, "local gain has the wrong shape");
    for (std::size_t i = 0; i < du; ++i) {
        double lo = controls.front()[i];
        double hi = lo;
        for (const Point& c : controls) {
            lo = std::min(lo, c[i]);
            hi = std::max(hi, c[i]);
        }
        double v = 0.0;
        for (std::size_t k = 0; k < state.size(); ++k) v -= local_gain[i * state.size() + k] * state[k];
        u[i] = std::clamp(v, lo, hi);
    }
    return u;
}

Policy extract_policy(const LPSolution& solution, const TransferEnsemble& ensemble, double tau,
                      const Tolerances& tolerances) {
    if (solution.status != LPStatus::Optimal)
        fail(ErrorKind::Usage, "cannot extract a policy from a " + to_string(solution.status) + " LP solution");
    const std::size_t n = ensemble.restricted_size();
    const std::size_t m = ensemble.action_count();
    if (solution.theta.size() != m) fail(ErrorKind::Usage, "LP solution does not match the ensemble");
    double theta_max = 0.0;
    for (const auto& t : solution.theta) {
        if (t.size() != n) fail(ErrorKind::Usage, "LP solution does not match the ensemble");
        theta_max = std::max(theta_max, detail::max_abs(t));
    }
    if (tau < 0.0) tau = tolerances.positivity * theta_max;

    Policy policy;
    policy.controls = ensemble.controls;
    if (policy.controls.size() != m) {
        // Toy ensembles carry no control values; use the action index.
        policy.controls.clear();
        for (std::size_t a = 0; a < m; ++a) policy.controls.push_back({static_cast<double>(a)});
    }
    policy.action.assign(n, kNoAction);
    for (std::size_t j = 0; j < n; ++j) {
        if (ensemble.sink && *ensemble.sink == j) continue;
        for (std::size_t a = 0; a < m; ++a) {
            if (solution.theta[a][j] > tau) {
                policy.action[j] = a;
                break;
            }
        }
        if (policy.action[j] == kNoAction)
            fail(ErrorKind::DegenerateSolution, "no action has positive occupation at cell " + std::to_string(j));
    }
    return policy;
}

SparseMatrix closed_loop_matrix(const Policy& policy, const TransferEnsemble& ensemble) {
    const std::size_t n = ensemble.restricted_size();
    if (policy.size() != n) fail(ErrorKind::Usage, "policy does not match the ensemble");
    std::vector<std::vector<Entry>> rows(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t a = policy.action[j];
        if (a == kNoAction) {
            if (!(ensemble.sink && *ensemble.sink == j))
                fail(ErrorKind::Usage, "policy has no action at cell " + std::to_string(j));
            a = 0;  // every action shares the sink self-loop
        }
        if (a >= ensemble.action_count()) fail(ErrorKind::Usage, "policy action out of range");
        const auto& p = ensemble.restricted[a];
        const auto cols = p.row_cols(j);
        const auto vals = p.row_values(j);
        for (std::size_t k = 0; k < cols.size(); ++k) rows[j].push_back({cols[k], vals[k]});
    }
    return SparseMatrix::from_rows(n, rows);
}

std::vector<double> closed_loop_costs(const Policy& policy, const TransferEnsemble& ensemble) {
    const std::size_t n = ensemble.restricted_size();
    if (policy.size() != n) fail(ErrorKind::Usage, "policy does not match the ensemble");
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = policy.action[j] == kNoAction ? 0 : policy.action[j];
        g[j] = ensemble.costs[a][j];
    }
    return g;
}

CertifiedMeasure lyapunov_measure(const SparseMatrix& closed_loop, std::span<const double> mass, double gamma,
                                  const CertificateOptions& options) {
    return verify_stability(closed_loop, mass, gamma, options);
}

PolicyEvaluation evaluate_policy(const Policy& policy, const TransferEnsemble& ensemble, double gamma,
                                 const CertificateOptions& options) {
    const SparseMatrix p = closed_loop_matrix(policy, ensemble);
    CertifiedMeasure cm = verify_stability(p, ensemble.mass, gamma, options);
    PolicyEvaluation ev;
    ev.certificate = cm.certificate;
    if (!cm.certificate.certified) return ev;

    const auto& reach = cm.certificate.reachable;
    const std::vector<double> g = closed_loop_costs(policy, ensemble);
    std::vector<double> g_sub(reach.size());
    for (std::size_t k = 0; k < reach.size(); ++k) g_sub[k] = g[reach[k]];
    const auto v_sub = detail::ShiftedSolver(p.principal_submatrix(reach), gamma).solve(g_sub);
    ev.value.assign(p.rows(), 0.0);
    for (std::size_t k = 0; k < reach.size(); ++k) ev.value[reach[k]] = v_sub[k];
    ev.occupation = std::move(cm.measure->mu);
    ev.objective = std::inner_product(ensemble.mass.begin(), ensemble.mass.end(), ev.value.begin(), 0.0);
    ev.proper = true;
    return ev;
}

}  // namespace pfstab
