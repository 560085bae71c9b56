#include <algorithm>
#include <cmath>
#include <limits>

#include "linalg.hpp"
#include "pfstab/error.hpp"
#include "pfstab/lp.hpp"

namespace pfstab {

namespace {

constexpr std::size_t kDenseLimit = 400;

/// Row-major tableau B^{-1}[A | I | b] with the basis as column indices.
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * (cols + 1), 0.0) {}

    double& at(std::size_t i, std::size_t k) { return data_[i * (cols_ + 1) + k]; }
    double at(std::size_t i, std::size_t k) const { return data_[i * (cols_ + 1) + k]; }
    double& rhs(std::size_t i) { return at(i, cols_); }
    double rhs(std::size_t i) const { return at(i, cols_); }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    void pivot(std::size_t r, std::size_t k) {
        const double p = at(r, k);
        for (std::size_t c = 0; c <= cols_; ++c) at(r, c) /= p;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i == r) continue;
            const double f = at(i, k);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) at(i, c) -= f * at(r, c);
        }
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

struct DenseState {
    Tableau t;
    std::vector<std::size_t> basis;
};

std::vector<double> reduced_row(const DenseState& s, const std::vector<double>& cost) {
    std::vector<double> r(cost);
    for (std::size_t i = 0; i < s.t.rows(); ++i) {
        const double cb = cost[s.basis[i]];
        if (cb == 0.0) continue;
        for (std::size_t k = 0; k < s.t.cols(); ++k) r[k] -= cb * s.t.at(i, k);
    }
    return r;
}

enum class Outcome { Optimal, Unbounded };

/// Bland's rule: smallest eligible entering index, ties in the ratio test
/// broken by the smallest basic variable index.
Outcome run_bland(DenseState& s, const std::vector<double>& cost, std::size_t eligible, double tol) {
    const std::size_t limit = 50 * (s.t.rows() + s.t.cols()) + 1000;
    for (std::size_t iter = 0; iter < limit; ++iter) {
        const auto r = reduced_row(s, cost);
        std::size_t enter = eligible;
        for (std::size_t k = 0; k < eligible; ++k) {
            if (r[k] < -tol) {
                enter = k;
                break;
            }
        }
        if (enter == eligible) return Outcome::Optimal;
        std::size_t leave = s.t.rows();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.t.rows(); ++i) {
            const double a = s.t.at(i, enter);
            if (a <= 1e-12) continue;
            const double ratio = s.t.rhs(i) / a;
            if (ratio < best - 1e-14 || (ratio <= best + 1e-14 && leave < s.t.rows() && s.basis[i] < s.basis[leave])) {
                best = std::min(best, ratio);
                leave = i;
            }
        }
        if (leave == s.t.rows()) return Outcome::Unbounded;
        s.t.pivot(leave, enter);
        s.basis[leave] = enter;
    }
    fail(ErrorKind::Solver, "dense simplex exceeded its iteration limit");
}

}  // namespace

LPSolution solve_lp_dense(const StabilizationLP& lp, const Tolerances& tolerances) {
    const std::size_t n = lp.state_count();
    const std::size_t m = lp.action_count();
    const std::size_t nv = lp.variable_count();
    if (nv > kDenseLimit)
        fail(ErrorKind::Usage, "dense simplex is limited to " + std::to_string(kDenseLimit) + " variables");
    const double tol = tolerances.feas_tol(lp.mass);

    // Rows: sum_{a,j} (delta_ij - gamma P_a[j,i]) theta^a_j = m_i, then one artificial per row.
    DenseState s{Tableau(n, nv + n), std::vector<std::size_t>(n)};
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t v = a * n + j;
            s.t.at(j, v) += 1.0;
            const auto cols = lp.matrices[a].row_cols(j);
            const auto vals = lp.matrices[a].row_values(j);
            for (std::size_t k = 0; k < cols.size(); ++k) s.t.at(cols[k], v) -= lp.gamma * vals[k];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        s.t.at(i, nv + i) = 1.0;
        s.t.rhs(i) = lp.mass[i];
        s.basis[i] = nv + i;
    }

    LPSolution sol;
    sol.gamma = lp.gamma;

    std::vector<double> phase1(nv + n, 0.0);
    std::fill(phase1.begin() + static_cast<std::ptrdiff_t>(nv), phase1.end(), 1.0);
    run_bland(s, phase1, nv, 1e-11);
    double infeasibility = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (s.basis[i] >= nv && s.t.rhs(i) > tol) {
            infeasibility += s.t.rhs(i);
            sol.unresolved_rows.push_back(s.basis[i] - nv);
        }
    }
    if (infeasibility > 0.0) {
        std::sort(sol.unresolved_rows.begin(), sol.unresolved_rows.end());
        sol.status = LPStatus::Infeasible;
        return sol;
    }
    // Drive zero-level artificials out of the basis where a real column allows it.
    for (std::size_t i = 0; i < n; ++i) {
        if (s.basis[i] < nv) continue;
        for (std::size_t k = 0; k < nv; ++k) {
            if (std::abs(s.t.at(i, k)) > 1e-9) {
                s.t.pivot(i, k);
                s.basis[i] = k;
                break;
            }
        }
    }

    std::vector<double> phase2(nv + n, 0.0);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t j = 0; j < n; ++j) phase2[a * n + j] = lp.costs[a][j];
    if (run_bland(s, phase2, nv, 1e-11) == Outcome::Unbounded) {
        sol.status = LPStatus::Unbounded;
        return sol;
    }

    sol.status = LPStatus::Optimal;
    sol.theta.assign(m, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        if (s.basis[i] < nv) sol.theta[s.basis[i] / n][s.basis[i] % n] = std::max(0.0, s.t.rhs(i));
    const auto r = reduced_row(s, phase2);
    sol.value.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.value[i] = -r[nv + i];
    sol.basis.assign(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t j = 0; j < n; ++j) {
        double best = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            if (sol.theta[a][j] > best) {
                best = sol.theta[a][j];
                sol.basis[j] = a;
            }
        }
    }
    compute_lp_metrics(lp, sol);
    return sol;
}

}  // namespace pfstab
