#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pfstab/lp.hpp"
#include "pfstab/policy.hpp"
#include "pfstab/rng.hpp"
#include "pfstab/transfer.hpp"

namespace pfstab::testing {

/// Two cells plus attractor; action 0 leaks half of cell 0 into cell 1,
/// action 1 is cheaper but recirculates. Optimum at gamma = 1 is 2.0.
inline TransferEnsemble tiny_ensemble() {
    auto p1 = SparseMatrix::from_rows(2, {{{1, 0.5}}, {}});
    auto p2 = SparseMatrix::from_rows(2, {{{0, 0.5}, {1, 0.5}}, {{0, 0.5}}});
    return ensemble_from_restricted({p1, p2}, {{1.0, 1.0}, {0.2, 0.2}}, {1.0, 1.0});
}

inline SparseMatrix dense_to_sparse(const Eigen::MatrixXd& a) {
    std::vector<std::vector<Entry>> rows(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0.0) rows[i].push_back({static_cast<std::size_t>(j), a(i, j)});
    return SparseMatrix::from_rows(a.cols(), rows);
}

inline Eigen::MatrixXd sparse_to_dense(const SparseMatrix& s) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const auto cols = s.row_cols(i);
        const auto vals = s.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) a(i, cols[k]) = vals[k];
    }
    return a;
}

/// Random substochastic chain: n states, m actions. Entries are multiples
/// of 1/64 so row sums are exact; with probability `closed` a row is
/// stochastic (no mass reaches the attractor), otherwise it leaks.
inline TransferEnsemble random_ensemble(std::uint64_t seed, std::size_t n, std::size_t actions,
                                        double closed = 0.3) {
    Rng rng(seed);
    auto below = [&](std::size_t k) { return static_cast<std::size_t>(rng.uniform_open() * static_cast<double>(k)); };
    std::vector<SparseMatrix> mats;
    std::vector<std::vector<double>> costs;
    for (std::size_t a = 0; a < actions; ++a) {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::size_t> cols;
            for (std::size_t j = 0; j < n; ++j)
                if (rng.uniform_open() < 0.6) cols.push_back(j);
            if (cols.empty()) continue;
            const std::size_t units = rng.uniform_open() < closed ? 64 : 8 + below(56);
            for (std::size_t u = 0; u < units; ++u) p(i, cols[below(cols.size())]) += 1.0 / 64.0;
        }
        mats.push_back(dense_to_sparse(p));
        std::vector<double> g(n);
        for (auto& x : g) x = 0.1 + 2.0 * rng.uniform_open();
        costs.push_back(g);
    }
    std::vector<double> mass(n);
    for (auto& x : mass) x = 0.5 + rng.uniform_open();
    return ensemble_from_restricted(std::move(mats), std::move(costs), std::move(mass));
}

struct OracleResult {
    std::optional<double> best;              ///< empty: no admissible policy
    std::vector<std::size_t> best_policy;
    std::vector<double> best_theta;          ///< occupation of the best policy
    std::vector<std::optional<double>> costs;  ///< per policy, mixed-radix order
};

/// Enumerates every deterministic policy. A policy is admissible when
/// theta = (I - gamma P_u')^{-1} m exists and is nonnegative, which for
/// m > 0 is equivalent to rho(gamma P_u) < 1.
inline OracleResult enumerate_policies(const TransferEnsemble& e, double gamma) {
    const std::size_t n = e.restricted_size();
    const std::size_t m = e.action_count();
    std::vector<Eigen::MatrixXd> dense;
    for (const auto& p : e.restricted) dense.push_back(sparse_to_dense(p));
    Eigen::VectorXd mass = Eigen::Map<const Eigen::VectorXd>(e.mass.data(), n);

    OracleResult out;
    std::vector<std::size_t> pol(n, 0);
    while (true) {
        Eigen::MatrixXd pu(n, n);
        Eigen::VectorXd g(n);
        for (std::size_t j = 0; j < n; ++j) {
            pu.row(j) = dense[pol[j]].row(j);
            g(j) = e.costs[pol[j]][j];
        }
        const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - gamma * pu.transpose();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        std::optional<double> cost;
        if (lu.isInvertible()) {
            const Eigen::VectorXd theta = lu.solve(mass);
            if (theta.minCoeff() >= -1e-12) {
                cost = g.dot(theta);
                if (!out.best || *cost < *out.best) {
                    out.best = cost;
                    out.best_policy = pol;
                    out.best_theta.assign(theta.data(), theta.data() + n);
                }
            }
        }
        out.costs.push_back(cost);
        std::size_t k = 0;
        while (k < n && ++pol[k] == m) pol[k++] = 0;
        if (k == n) break;
    }
    return out;
}

inline bool close_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * (1.0 + std::max(std::abs(a), std::abs(b)));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pfstab-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace pfstab::testing
