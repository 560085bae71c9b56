#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "pfstab/certificate.hpp"
#include "pfstab/lp.hpp"
#include "pfstab/transfer.hpp"

namespace pfstab {

inline constexpr std::size_t kNoAction = std::numeric_limits<std::size_t>::max();

/// Deterministic feedback on the restricted index space: one action per
/// ordinary cell, kNoAction at the sink.
struct Policy {
    std::vector<std::size_t> action;
    std::vector<Point> controls;  ///< control value per action index
    /// Local controller inside the attractor region: u = -K x with K stored
    /// row-major (control_dim x state_dim), saturated to the range of
    /// `controls`. Empty means zero input.
    std::vector<double> local_gain;

    std::size_t size() const { return action.size(); }
    const Point& control(std::size_t cell) const { return controls[action[cell]]; }
    Point local_control(std::span<const double> state) const;
};

/// a(j) = smallest action with theta^a_j > tau. A negative `tau` selects
/// tau = tolerances.positivity * max theta. Throws Error(DegenerateSolution)
/// naming the cell when no action clears tau, Error(Usage) unless optimal.
Policy extract_policy(const LPSolution& solution, const TransferEnsemble& ensemble, double tau = -1.0,
                      const Tolerances& tolerances = {});

/// Row j copied from the restricted matrix of a(j); the sink keeps its
/// self-loop.
SparseMatrix closed_loop_matrix(const Policy& policy, const TransferEnsemble& ensemble);

/// (G_u)_j = G^{a(j)}_j; the sink entry is the sink penalty of action 0.
std::vector<double> closed_loop_costs(const Policy& policy, const TransferEnsemble& ensemble);

/// Lyapunov measure of the closed loop (see verify_stability).
CertifiedMeasure lyapunov_measure(const SparseMatrix& closed_loop, std::span<const double> mass, double gamma,
                                  const CertificateOptions& options = {});

struct PolicyEvaluation {
    bool proper = false;  ///< rho(gamma P_u) < 1 on the states that carry mass
    std::vector<double> value;       ///< (I - gamma P_u)^{-1} G_u, zero where unreachable
    std::vector<double> occupation;  ///< (I - gamma P_u')^{-1} m
    double objective = 0.0;          ///< m' value
    StabilityCertificate certificate;
};

/// Value of a (not necessarily optimal) policy. Improper policies come back
/// with proper == false and empty vectors.
PolicyEvaluation evaluate_policy(const Policy& policy, const TransferEnsemble& ensemble, double gamma,
                                 const CertificateOptions& options = {});

}  // namespace pfstab
