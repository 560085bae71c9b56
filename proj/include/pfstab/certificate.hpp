#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfstab/sparse.hpp"

namespace pfstab {

/// States reachable from supp(mass) along positive entries of `p` (row i
/// feeds column j), ascending. Mass never visits the complement, so it does
/// not enter the Lyapunov measure equation.
std::vector<std::size_t> reachable_states(const SparseMatrix& p, std::span<const double> mass);

struct SpectralEstimate {
    double radius = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Indices (into the full matrix) where the final iterate exceeds 1e-6 of
    /// its maximum: the support of the dominant eigenvector.
    std::vector<std::size_t> dominant_support;
};

struct SpectralOptions {
    double relative_tolerance = 1e-10;
    std::size_t max_iterations = 10000;
};

/// Spectral radius of the nonnegative matrix `a` restricted to `states`.
/// Power iteration on A + I, which keeps the dominant eigenvalue strictly
/// dominant for periodic chains; stops when successive estimates of
/// rho(A) + 1 agree to the relative tolerance.
SpectralEstimate spectral_radius(const SparseMatrix& a, std::span<const std::size_t> states,
                                 const SpectralOptions& options = {});

struct LyapunovMeasure {
    std::vector<double> mu;  ///< zero outside the reachable set
    double residual = 0.0;   ///< |gamma P' mu - mu + m|_inf
    /// Neumann partial sums S_K = sum_{n<=K} gamma^n (P')^n m.
    std::size_t neumann_terms = 0;
    double neumann_gap = 0.0;       ///< |mu - S_K|_inf / (1 + |mu|_inf)
    bool neumann_monotone = true;   ///< S_k nondecreasing and |mu - S_k| nonincreasing
};

struct StabilityCertificate {
    double gamma = 1.0;
    double spectral_radius = 0.0;  ///< rho(gamma P) on the reachable set
    double decay_bound = 0.0;      ///< rho(P) on the reachable set
    bool certified = false;
    std::string reason;            ///< empty when certified
    std::size_t power_iterations = 0;
    bool power_converged = false;
    std::vector<std::size_t> reachable;
    std::vector<std::size_t> dominant_support;  ///< diagnostic when not certified
};

struct CertificateOptions {
    SpectralOptions spectral;
    std::size_t neumann_terms = 200;
    double margin = 1e-10;  ///< certified needs spectral_radius < 1 - margin
    double feasibility = 1e-9;  ///< residual <= feasibility * (1 + |m|_inf)
};

struct CertifiedMeasure {
    StabilityCertificate certificate;
    std::optional<LyapunovMeasure> measure;  ///< present iff certified
};

/// Lyapunov measure test for gamma P with P substochastic and m >= 0:
/// certified iff rho(gamma P) < 1 on the states reachable from supp(m) and
/// mu = (I - gamma P')^{-1} m is nonnegative, dominates m and solves the
/// equation within tolerance. Throws Error(Usage) on shape mismatch.
CertifiedMeasure verify_stability(const SparseMatrix& p, std::span<const double> mass, double gamma,
                                  const CertificateOptions& options = {});

}  // namespace pfstab
