#include "pfstab/certificate.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"
#include "pfstab/error.hpp"
#include "pfstab/text.hpp"

namespace pfstab {

std::vector<std::size_t> reachable_states(const SparseMatrix& p, std::span<const double> mass) {
    const std::size_t n = p.rows();
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (mass[i] > 0.0) {
            seen[i] = true;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const auto cols = p.row_cols(i);
        const auto vals = p.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (vals[k] > 0.0 && !seen[cols[k]]) {
                seen[cols[k]] = true;
                stack.push_back(cols[k]);
            }
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (seen[i]) out.push_back(i);
    return out;
}

SpectralEstimate spectral_radius(const SparseMatrix& a, std::span<const std::size_t> states,
                                 const SpectralOptions& options) {
    SpectralEstimate est;
    if (states.empty()) {
        est.converged = true;
        return est;
    }
    const SparseMatrix sub = a.principal_submatrix(states);
    const std::size_t n = sub.rows();
    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    double shifted = 0.0;
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
        std::vector<double> y = sub.multiply(x);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += x[i];
            total += y[i];
        }
        if (!std::isfinite(total)) fail(ErrorKind::Numeric, "power iteration diverged");
        for (double& v : y) v /= total;
        x = std::move(y);
        est.iterations = it;
        const double prev = shifted;
        shifted = total;  // sum(x) == 1 before the step
        if (it > 1 && std::abs(shifted - prev) <= options.relative_tolerance * shifted) {
            est.converged = true;
            break;
        }
    }
    est.radius = std::max(0.0, shifted - 1.0);
    const double top = *std::max_element(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 1e-6 * top) est.dominant_support.push_back(states[i]);
    return est;
}

CertifiedMeasure verify_stability(const SparseMatrix& p, std::span<const double> mass, double gamma,
                                  const CertificateOptions& options) {
    const std::size_t n = p.rows();
    if (p.cols() != n) fail(ErrorKind::Usage, "verify_stability needs a square matrix");
    if (mass.size() != n) fail(ErrorKind::Usage, "mass vector length does not match the matrix");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) fail(ErrorKind::Usage, "gamma must be positive and finite");
    for (double m : mass)
        if (!(m >= 0.0) || !std::isfinite(m)) fail(ErrorKind::Usage, "mass must be finite and nonnegative");
    if (p.nnz() > 0 && p.min_value() < 0.0) fail(ErrorKind::Usage, "transition matrix has negative entries");

    CertifiedMeasure out;
    StabilityCertificate& cert = out.certificate;
    cert.gamma = gamma;
    cert.reachable = reachable_states(p, mass);
    const SpectralEstimate est = spectral_radius(p, cert.reachable, options.spectral);
    cert.decay_bound = est.radius;
    cert.spectral_radius = gamma * est.radius;
    cert.power_iterations = est.iterations;
    cert.power_converged = est.converged;

    auto reject = [&](std::string reason) {
        cert.certified = false;
        cert.reason = std::move(reason);
        cert.dominant_support = est.dominant_support;
        return out;
    };
    if (!(cert.spectral_radius < 1.0 - options.margin))
        return reject("spectral radius of gamma*P is " + format_double(cert.spectral_radius) + " (needs < 1)");

    const SparseMatrix sub = p.principal_submatrix(cert.reachable);
    std::vector<double> m_sub(cert.reachable.size());
    for (std::size_t k = 0; k < m_sub.size(); ++k) m_sub[k] = mass[cert.reachable[k]];
    std::vector<double> mu_sub;
    try {
        mu_sub = detail::ShiftedSolver(sub, gamma).solve_transposed(m_sub);
    } catch (const Error& e) {
        return reject(std::string("Lyapunov measure solve failed: ") + e.what());
    }

    LyapunovMeasure lm;
    lm.mu.assign(n, 0.0);
    for (std::size_t k = 0; k < mu_sub.size(); ++k) lm.mu[cert.reachable[k]] = mu_sub[k];
    const double m_inf = detail::max_abs(mass);
    const double tol = options.feasibility * (1.0 + m_inf);
    std::vector<double> r = p.multiply_transposed(lm.mu);
    for (std::size_t i = 0; i < n; ++i) r[i] = gamma * r[i] - lm.mu[i] + mass[i];
    lm.residual = detail::max_abs(r);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(lm.mu[i] >= mass[i] - tol) && gamma >= 1.0)
            return reject("Lyapunov measure falls below m at state " + std::to_string(i));
        if (!(lm.mu[i] >= -tol)) return reject("Lyapunov measure is negative at state " + std::to_string(i));
    }
    if (!(lm.residual <= tol)) return reject("Lyapunov equation residual " + format_double(lm.residual));

    // Neumann cross-check: partial sums increase towards mu.
    std::vector<double> term(mass.begin(), mass.end());
    std::vector<double> partial = term;
    const double mu_inf = detail::max_abs(lm.mu);
    auto gap = [&] {
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) g = std::max(g, std::abs(lm.mu[i] - partial[i]));
        return g;
    };
    double last_gap = gap();
    for (std::size_t k = 1; k <= options.neumann_terms; ++k) {
        term = p.multiply_transposed(term);
        for (std::size_t i = 0; i < n; ++i) {
            term[i] *= gamma;
            partial[i] += term[i];
        }
        const double g = gap();
        if (g > last_gap + 1e-12 * (1.0 + mu_inf)) lm.neumann_monotone = false;
        last_gap = g;
    }
    lm.neumann_terms = options.neumann_terms;
    lm.neumann_gap = last_gap / (1.0 + mu_inf);

    cert.certified = true;
    out.measure = std::move(lm);
    return out;
}

}  // namespace pfstab
