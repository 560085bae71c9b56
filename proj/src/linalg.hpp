#pragma once

#include <memory>
#include <span>
#include <vector>

#include "pfstab/sparse.hpp"

namespace pfstab::detail {

/// Sparse LU of I - gamma * A with one step of iterative refinement on
/// every solve. Throws Error(Numeric) if the factorization fails.
class ShiftedSolver {
public:
    ShiftedSolver(const SparseMatrix& a, double gamma);
    ~ShiftedSolver();
    ShiftedSolver(ShiftedSolver&&) noexcept;
    ShiftedSolver& operator=(ShiftedSolver&&) noexcept;

    /// x with (I - gamma A) x = b
    std::vector<double> solve(std::span<const double> b) const;
    /// x with (I - gamma A') x = b
    std::vector<double> solve_transposed(std::span<const double> b) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

double max_abs(std::span<const double> v);

}  // namespace pfstab::detail
