#include "linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pfstab/error.hpp"

namespace pfstab::detail {

struct ShiftedSolver::Impl {
    Eigen::SparseMatrix<double> matrix;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

ShiftedSolver::ShiftedSolver(const SparseMatrix& a, double gamma) : impl_(std::make_unique<Impl>()) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(a.nnz() + a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k)
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(cols[k]), -gamma * vals[k]);
    }
    impl_->matrix.resize(n, n);
    impl_->matrix.setFromTriplets(triplets.begin(), triplets.end());
    impl_->matrix.makeCompressed();
    impl_->lu.analyzePattern(impl_->matrix);
    impl_->lu.factorize(impl_->matrix);
    if (impl_->lu.info() != Eigen::Success)
        fail(ErrorKind::Numeric, "sparse LU of I - gamma*P failed: " + impl_->lu.lastErrorMessage());
}

ShiftedSolver::~ShiftedSolver() = default;
ShiftedSolver::ShiftedSolver(ShiftedSolver&&) noexcept = default;
ShiftedSolver& ShiftedSolver::operator=(ShiftedSolver&&) noexcept = default;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void require_finite(const Eigen::VectorXd& v) {
    if (!v.allFinite()) fail(ErrorKind::Numeric, "linear solve produced non-finite values");
}

}  // namespace

std::vector<double> ShiftedSolver::solve(std::span<const double> b) const {
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    const Eigen::VectorXd r = rhs - impl_->matrix * x;
    x += impl_->lu.solve(r);
    require_finite(x);
    return to_std(x);
}

std::vector<double> ShiftedSolver::solve_transposed(std::span<const double> b) const {
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
    Eigen::VectorXd x = impl_->lu.transpose().solve(rhs);
    const Eigen::VectorXd r = rhs - impl_->matrix.transpose() * x;
    x += impl_->lu.transpose().solve(r);
    require_finite(x);
    return to_std(x);
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace pfstab::detail
