#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pfstab {

struct Entry {
    std::size_t col;
    double value;
};

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t rows, std::size_t cols);

    /// Rows must be given in order; entries of a row must have strictly
    /// increasing columns. Throws Error(Usage) otherwise.
    static SparseMatrix from_rows(std::size_t cols, const std::vector<std::vector<Entry>>& rows);
    static SparseMatrix identity(std::size_t n);

    std::size_t rows() const { return row_ptr_.size() - 1; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return col_idx_.size(); }

    std::span<const std::size_t> row_cols(std::size_t i) const {
        return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> row_values(std::size_t i) const {
        return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }

    double at(std::size_t i, std::size_t j) const;
    double row_sum(std::size_t i) const;
    double min_value() const;
    double max_value() const;

    /// y = A x
    std::vector<double> multiply(std::span<const double> x) const;
    /// y = A' x
    std::vector<double> multiply_transposed(std::span<const double> x) const;

    /// Principal submatrix keeping the listed indices (ascending).
    SparseMatrix principal_submatrix(std::span<const std::size_t> keep) const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

}  // namespace pfstab
