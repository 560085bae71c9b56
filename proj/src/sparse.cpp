#include "pfstab/sparse.hpp"

#include <algorithm>
#include <limits>

#include "pfstab/error.hpp"

namespace pfstab {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols) : cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_rows(std::size_t cols, const std::vector<std::vector<Entry>>& rows) {
    SparseMatrix m;
    m.cols_ = cols;
    m.row_ptr_.assign(1, 0);
    m.row_ptr_.reserve(rows.size() + 1);
    std::size_t total = 0;
    for (const auto& r : rows) total += r.size();
    m.col_idx_.reserve(total);
    m.values_.reserve(total);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            const Entry& e = rows[i][k];
            if (e.col >= cols || (k > 0 && rows[i][k - 1].col >= e.col))
                fail(ErrorKind::Usage, "row " + std::to_string(i) + " has unsorted or out-of-range columns");
            m.col_idx_.push_back(e.col);
            m.values_.push_back(e.value);
        }
        m.row_ptr_.push_back(m.col_idx_.size());
    }
    return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<std::vector<Entry>> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = {{i, 1.0}};
    return from_rows(n, rows);
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

double SparseMatrix::row_sum(std::size_t i) const {
    double s = 0.0;
    for (double v : row_values(i)) s += v;
    return s;
}

double SparseMatrix::min_value() const {
    return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double SparseMatrix::max_value() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(rows(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
        y[i] = s;
    }
    return y;
}

std::vector<double> SparseMatrix::multiply_transposed(std::span<const double> x) const {
    std::vector<double> y(cols_, 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * xi;
    }
    return y;
}

SparseMatrix SparseMatrix::principal_submatrix(std::span<const std::size_t> keep) const {
    constexpr std::size_t kDropped = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> remap(std::max(rows(), cols_), kDropped);
    for (std::size_t k = 0; k < keep.size(); ++k) remap[keep[k]] = k;
    std::vector<std::vector<Entry>> out(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto cols = row_cols(keep[k]);
        const auto vals = row_values(keep[k]);
        for (std::size_t e = 0; e < cols.size(); ++e)
            if (remap[cols[e]] != kDropped) out[k].push_back({remap[cols[e]], vals[e]});
    }
    return from_rows(keep.size(), out);
}

}  // namespace pfstab
