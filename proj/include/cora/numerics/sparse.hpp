// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/tensor.hpp"

namespace cora {

/// Compressed sparse row matrix of doubles.
class SparseMatrix {
public:
    struct Entry {
        std::size_t row;
        std::size_t col;
        double value;
    };

    SparseMatrix() = default;

    // Duplicate (row, col) entries are summed.
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries) : rows_(rows), cols_(cols) {
        std::sort(entries.begin(), entries.end(),
                  [](const Entry& a, const Entry& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
        row_ptr_.assign(rows + 1, 0);
        for (const Entry& e : entries) {
            if (e.row >= rows || e.col >= cols) {
                throw IndexError("sparse: entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                 ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
            }
            if (!col_idx_.empty() && row_ptr_[e.row + 1] > 0 && last_row_ == e.row && col_idx_.back() == e.col) {
                values_.back() += e.value;
                continue;
            }
            col_idx_.push_back(e.col);
            values_.push_back(e.value);
            ++row_ptr_[e.row + 1];
            last_row_ = e.row;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            row_ptr_[r + 1] += row_ptr_[r];
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nonzeros() const noexcept { return values_.size(); }

    Tensor multiply(const Tensor& x) const {
        if (x.rows() != cols_) {
            throw DimensionError("sparse multiply: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                 " times " + shape_string(x.shape()));
        }
        const std::size_t n = x.cols();
        Tensor out({rows_, n});
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                const double a = values_[p];
                const double* xr = x.data() + col_idx_[p] * n;
                double* orow = out.data() + r * n;
                for (std::size_t j = 0; j < n; ++j) {
                    orow[j] += a * xr[j];
                }
            }
        }
        return out;
    }

    // out += A^T g
    void multiply_transposed_into(const Tensor& g, Tensor& out) const {
        const std::size_t n = g.cols();
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                const double a = values_[p];
                const double* grow = g.data() + r * n;
                double* orow = out.data() + col_idx_[p] * n;
                for (std::size_t j = 0; j < n; ++j) {
                    orow[j] += a * grow[j];
                }
            }
        }
    }

    Tensor dense() const {
        Tensor out({rows_, cols_});
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                out(r, col_idx_[p]) = values_[p];
            }
        }
        return out;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t last_row_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

} // namespace cora
