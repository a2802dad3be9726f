// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/rng.hpp"

namespace cora {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles. Value semantics; no gradient state.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        check_extents();
        values_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
        check_extents();
        if (values_.size() != shape_size(shape_)) {
            throw DimensionError("tensor: " + std::to_string(values_.size()) + " values for shape " +
                                 shape_string(shape_));
        }
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
        return Tensor({rows, cols}, std::vector<double>(values));
    }

    static Tensor row(std::span<const double> values) {
        return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) {
            t(i, i) = 1.0;
        }
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (double& v : t.values_) {
            v = rng.normal(0.0, stddev);
        }
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::size_t extent(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw DimensionError("extent: axis " + std::to_string(axis) + " out of range for " +
                                 shape_string(shape_));
        }
        return shape_[axis];
    }

    // Matrix view helpers. A rank-1 tensor is treated as a single row.
    std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }
    std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& storage() noexcept { return values_; }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

    std::span<const double> row_span(std::size_t r) const noexcept {
        return std::span<const double>(values_).subspan(r * cols(), cols());
    }
    std::span<double> row_span(std::size_t r) noexcept { return std::span<double>(values_).subspan(r * cols(), cols()); }

    void fill(double v) noexcept { std::fill(values_.begin(), values_.end(), v); }

    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != values_.size()) {
            throw DimensionError("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
        }
        return Tensor(std::move(shape), values_);
    }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    void check_extents() const {
        for (std::size_t e : shape_) {
            if (e == 0) {
                throw DimensionError("tensor: zero extent in shape " + shape_string(shape_));
            }
        }
    }

    Shape shape_;
    std::vector<double> values_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

namespace kernels {

// out[m x n] (+)= a[m x k] * b[k x n]
inline void gemm(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate) {
    if (!accumulate) {
        std::fill(out, out + m * n, 0.0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) {
                continue;
            }
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
}

// out[m x n] (+)= a[m x k] * b[n x k]^T
inline void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                s += arow[p] * brow[p];
            }
            out[i * n + j] = accumulate ? out[i * n + j] + s : s;
        }
    }
}

// out[k x n] (+)= a[m x k]^T * b[m x n]
inline void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate) {
    if (!accumulate) {
        std::fill(out, out + k * n, 0.0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) {
                continue;
            }
            double* orow = out + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
}

} // namespace kernels

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor out({a.rows(), b.cols()});
    kernels::gemm(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), false);
    return out;
}

inline Tensor transpose(const Tensor& a) {
    Tensor out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

} // namespace cora
