// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations on Var. Matrices are rank-2 row-major; a rank-1
// operand is read as a single row wherever a matrix is expected.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/sparse.hpp"
#include "cora/numerics/tensor.hpp"

namespace cora::ops {

namespace detail {

using cora::detail::make_result;
using cora::detail::Node;
using cora::detail::parent;

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

inline void add_into(Tensor& dst, const Tensor& src) {
    double* d = dst.data();
    const double* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        d[i] += s[i];
    }
}

inline double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace detail

inline Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out({m, n});
    kernels::gemm(av.data(), bv.data(), out.data(), m, k, n, false);
    return detail::make_result(
        std::move(out), {a, b},
        [m, k, n](detail::Node& self) {
            detail::Node& pa = detail::parent(self, 0);
            detail::Node& pb = detail::parent(self, 1);
            if (pa.requires_grad) {
                kernels::gemm_nt(self.grad.data(), pb.value.data(), pa.grad_buffer().data(), m, n, k, true);
            }
            if (pb.requires_grad) {
                kernels::gemm_tn(pa.value.data(), self.grad.data(), pb.grad_buffer().data(), m, k, n, true);
            }
        },
        "matmul");
}

/// a * b^T, with a [m x k] and b [n x k].
inline Var matmul_nt(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.cols()) {
        throw DimensionError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
    }
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    Tensor out({m, n});
    kernels::gemm_nt(av.data(), bv.data(), out.data(), m, k, n, false);
    return detail::make_result(
        std::move(out), {a, b},
        [m, k, n](detail::Node& self) {
            detail::Node& pa = detail::parent(self, 0);
            detail::Node& pb = detail::parent(self, 1);
            if (pa.requires_grad) {
                kernels::gemm(self.grad.data(), pb.value.data(), pa.grad_buffer().data(), m, n, k, true);
            }
            if (pb.requires_grad) {
                kernels::gemm_tn(self.grad.data(), pa.value.data(), pb.grad_buffer().data(), m, n, k, true);
            }
        },
        "matmul_nt");
}

inline Var add(const Var& a, const Var& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out = a.value();
    detail::add_into(out, b.value());
    return detail::make_result(
        std::move(out), {a, b},
        [](detail::Node& self) {
            for (std::size_t i = 0; i < 2; ++i) {
                detail::Node& p = detail::parent(self, i);
                if (p.requires_grad) {
                    detail::add_into(p.grad_buffer(), self.grad);
                }
            }
        },
        "add");
}

inline Var sub(const Var& a, const Var& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= b.value()[i];
    }
    return detail::make_result(
        std::move(out), {a, b},
        [](detail::Node& self) {
            detail::Node& pa = detail::parent(self, 0);
            detail::Node& pb = detail::parent(self, 1);
            if (pa.requires_grad) {
                detail::add_into(pa.grad_buffer(), self.grad);
            }
            if (pb.requires_grad) {
                Tensor& g = pb.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] -= self.grad[i];
                }
            }
        },
        "sub");
}

// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= b.value()[i];
    }
    return detail::make_result(
        std::move(out), {a, b},
        [](detail::Node& self) {
            detail::Node& pa = detail::parent(self, 0);
            detail::Node& pb = detail::parent(self, 1);
            if (pa.requires_grad) {
                Tensor& g = pa.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i] * pb.value[i];
                }
            }
            if (pb.requires_grad) {
                Tensor& g = pb.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i] * pa.value[i];
                }
            }
        },
        "mul");
}

inline Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.values()) {
        v *= s;
    }
    return detail::make_result(
        std::move(out), {a},
        [s](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += s * self.grad[i];
            }
        },
        "scale");
}

/// x [m x n] + bias broadcast over rows (bias has n entries).
inline Var add_bias(const Var& x, const Var& bias) {
    const std::size_t m = x.value().rows(), n = x.value().cols();
    if (bias.value().size() != n) {
        throw DimensionError("add_bias: bias of " + std::to_string(bias.value().size()) + " for " +
                             std::to_string(n) + " columns");
    }
    Tensor out = x.value();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] += bias.value()[j];
        }
    }
    return detail::make_result(
        std::move(out), {x, bias},
        [m, n](detail::Node& self) {
            detail::Node& px = detail::parent(self, 0);
            detail::Node& pb = detail::parent(self, 1);
            if (px.requires_grad) {
                detail::add_into(px.grad_buffer(), self.grad);
            }
            if (pb.requires_grad) {
                Tensor& g = pb.grad_buffer();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        g[j] += self.grad[i * n + j];
                    }
                }
            }
        },
        "add_bias");
}

inline Var sigmoid(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.values()) {
        v = detail::sigmoid(v);
    }
    return detail::make_result(
        std::move(out), {x},
        [](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = self.value[i];
                g[i] += self.grad[i] * s * (1.0 - s);
            }
        },
        "sigmoid");
}

// x * sigmoid(x)
inline Var silu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.values()) {
        v = v * detail::sigmoid(v);
    }
    return detail::make_result(
        std::move(out), {x},
        [](detail::Node& self) {
            detail::Node& p = detail::parent(self, 0);
            Tensor& g = p.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double xv = p.value[i];
                const double s = detail::sigmoid(xv);
                g[i] += self.grad[i] * s * (1.0 + xv * (1.0 - s));
            }
        },
        "silu");
}

namespace detail {

// Softmax over `count` entries spaced `stride` apart, of which only the
// first `active` participate; the rest are set to exactly 0.
inline void softmax_line(const double* in, double* out, std::size_t count, std::size_t stride, std::size_t active) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < active; ++j) {
        mx = std::max(mx, in[j * stride]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < active; ++j) {
        const double e = std::exp(in[j * stride] - mx);
        out[j * stride] = e;
        total += e;
    }
    for (std::size_t j = 0; j < active; ++j) {
        out[j * stride] /= total;
    }
    for (std::size_t j = active; j < count; ++j) {
        out[j * stride] = 0.0;
    }
}

inline void softmax_line_backward(const double* y, const double* gy, double* gx, std::size_t count,
                                  std::size_t stride) {
    double dot = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        dot += y[j * stride] * gy[j * stride];
    }
    for (std::size_t j = 0; j < count; ++j) {
        gx[j * stride] += y[j * stride] * (gy[j * stride] - dot);
    }
}

} // namespace detail

/// Max-stabilized softmax along `axis` (0 or 1 for matrices, 0 for vectors).
inline Var softmax(const Var& x, std::size_t axis = 1) {
    const Tensor& xv = x.value();
    if (xv.rank() > 2 || axis >= std::max<std::size_t>(xv.rank(), 1)) {
        throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_string(x.shape()));
    }
    const std::size_t m = xv.rows(), n = xv.cols();
    const bool along_cols = xv.rank() == 1 || axis == 1;
    Tensor out(xv.shape());
    const std::size_t lines = along_cols ? m : n;
    const std::size_t count = along_cols ? n : m;
    const std::size_t stride = along_cols ? 1 : n;
    const std::size_t step = along_cols ? n : 1;
    for (std::size_t l = 0; l < lines; ++l) {
        detail::softmax_line(xv.data() + l * step, out.data() + l * step, count, stride, count);
    }
    return detail::make_result(
        std::move(out), {x},
        [lines, count, stride, step](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t l = 0; l < lines; ++l) {
                detail::softmax_line_backward(self.value.data() + l * step, self.grad.data() + l * step,
                                              g.data() + l * step, count, stride);
            }
        },
        "softmax");
}

/// Row softmax with a causal mask: row i may see columns 0..offset+i.
/// Masked entries come out as exact zeros.
inline Var causal_softmax(const Var& x, std::size_t offset = 0) {
    const Tensor& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (offset + m > n) {
        throw DimensionError("causal_softmax: " + std::to_string(m) + " query rows with offset " +
                             std::to_string(offset) + " exceed " + std::to_string(n) + " keys");
    }
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < m; ++i) {
        detail::softmax_line(xv.data() + i * n, out.data() + i * n, n, 1, offset + i + 1);
    }
    return detail::make_result(
        std::move(out), {x},
        [m, n, offset](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
                detail::softmax_line_backward(self.value.data() + i * n, self.grad.data() + i * n, g.data() + i * n,
                                              offset + i + 1, 1);
            }
        },
        "causal_softmax");
}

/// Each row divided by sqrt(mean(row^2) + eps), then scaled elementwise by gain.
inline Var rms_norm(const Var& x, const Var& gain, double eps = 1e-6) {
    const Tensor& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (gain.value().size() != n) {
        throw DimensionError("rms_norm: gain of " + std::to_string(gain.value().size()) + " for rows of " +
                             std::to_string(n));
    }
    Tensor out(xv.shape());
    std::vector<double> inv(m);
    for (std::size_t i = 0; i < m; ++i) {
        double ss = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            ss += xv[i * n + j] * xv[i * n + j];
        }
        const double rms = std::sqrt(ss / static_cast<double>(n) + eps);
        inv[i] = rms > 0.0 ? 1.0 / rms : 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = xv[i * n + j] * inv[i] * gain.value()[j];
        }
    }
    return detail::make_result(
        std::move(out), {x, gain},
        [m, n, inv = std::move(inv)](detail::Node& self) {
            detail::Node& px = detail::parent(self, 0);
            detail::Node& pg = detail::parent(self, 1);
            const Tensor& xv = px.value;
            const Tensor& gv = pg.value;
            for (std::size_t i = 0; i < m; ++i) {
                const double r = inv[i];
                if (pg.requires_grad) {
                    Tensor& gg = pg.grad_buffer();
                    for (std::size_t j = 0; j < n; ++j) {
                        gg[j] += self.grad[i * n + j] * xv[i * n + j] * r;
                    }
                }
                if (px.requires_grad) {
                    // d/dx_j of x_k r g_k = g_k (delta_jk r - x_k x_j r^3 / n)
                    double dot = 0.0;
                    for (std::size_t k = 0; k < n; ++k) {
                        dot += self.grad[i * n + k] * gv[k] * xv[i * n + k];
                    }
                    const double c = dot * r * r * r / static_cast<double>(n);
                    Tensor& gx = px.grad_buffer();
                    for (std::size_t j = 0; j < n; ++j) {
                        gx[i * n + j] += self.grad[i * n + j] * gv[j] * r - c * xv[i * n + j];
                    }
                }
            }
        },
        "rms_norm");
}

inline Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (begin >= end || end > n) {
        throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                             std::to_string(n));
    }
    const std::size_t w = end - begin;
    Tensor out({m, w});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(xv.data() + i * n + begin, w, out.data() + i * w);
    }
    return detail::make_result(
        std::move(out), {x},
        [m, n, w, begin](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < w; ++j) {
                    g[i * n + begin + j] += self.grad[i * w + j];
                }
            }
        },
        "slice_cols");
}

inline Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    if (begin >= end || end > m) {
        throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                             std::to_string(m));
    }
    Tensor out({end - begin, n});
    std::copy_n(xv.data() + begin * n, (end - begin) * n, out.data());
    return detail::make_result(
        std::move(out), {x},
        [n, begin](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[begin * n + i] += self.grad[i];
            }
        },
        "slice_rows");
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw DimensionError("concat_cols: no inputs");
    }
    const std::size_t m = parts.front().value().rows();
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.value().rows() != m) {
            throw DimensionError("concat_cols: row counts differ");
        }
        total += p.value().cols();
    }
    Tensor out({m, total});
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const std::size_t w = p.value().cols();
        for (std::size_t i = 0; i < m; ++i) {
            std::copy_n(p.value().data() + i * w, w, out.data() + i * total + offset);
        }
        offset += w;
    }
    return detail::make_result(
        std::move(out), parts,
        [m, total](detail::Node& self) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                detail::Node& p = detail::parent(self, k);
                const std::size_t w = p.value.cols();
                if (p.requires_grad) {
                    Tensor& g = p.grad_buffer();
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < w; ++j) {
                            g[i * w + j] += self.grad[i * total + off + j];
                        }
                    }
                }
                off += w;
            }
        },
        "concat_cols");
}

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw DimensionError("concat_rows: no inputs");
    }
    const std::size_t n = parts.front().value().cols();
    std::size_t rows = 0;
    for (const Var& p : parts) {
        if (p.value().cols() != n) {
            throw DimensionError("concat_rows: column counts differ");
        }
        rows += p.value().rows();
    }
    Tensor out({rows, n});
    std::size_t offset = 0;
    for (const Var& p : parts) {
        std::copy_n(p.value().data(), p.value().size(), out.data() + offset);
        offset += p.value().size();
    }
    return detail::make_result(
        std::move(out), parts,
        [](detail::Node& self) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                detail::Node& p = detail::parent(self, k);
                if (p.requires_grad) {
                    Tensor& g = p.grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        g[i] += self.grad[off + i];
                    }
                }
                off += p.value.size();
            }
        },
        "concat_rows");
}

/// Row-major reinterpretation; values keep their order.
inline Var reshape(const Var& x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    return detail::make_result(
        std::move(out), {x},
        [](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        },
        "reshape");
}

/// Embedding lookup: rows `ids` of `table`, scatter-added on the way back.
inline Var gather_rows(const Var& table, std::span<const std::size_t> ids) {
    const Tensor& tv = table.value();
    const std::size_t rows = tv.rows(), n = tv.cols();
    if (ids.empty()) {
        throw DimensionError("gather_rows: empty id list");
    }
    Tensor out({ids.size(), n});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= rows) {
            throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " >= " + std::to_string(rows));
        }
        std::copy_n(tv.data() + ids[i] * n, n, out.data() + i * n);
    }
    return detail::make_result(
        std::move(out), {table},
        [n, ids = std::vector<std::size_t>(ids.begin(), ids.end())](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    g[ids[i] * n + j] += self.grad[i * n + j];
                }
            }
        },
        "gather_rows");
}

/// Column means: [m x n] -> [1 x n].
inline Var mean_rows(const Var& x) {
    const Tensor& xv = x.value();
    const std::size_t m = xv.rows(), n = xv.cols();
    Tensor out({1, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += xv[i * n + j];
        }
    }
    for (double& v : out.values()) {
        v /= static_cast<double>(m);
    }
    return detail::make_result(
        std::move(out), {x},
        [m, n](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            const double inv = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    g[i * n + j] += self.grad[j] * inv;
                }
            }
        },
        "mean_rows");
}

inline Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().values()) {
        s += v;
    }
    return detail::make_result(
        Tensor({1}, std::vector<double>{s}), {x},
        [](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            for (double& v : g.values()) {
                v += self.grad[0];
            }
        },
        "sum");
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

/// Per-row dot products of two [m x n] matrices -> [m x 1].
inline Var rowwise_dot(const Var& a, const Var& b) {
    detail::require_same_shape(a, b, "rowwise_dot");
    const std::size_t m = a.value().rows(), n = a.value().cols();
    Tensor out({m, 1});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += a.value()[i * n + j] * b.value()[i * n + j];
        }
        out[i] = s;
    }
    return detail::make_result(
        std::move(out), {a, b},
        [m, n](detail::Node& self) {
            detail::Node& pa = detail::parent(self, 0);
            detail::Node& pb = detail::parent(self, 1);
            for (std::size_t i = 0; i < m; ++i) {
                const double gi = self.grad[i];
                if (pa.requires_grad) {
                    Tensor& g = pa.grad_buffer();
                    for (std::size_t j = 0; j < n; ++j) {
                        g[i * n + j] += gi * pb.value[i * n + j];
                    }
                }
                if (pb.requires_grad) {
                    Tensor& g = pb.grad_buffer();
                    for (std::size_t j = 0; j < n; ++j) {
                        g[i * n + j] += gi * pa.value[i * n + j];
                    }
                }
            }
        },
        "rowwise_dot");
}

/// Single entry x(r, c) as a [1 x 1] value.
inline Var select(const Var& x, std::size_t r, std::size_t c) {
    const Tensor& xv = x.value();
    if (r >= xv.rows() || c >= xv.cols()) {
        throw IndexError("select: (" + std::to_string(r) + ", " + std::to_string(c) + ") outside " +
                         shape_string(x.shape()));
    }
    const std::size_t flat = r * xv.cols() + c;
    return detail::make_result(
        Tensor({1, 1}, std::vector<double>{xv[flat]}), {x},
        [flat](detail::Node& self) { detail::parent(self, 0).grad_buffer()[flat] += self.grad[0]; }, "select");
}

/// Sparse-times-dense product; the gradient uses the transposed pattern.
inline Var spmm(const SparseMatrix& a, const Var& x) {
    Tensor out = a.multiply(x.value());
    return detail::make_result(
        std::move(out), {x},
        [&a](detail::Node& self) {
            a.multiply_transposed_into(self.grad, detail::parent(self, 0).grad_buffer());
        },
        "spmm");
}

/// Mean binary cross-entropy of probabilities p against {0,1} labels.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
inline Var bce(const Var& p, std::span<const double> labels) {
    const Tensor& pv = p.value();
    if (pv.size() != labels.size()) {
        throw DimensionError("bce: " + std::to_string(pv.size()) + " predictions for " +
                             std::to_string(labels.size()) + " labels");
    }
    constexpr double lo = 1e-7;
    constexpr double hi = 1.0 - 1e-7;
    double total = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (labels[i] != 0.0 && labels[i] != 1.0) {
            throw ValidationError("bce: label " + std::to_string(labels[i]) + " is not 0 or 1");
        }
        const double q = std::clamp(pv[i], lo, hi);
        total -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
    }
    const double count = static_cast<double>(pv.size());
    return detail::make_result(
        Tensor({1}, std::vector<double>{total / count}), {p},
        [count, labels = std::vector<double>(labels.begin(), labels.end())](detail::Node& self) {
            detail::Node& pp = detail::parent(self, 0);
            Tensor& g = pp.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double raw = pp.value[i];
                if (raw < lo || raw > hi) {
                    continue; // clamped region is flat
                }
                g[i] += self.grad[0] * (raw - labels[i]) / (raw * (1.0 - raw)) / count;
            }
        },
        "bce");
}

/// Mean next-token cross-entropy of row logits against target ids.
/// Rows whose target is negative are ignored.
inline Var cross_entropy(const Var& logits, std::span<const std::int64_t> targets) {
    const Tensor& lv = logits.value();
    const std::size_t m = lv.rows(), n = lv.cols();
    if (targets.size() != m) {
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(m) + " rows");
    }
    Tensor probs({m, n});
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (targets[i] < 0) {
            continue;
        }
        if (static_cast<std::size_t>(targets[i]) >= n) {
            throw IndexError("cross_entropy: target " + std::to_string(targets[i]) + " >= " + std::to_string(n));
        }
        detail::softmax_line(lv.data() + i * n, probs.data() + i * n, n, 1, n);
        total -= std::log(std::max(probs[i * n + static_cast<std::size_t>(targets[i])], 1e-300));
        ++counted;
    }
    if (counted == 0) {
        throw ValidationError("cross_entropy: no target rows");
    }
    const double inv = 1.0 / static_cast<double>(counted);
    return detail::make_result(
        Tensor({1}, std::vector<double>{total * inv}), {logits},
        [m, n, inv, probs = std::move(probs),
         targets = std::vector<std::int64_t>(targets.begin(), targets.end())](detail::Node& self) {
            Tensor& g = detail::parent(self, 0).grad_buffer();
            const double s = self.grad[0] * inv;
            for (std::size_t i = 0; i < m; ++i) {
                if (targets[i] < 0) {
                    continue;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    g[i * n + j] += s * probs[i * n + j];
                }
                g[i * n + static_cast<std::size_t>(targets[i])] -= s;
            }
        },
        "cross_entropy");
}

// Convenience operators for the common cases.
inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

} // namespace cora::ops
