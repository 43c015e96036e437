#pragma once

// Dense-tensor primitives with reverse-mode differentiation.
//
// Shape rules (the only broadcasting supported is the documented bias case):
//   matmul        [m,k] x [k,n] -> [m,n]
//   add           same shape, or A [...,d] + b [d] (bias broadcast over rows)
//   mul           same shape, elementwise
//   scale         tensor * compile-time-constant scalar
//   concat        along one axis, all other dims equal
//   slice         contiguous [start, start+len) range along one axis
//   reshape       same numel, data copied
//   transpose     2-D only
//   softmax       last axis only, max-subtracted
//   layer_norm    last axis, biased variance, eps inside sqrt
//   embedding_lookup  [R,C] gathered by integer ids -> [n,C]; backward scatter-adds
//   sum/mean      whole tensor -> scalar, or one axis of a 2-D tensor
//   masked_fill   entries where mask==0 are replaced by a constant; grad blocked there
//   cross_entropy_with_logits  [N,C] + integer targets (-1 = ignore) -> scalar mean,
//                 computed via log-sum-exp
//   squared_error mean of (a-b)^2 over all elements -> scalar
//   straight_through  forward takes replacement values, backward copies grads to src
//
// Every op validates shapes (ShapeError) and checks its output for NaN/Inf
// (NumericalError). Reductions accumulate in double regardless of S.

#include "gvt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gvt {

template <typename S>
inline void ensure_finite(const char* op, const Tensor<S>& t) {
    for (S v : t.data())
        if (!std::isfinite(double(v)))
            throw NumericalError(std::string(op) + ": non-finite value in output of shape " +
                                 shape_str(t.shape()));
}

namespace detail {

template <typename S>
inline void accumulate(Tensor<S>& t, const std::vector<S>& delta) {
    auto& g = t.grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

inline void check_2d(const char* op, const Shape& s) {
    if (s.size() != 2) throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + shape_str(s));
}

} // namespace detail

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_2d("matmul", a.shape());
    detail::check_2d("matmul", b.shape());
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    Tensor<S> out(Shape{m, n});
    {
        const S* A = a.data().data();
        const S* B = b.data().data();
        S* C = out.mutable_data().data();
        for (int i = 0; i < m; ++i) {
            S* crow = C + size_t(i) * n;
            const S* arow = A + size_t(i) * k;
            for (int p = 0; p < k; ++p) {
                const S av = arow[p];
                if (av == S(0)) continue;
                const S* brow = B + size_t(p) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
    ensure_finite("matmul", out);
    if (grad_enabled_for<S>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, bc = b, oc = out;
        Tape<S>::current()->record([ac, bc, oc]() mutable {
            const int m = ac.dim(0), k = ac.dim(1), n = bc.dim(1);
            const auto& go = oc.grad();
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                const S* B = bc.data().data();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0;
                        const S* grow = go.data() + size_t(i) * n;
                        const S* brow = B + size_t(p) * n;
                        for (int j = 0; j < n; ++j) acc += double(grow[j]) * double(brow[j]);
                        ga[size_t(i) * k + p] += S(acc);
                    }
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                const S* A = ac.data().data();
                for (int i = 0; i < m; ++i) {
                    const S* arow = A + size_t(i) * k;
                    const S* grow = go.data() + size_t(i) * n;
                    for (int p = 0; p < k; ++p) {
                        const S av = arow[p];
                        if (av == S(0)) continue;
                        S* brow = gb.data() + size_t(p) * n;
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    const bool same = a.shape() == b.shape();
    const bool bias = !same && b.ndim() == 1 && a.ndim() >= 1 && a.dim(a.ndim() - 1) == b.dim(0);
    if (!same && !bias)
        throw ShapeError("add: incompatible shapes " + shape_str(a.shape()) + " + " +
                         shape_str(b.shape()));
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.mutable_data();
    if (same) {
        for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    } else {
        const size_t d = bv.size();
        for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i % d];
    }
    ensure_finite("add", out);
    if (grad_enabled_for<S>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, bc = b, oc = out;
        const bool is_bias = bias;
        Tape<S>::current()->record([ac, bc, oc, is_bias]() mutable {
            const auto& go = oc.grad();
            if (ac.requires_grad()) detail::accumulate(ac, go);
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                if (!is_bias) {
                    for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
                } else {
                    const size_t d = gb.size();
                    for (size_t i = 0; i < go.size(); ++i) gb[i % d] += go[i];
                }
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.mutable_data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    ensure_finite("mul", out);
    if (grad_enabled_for<S>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, bc = b, oc = out;
        Tape<S>::current()->record([ac, bc, oc]() mutable {
            const auto& go = oc.grad();
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                const auto& bv = bc.data();
                for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                const auto& av = ac.data();
                for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, double c) {
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = S(av[i] * c);
    ensure_finite("scale", out);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc, c]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            for (size_t i = 0; i < go.size(); ++i) ga[i] += S(go[i] * c);
        });
    }
    return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    return add(a, scale(b, -1.0));
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    const int nd = int(s0.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw ShapeError("concat: bad axis");
    int axis_total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != nd) throw ShapeError("concat: rank mismatch");
        for (int d = 0; d < nd; ++d)
            if (d != axis && p.dim(d) != s0[size_t(d)])
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(s0));
        axis_total += p.dim(axis);
    }
    Shape os = s0;
    os[size_t(axis)] = axis_total;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s0[size_t(d)];
    for (int d = axis + 1; d < nd; ++d) inner *= s0[size_t(d)];

    Tensor<S> out(os);
    auto& ov = out.mutable_data();
    const int64_t out_stride = int64_t(axis_total) * inner;
    int64_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.data();
        const int64_t blk = int64_t(p.dim(axis)) * inner;
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(pv.data() + o * blk, blk, ov.data() + o * out_stride + off);
        off += blk;
    }
    bool any_grad = false;
    for (const auto& p : parts)
        if (p.requires_grad()) any_grad = true;
    if (Tape<S>::current() && any_grad) {
        out.set_requires_grad(true);
        std::vector<Tensor<S>> pc = parts;
        Tensor<S> oc = out;
        const int ax = axis;
        Tape<S>::current()->record([pc, oc, ax, outer, inner, out_stride]() mutable {
            const auto& go = oc.grad();
            int64_t off = 0;
            for (auto& p : pc) {
                const int64_t blk = int64_t(p.dim(ax)) * inner;
                if (p.requires_grad()) {
                    auto& gp = p.grad();
                    for (int64_t o = 0; o < outer; ++o) {
                        const S* src = go.data() + o * out_stride + off;
                        S* dst = gp.data() + o * blk;
                        for (int64_t i = 0; i < blk; ++i) dst[i] += src[i];
                    }
                }
                off += blk;
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> slice(const Tensor<S>& a, int axis, int start, int len) {
    const Shape& s = a.shape();
    const int nd = int(s.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw ShapeError("slice: bad axis");
    if (start < 0 || len <= 0 || start + len > s[size_t(axis)])
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of bounds for " + shape_str(s));
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= s[size_t(d)];
    for (int d = axis + 1; d < nd; ++d) inner *= s[size_t(d)];
    Shape os = s;
    os[size_t(axis)] = len;
    Tensor<S> out(os);
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    const int64_t in_stride = int64_t(s[size_t(axis)]) * inner;
    const int64_t out_blk = int64_t(len) * inner;
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(av.data() + o * in_stride + int64_t(start) * inner, out_blk,
                    ov.data() + o * out_blk);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc, outer, inner, in_stride, out_blk, start]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            for (int64_t o = 0; o < outer; ++o) {
                const S* src = go.data() + o * out_blk;
                S* dst = ga.data() + o * in_stride + int64_t(start) * inner;
                for (int64_t i = 0; i < out_blk; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: numel mismatch " + shape_str(a.shape()) + " -> " +
                         shape_str(shape));
    Tensor<S> out(std::move(shape), a.data());
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc]() mutable {
            if (ac.requires_grad()) detail::accumulate(ac, oc.grad());
        });
    }
    return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
    detail::check_2d("transpose", a.shape());
    const int m = a.dim(0), n = a.dim(1);
    Tensor<S> out(Shape{n, m});
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ov[size_t(j) * m + i] = av[size_t(i) * n + j];
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc, m, n]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ga[size_t(i) * n + j] += go[size_t(j) * m + i];
        });
    }
    return out;
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& a, int axis = -1) {
    const int nd = a.ndim();
    if (axis < 0) axis += nd;
    if (axis != nd - 1) throw ShapeError("softmax: only the last axis is supported");
    const int d = a.dim(nd - 1);
    if (d <= 0) throw ShapeError("softmax: empty axis");
    const int64_t rows = a.numel() / d;
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    for (int64_t r = 0; r < rows; ++r) {
        const S* x = av.data() + r * d;
        S* y = ov.data() + r * d;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < d; ++j) mx = std::max(mx, double(x[j]));
        double sum = 0;
        for (int j = 0; j < d; ++j) {
            double e = std::exp(double(x[j]) - mx);
            y[j] = S(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < d; ++j) y[j] = S(double(y[j]) * inv);
    }
    ensure_finite("softmax", out);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc, rows, d]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            const auto& y = oc.data();
            for (int64_t r = 0; r < rows; ++r) {
                const S* yy = y.data() + r * d;
                const S* gg = go.data() + r * d;
                double dot = 0;
                for (int j = 0; j < d; ++j) dot += double(gg[j]) * double(yy[j]);
                S* out_g = ga.data() + r * d;
                for (int j = 0; j < d; ++j)
                    out_g[j] += S(double(yy[j]) * (double(gg[j]) - dot));
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     double eps = 1e-5) {
    const int nd = x.ndim();
    const int d = x.dim(nd - 1);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
        throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(d) + "]");
    const int64_t rows = x.numel() / d;
    Tensor<S> out(x.shape());
    std::vector<S> xhat(size_t(x.numel()));
    std::vector<S> invstd(size_t(rows), S(0));
    {
        const auto& xv = x.data();
        const auto& gv = gamma.data();
        const auto& bv = beta.data();
        auto& ov = out.mutable_data();
        for (int64_t r = 0; r < rows; ++r) {
            const S* xr = xv.data() + r * d;
            double mean = 0;
            for (int j = 0; j < d; ++j) mean += double(xr[j]);
            mean /= d;
            double var = 0;
            for (int j = 0; j < d; ++j) {
                double t = double(xr[j]) - mean;
                var += t * t;
            }
            var /= d;
            const double inv = 1.0 / std::sqrt(var + eps);
            invstd[size_t(r)] = S(inv);
            S* xh = xhat.data() + r * d;
            S* yr = ov.data() + r * d;
            for (int j = 0; j < d; ++j) {
                xh[j] = S((double(xr[j]) - mean) * inv);
                yr[j] = S(double(xh[j]) * double(gv[j]) + double(bv[j]));
            }
        }
    }
    ensure_finite("layer_norm", out);
    if (grad_enabled_for<S>({&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        Tensor<S> xc = x, gc = gamma, bc = beta, oc = out;
        auto xh = std::make_shared<std::vector<S>>(std::move(xhat));
        auto inv = std::make_shared<std::vector<S>>(std::move(invstd));
        Tape<S>::current()->record([xc, gc, bc, oc, xh, inv, rows, d]() mutable {
            const auto& go = oc.grad();
            if (gc.requires_grad()) {
                auto& gg = gc.grad();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j)
                        gg[size_t(j)] += go[size_t(r * d + j)] * (*xh)[size_t(r * d + j)];
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j) gb[size_t(j)] += go[size_t(r * d + j)];
            }
            if (xc.requires_grad()) {
                auto& gx = xc.grad();
                const auto& gv = gc.data();
                for (int64_t r = 0; r < rows; ++r) {
                    const S* gr = go.data() + r * d;
                    const S* xhr = xh->data() + r * d;
                    double mean_g = 0, mean_gx = 0;
                    for (int j = 0; j < d; ++j) {
                        const double g = double(gr[j]) * double(gv[j]);
                        mean_g += g;
                        mean_gx += g * double(xhr[j]);
                    }
                    mean_g /= d;
                    mean_gx /= d;
                    const double is = double((*inv)[size_t(r)]);
                    S* gxr = gx.data() + r * d;
                    for (int j = 0; j < d; ++j) {
                        const double g = double(gr[j]) * double(gv[j]);
                        gxr[j] += S((g - mean_g - double(xhr[j]) * mean_gx) * is);
                    }
                }
            }
        });
    }
    return out;
}

namespace detail {
inline constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;
} // namespace detail

template <typename S>
Tensor<S> gelu(const Tensor<S>& a) {
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    for (size_t i = 0; i < ov.size(); ++i) {
        const double x = double(av[i]);
        ov[i] = S(0.5 * x * (1.0 + std::tanh(detail::kGeluC * (x + detail::kGeluA * x * x * x))));
    }
    ensure_finite("gelu", out);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            const auto& av = ac.data();
            for (size_t i = 0; i < go.size(); ++i) {
                const double x = double(av[i]);
                const double t = std::tanh(detail::kGeluC * (x + detail::kGeluA * x * x * x));
                const double dg = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * detail::kGeluC * (1.0 + 3.0 * detail::kGeluA * x * x);
                ga[i] += S(double(go[i]) * dg);
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > S(0) ? av[i] : S(0);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            const auto& av = ac.data();
            for (size_t i = 0; i < go.size(); ++i)
                if (av[i] > S(0)) ga[i] += go[i];
        });
    }
    return out;
}

// Row gather: used for parameter embeddings and as the general row-selection
// primitive (pair construction, mirroring). ids are not differentiable.
template <typename S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& ids) {
    detail::check_2d("embedding_lookup", table.shape());
    const int rows = table.dim(0), cols = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= rows)
            throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(rows) + ")");
    Tensor<S> out(Shape{int(ids.size()), cols});
    const auto& tv = table.data();
    auto& ov = out.mutable_data();
    for (size_t r = 0; r < ids.size(); ++r)
        std::copy_n(tv.data() + size_t(ids[r]) * cols, cols, ov.data() + r * cols);
    if (grad_enabled_for<S>({&table})) {
        out.set_requires_grad(true);
        Tensor<S> tc = table, oc = out;
        auto idc = std::make_shared<std::vector<int>>(ids);
        Tape<S>::current()->record([tc, oc, idc, cols]() mutable {
            if (!tc.requires_grad()) return;
            auto& gt = tc.grad();
            const auto& go = oc.grad();
            for (size_t r = 0; r < idc->size(); ++r) {
                S* dst = gt.data() + size_t((*idc)[r]) * cols;
                const S* src = go.data() + r * cols;
                for (int j = 0; j < cols; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& a) {
    double acc = 0;
    for (S v : a.data()) acc += double(v);
    Tensor<S> out = Tensor<S>::scalar(S(acc));
    ensure_finite("sum", out);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const S g = oc.grad()[0];
            for (auto& v : ga) v += g;
        });
    }
    return out;
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& a) {
    if (a.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum_all(a), 1.0 / double(a.numel()));
}

// axis reduction for 2-D tensors; axis=0 sums rows out, axis=1 sums columns out
template <typename S>
Tensor<S> sum_axis(const Tensor<S>& a, int axis) {
    detail::check_2d("sum_axis", a.shape());
    const int m = a.dim(0), n = a.dim(1);
    if (axis != 0 && axis != 1) throw ShapeError("sum_axis: axis must be 0 or 1");
    Tensor<S> out(axis == 0 ? Shape{n} : Shape{m});
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    if (axis == 0) {
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int i = 0; i < m; ++i) acc += double(av[size_t(i) * n + j]);
            ov[size_t(j)] = S(acc);
        }
    } else {
        for (int i = 0; i < m; ++i) {
            double acc = 0;
            for (int j = 0; j < n; ++j) acc += double(av[size_t(i) * n + j]);
            ov[size_t(i)] = S(acc);
        }
    }
    ensure_finite("sum_axis", out);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        Tape<S>::current()->record([ac, oc, m, n, axis]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    ga[size_t(i) * n + j] += axis == 0 ? go[size_t(j)] : go[size_t(i)];
        });
    }
    return out;
}

template <typename S>
Tensor<S> mean_axis(const Tensor<S>& a, int axis) {
    const int denom = axis == 0 ? a.dim(0) : a.dim(1);
    return scale(sum_axis(a, axis), 1.0 / double(denom));
}

// Entries where mask==0 are replaced by fill_value; gradients flow only
// through kept entries.
template <typename S>
Tensor<S> masked_fill(const Tensor<S>& a, const std::vector<uint8_t>& keep_mask, double fill_value) {
    if (int64_t(keep_mask.size()) != a.numel())
        throw ShapeError("masked_fill: mask length " + std::to_string(keep_mask.size()) +
                         " vs tensor numel " + std::to_string(a.numel()));
    Tensor<S> out(a.shape());
    const auto& av = a.data();
    auto& ov = out.mutable_data();
    for (size_t i = 0; i < ov.size(); ++i) ov[i] = keep_mask[i] ? av[i] : S(fill_value);
    if (grad_enabled_for<S>({&a})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, oc = out;
        auto mk = std::make_shared<std::vector<uint8_t>>(keep_mask);
        Tape<S>::current()->record([ac, oc, mk]() mutable {
            if (!ac.requires_grad()) return;
            auto& ga = ac.grad();
            const auto& go = oc.grad();
            for (size_t i = 0; i < go.size(); ++i)
                if ((*mk)[i]) ga[i] += go[i];
        });
    }
    return out;
}

// Mean cross-entropy over rows with target >= 0 (targets of -1 are ignored).
// Fused log-sum-exp formulation; backward is softmax(x) - onehot per counted row.
template <typename S>
Tensor<S> cross_entropy_with_logits(const Tensor<S>& logits, const std::vector<int>& targets) {
    detail::check_2d("cross_entropy", logits.shape());
    const int n = logits.dim(0), c = logits.dim(1);
    if (int(targets.size()) != n)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
    int counted = 0;
    double total = 0;
    const auto& lv = logits.data();
    for (int i = 0; i < n; ++i) {
        const int t = targets[size_t(i)];
        if (t < 0) continue;
        if (t >= c) throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range");
        const S* x = lv.data() + size_t(i) * c;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) mx = std::max(mx, double(x[j]));
        double lse = 0;
        for (int j = 0; j < c; ++j) lse += std::exp(double(x[j]) - mx);
        lse = mx + std::log(lse);
        total += lse - double(x[t]);
        ++counted;
    }
    if (counted == 0) throw ShapeError("cross_entropy: no rows with a valid target");
    Tensor<S> out = Tensor<S>::scalar(S(total / counted));
    ensure_finite("cross_entropy", out);
    if (grad_enabled_for<S>({&logits})) {
        out.set_requires_grad(true);
        Tensor<S> lc = logits, oc = out;
        auto tg = std::make_shared<std::vector<int>>(targets);
        Tape<S>::current()->record([lc, oc, tg, n, c, counted]() mutable {
            if (!lc.requires_grad()) return;
            auto& gl = lc.grad();
            const auto& lv = lc.data();
            const double g = double(oc.grad()[0]) / counted;
            for (int i = 0; i < n; ++i) {
                const int t = (*tg)[size_t(i)];
                if (t < 0) continue;
                const S* x = lv.data() + size_t(i) * c;
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < c; ++j) mx = std::max(mx, double(x[j]));
                double sum = 0;
                for (int j = 0; j < c; ++j) sum += std::exp(double(x[j]) - mx);
                S* gr = gl.data() + size_t(i) * c;
                for (int j = 0; j < c; ++j) {
                    double p = std::exp(double(x[j]) - mx) / sum;
                    gr[j] += S(g * (p - (j == t ? 1.0 : 0.0)));
                }
            }
        });
    }
    return out;
}

// mean over all elements of (a-b)^2
template <typename S>
Tensor<S> squared_error(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("squared_error: shapes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const auto& av = a.data();
    const auto& bv = b.data();
    double acc = 0;
    for (size_t i = 0; i < av.size(); ++i) {
        const double d = double(av[i]) - double(bv[i]);
        acc += d * d;
    }
    Tensor<S> out = Tensor<S>::scalar(S(acc / double(av.size())));
    ensure_finite("squared_error", out);
    if (grad_enabled_for<S>({&a, &b})) {
        out.set_requires_grad(true);
        Tensor<S> ac = a, bc = b, oc = out;
        Tape<S>::current()->record([ac, bc, oc]() mutable {
            const auto& av = ac.data();
            const auto& bv = bc.data();
            const double g = 2.0 * double(oc.grad()[0]) / double(av.size());
            if (ac.requires_grad()) {
                auto& ga = ac.grad();
                for (size_t i = 0; i < av.size(); ++i)
                    ga[i] += S(g * (double(av[i]) - double(bv[i])));
            }
            if (bc.requires_grad()) {
                auto& gb = bc.grad();
                for (size_t i = 0; i < av.size(); ++i)
                    gb[i] += S(g * (double(bv[i]) - double(av[i])));
            }
        });
    }
    return out;
}

// Stop-gradient copy.
template <typename S>
Tensor<S> detach(const Tensor<S>& a) {
    return Tensor<S>(a.shape(), a.data());
}

// Quantizer pass-through: forward emits hard_values, backward copies the
// output gradient to src coordinatewise, exactly.
template <typename S>
Tensor<S> straight_through(const Tensor<S>& src, const std::vector<S>& hard_values) {
    if (int64_t(hard_values.size()) != src.numel())
        throw ShapeError("straight_through: replacement length mismatch");
    Tensor<S> out(src.shape(), hard_values);
    ensure_finite("straight_through", out);
    if (grad_enabled_for<S>({&src})) {
        out.set_requires_grad(true);
        Tensor<S> sc = src, oc = out;
        Tape<S>::current()->record([sc, oc]() mutable {
            if (sc.requires_grad()) detail::accumulate(sc, oc.grad());
        });
    }
    return out;
}

} // namespace gvt
