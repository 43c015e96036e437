#pragma once

// Graph Transformer layer with joint node/edge updates, rotary position
// embeddings, and the symmetric pairwise edge-initialization network.
//
// Layer formulation (width d, h heads, d_h = d/h):
//   X   = layer_norm(H)
//   l^h_ij = (q_i . k_j)/sqrt(d_h) + (W_e e_ij)_h        per-head scalar bias
//   A^h = softmax_j(masked l^h), H1 = H + W_o [A^1 V^1 ... A^h V^h]
//   H'  = H1 + FFN(layer_norm(H1))                        pre-norm residuals
//   E'  = layer_norm(E + FFN_e(e_ij || h'_i + h'_j || h'_i * h'_j))
// The edge network consumes order-independent pair features, so E' stays
// bit-for-bit symmetric whenever E is, and the layer is exactly permutation
// equivariant.

#include "gvt/nn.hpp"
#include "gvt/ops.hpp"
#include "gvt/tensor.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace gvt {

template <typename S>
struct GtLayerParams {
    int d = 0;
    int heads = 0;
    LayerNormParams<S> ln1;   // before attention
    Linear<S> wq, wk, wv, wo; // d -> d
    Linear<S> we;             // d -> heads, per-head edge logit bias
    LayerNormParams<S> ln2;   // before the node FFN
    Mlp<S> ffn;               // d -> ff -> d
    Mlp<S> edge_ffn;          // 3d -> d -> d
    LayerNormParams<S> ln_e;  // after the edge residual

    GtLayerParams() = default;
    GtLayerParams(int d_, int heads_, int ff_width, Rng& rng)
        : d(d_), heads(heads_), ln1(d_), wq(d_, d_, rng), wk(d_, d_, rng), wv(d_, d_, rng),
          wo(d_, d_, rng), we(d_, heads_, rng), ln2(d_), ffn(d_, ff_width, d_, rng),
          edge_ffn(3 * d_, d_, d_, rng), ln_e(d_) {
        if (d_ <= 0 || heads_ <= 0 || d_ % heads_ != 0)
            throw ShapeError("gt layer: d must be a positive multiple of heads");
    }

    void collect(ParamList<S>& out, const std::string& prefix) const {
        ln1.collect(out, prefix + ".ln1");
        wq.collect(out, prefix + ".wq");
        wk.collect(out, prefix + ".wk");
        wv.collect(out, prefix + ".wv");
        wo.collect(out, prefix + ".wo");
        we.collect(out, prefix + ".we");
        ln2.collect(out, prefix + ".ln2");
        ffn.collect(out, prefix + ".ffn");
        edge_ffn.collect(out, prefix + ".edge_ffn");
        ln_e.collect(out, prefix + ".ln_e");
    }
};

namespace detail {

// row indices of the left/right node of every (i,j) pair, row-major
inline std::pair<std::vector<int>, std::vector<int>> pair_index_rows(int n) {
    std::vector<int> left(size_t(n) * size_t(n)), right(size_t(n) * size_t(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            left[size_t(i) * size_t(n) + size_t(j)] = i;
            right[size_t(i) * size_t(n) + size_t(j)] = j;
        }
    }
    return {std::move(left), std::move(right)};
}

// (h_i + h_j || h_i * h_j) for all pairs: commutative ops keep rows (i,j)
// and (j,i) bitwise identical
template <typename S>
Tensor<S> symmetric_pair_features(const Tensor<S>& h, int n) {
    auto [left, right] = pair_index_rows(n);
    Tensor<S> hl = embedding_lookup(h, left);
    Tensor<S> hr = embedding_lookup(h, right);
    return concat<S>({add(hl, hr), mul(hl, hr)}, 1);
}

} // namespace detail

// Joint node/edge update. h: n x d, e: n*n x d (row-major pairs), mask:
// n*n keep flags (nonzero = attend). Throws NumericalError if any query row
// has every key masked out.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> gt_layer(const Tensor<S>& h, const Tensor<S>& e,
                                         const std::vector<uint8_t>& mask,
                                         const GtLayerParams<S>& p) {
    const int n = h.dim(0);
    if (h.dim(1) != p.d) throw ShapeError("gt_layer: node width mismatch");
    if (e.dim(0) != n * n || e.dim(1) != p.d) throw ShapeError("gt_layer: edge shape mismatch");
    if (mask.size() != size_t(n) * size_t(n)) throw ShapeError("gt_layer: mask size mismatch");
    for (int i = 0; i < n; ++i) {
        bool any = false;
        for (int j = 0; j < n && !any; ++j) any = mask[size_t(i) * size_t(n) + size_t(j)] != 0;
        if (!any)
            throw NumericalError("gt_layer: attention row " + std::to_string(i) +
                                 " has no unmasked entries");
    }
    const int d_h = p.d / p.heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(d_h));

    Tensor<S> x = layer_norm(h, p.ln1.gamma, p.ln1.beta);
    Tensor<S> q = p.wq(x);
    Tensor<S> k = p.wk(x);
    Tensor<S> v = p.wv(x);
    Tensor<S> edge_bias = p.we(e); // n*n x heads

    std::vector<Tensor<S>> head_outs;
    head_outs.reserve(size_t(p.heads));
    for (int hd = 0; hd < p.heads; ++hd) {
        Tensor<S> qh = slice(q, 1, hd * d_h, d_h);
        Tensor<S> kh = slice(k, 1, hd * d_h, d_h);
        Tensor<S> vh = slice(v, 1, hd * d_h, d_h);
        Tensor<S> logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
        Tensor<S> bias = reshape(slice(edge_bias, 1, hd, 1), {n, n});
        logits = add(logits, bias);
        logits = masked_fill(logits, mask, S(-1e30));
        Tensor<S> att = softmax(logits);
        head_outs.push_back(matmul(att, vh));
    }
    Tensor<S> att_cat = p.heads == 1 ? head_outs[0] : concat<S>(head_outs, 1);
    Tensor<S> h1 = add(h, p.wo(att_cat));
    Tensor<S> h2 = add(h1, p.ffn(layer_norm(h1, p.ln2.gamma, p.ln2.beta)));

    Tensor<S> pair = concat<S>({e, detail::symmetric_pair_features(h2, n)}, 1);
    Tensor<S> e2 = layer_norm(add(e, p.edge_ffn(pair)), p.ln_e.gamma, p.ln_e.beta);
    return {h2, e2};
}

struct RopeConfig {
    int dim = 0;           // width of the rotated vectors; must be even
    double base = 10000.0; // frequency base theta

    double freq(int t) const { return std::pow(base, -2.0 * double(t) / double(dim)); }
};

// Rotates consecutive scalar pairs (z_{2t}, z_{2t+1}) of row m by angle
// m * base^(-2t/dim). Norm-preserving; inner products of rotated pairs
// depend only on relative position. The backward pass applies the inverse
// rotation to the output gradients.
template <typename S>
Tensor<S> rope_apply(const Tensor<S>& z, const RopeConfig& cfg) {
    if (z.ndim() != 2) throw ShapeError("rope_apply: expected a 2-d input");
    const int n = z.dim(0);
    const int d = z.dim(1);
    if (d != cfg.dim) throw ShapeError("rope_apply: config dim mismatch");
    if (d % 2 != 0) throw ShapeError("rope_apply: width must be even");
    const int half = d / 2;

    // computed in double, cast once, so forward and backward see the same S
    std::vector<S> cs(size_t(n) * size_t(half)), sn(size_t(n) * size_t(half));
    for (int m = 0; m < n; ++m) {
        for (int t = 0; t < half; ++t) {
            const double ang = double(m) * cfg.freq(t);
            cs[size_t(m) * size_t(half) + size_t(t)] = S(std::cos(ang));
            sn[size_t(m) * size_t(half) + size_t(t)] = S(std::sin(ang));
        }
    }

    Tensor<S> out(Shape{n, d});
    {
        const S* zd = z.data().data();
        S* od = out.mutable_data().data();
        for (int m = 0; m < n; ++m) {
            for (int t = 0; t < half; ++t) {
                const S c = cs[size_t(m) * size_t(half) + size_t(t)];
                const S s = sn[size_t(m) * size_t(half) + size_t(t)];
                const S a = zd[size_t(m) * size_t(d) + size_t(2 * t)];
                const S b = zd[size_t(m) * size_t(d) + size_t(2 * t + 1)];
                od[size_t(m) * size_t(d) + size_t(2 * t)] = c * a - s * b;
                od[size_t(m) * size_t(d) + size_t(2 * t + 1)] = s * a + c * b;
            }
        }
    }
    ensure_finite("rope_apply", out);
    if (grad_enabled_for<S>({&z})) {
        out.set_requires_grad(true);
        Tensor<S> zc = z, oc = out;
        Tape<S>::current()->record([zc, oc, cs, sn, n, d, half]() mutable {
            auto& zg = zc.grad();
            const auto& og = oc.grad();
            for (int m = 0; m < n; ++m) {
                for (int t = 0; t < half; ++t) {
                    const S c = cs[size_t(m) * size_t(half) + size_t(t)];
                    const S s = sn[size_t(m) * size_t(half) + size_t(t)];
                    const S ga = og[size_t(m) * size_t(d) + size_t(2 * t)];
                    const S gb = og[size_t(m) * size_t(d) + size_t(2 * t + 1)];
                    zg[size_t(m) * size_t(d) + size_t(2 * t)] += c * ga + s * gb;
                    zg[size_t(m) * size_t(d) + size_t(2 * t + 1)] += -s * ga + c * gb;
                }
            }
        });
    }
    return out;
}

template <typename S>
struct EdgeInitParams {
    Mlp<S> mlp; // 2d -> d -> d over (h_i + h_j || h_i * h_j)

    EdgeInitParams() = default;
    EdgeInitParams(int d, Rng& rng) : mlp(2 * d, d, d, rng) {}

    void collect(ParamList<S>& out, const std::string& prefix) const {
        mlp.collect(out, prefix + ".mlp");
    }
};

// e0_ij = MLP(h_i + h_j || h_i * h_j): rows (i,j) and (j,i) receive bitwise
// identical inputs, so the output is exactly symmetric. Returns n*n x d.
template <typename S>
Tensor<S> edge_init(const Tensor<S>& h, const EdgeInitParams<S>& p) {
    const int n = h.dim(0);
    return p.mlp(detail::symmetric_pair_features(h, n));
}

} // namespace gvt
