#pragma once

// Stage 1: graph VQ-VAE. The encoder runs masked graph-transformer layers
// over one-hot atom/bond features plus Laplacian positional encodings, fuses
// node states with mean-aggregated incident edge states, and projects to
// continuous latents Ze. A nearest-neighbor quantizer snaps each row to a
// learnable codebook (straight-through gradients). The decoder rotates the
// quantized rows with RoPE, rebuilds pairwise edge features from scratch,
// runs fully-connected layers, and emits atom-type and bond-type logits.
//
// Training loss:
//   L = lambda_node * CE(atom logits) + lambda_edge * CE(bond logits, i<j)
//     + ||sg(Ze) - Zq||^2 + beta * ||Ze - sg(Zq)||^2

#include "gvt/gt.hpp"
#include "gvt/molgraph.hpp"
#include "gvt/nn.hpp"
#include "gvt/ordering.hpp"
#include "gvt/spectral.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace gvt {

struct VqVaeConfig {
    int l_enc = 3;
    int l_dec = 3;
    int d = 64;
    int heads = 4;
    int k_c = 256;
    int d_c = 64;
    double lambda_node = 1.0;
    double lambda_edge = 1.0;
    double beta = 0.25;
    int k_pe = 8;
    int ff_mult = 2;
    bool use_rope = true;
    double rope_base = 10000.0;
    OrderScheme ordering = OrderScheme::kRcm;
    Alphabet alphabet = Alphabet::qm9();

    int d_x() const { return alphabet.size(); }

    void validate() const {
        if (l_enc < 1 || l_dec < 1 || d < 1 || heads < 1 || k_c < 1 || d_c < 1 || k_pe < 1 ||
            ff_mult < 1)
            throw ConfigError("vqvae config: all sizes must be positive");
        if (d % heads != 0) throw ConfigError("vqvae config: d must be divisible by heads");
        if (d_c % 2 != 0) throw ConfigError("vqvae config: d_c must be even (RoPE pairs)");
        if (beta <= 0.0 || beta > 1.0) throw ConfigError("vqvae config: beta must be in (0,1]");
        if (lambda_node < 0.0 || lambda_edge < 0.0)
            throw ConfigError("vqvae config: loss weights must be non-negative");
        if (alphabet.size() < 1) throw ConfigError("vqvae config: empty alphabet");
    }
};

template <typename S>
struct VqVaeParams {
    VqVaeConfig cfg;
    Linear<S> node_embed; // (d_x + k_pe) -> d
    Linear<S> edge_embed; // 4 -> d
    std::vector<GtLayerParams<S>> enc;
    LayerNormParams<S> enc_ln; // final node norm before fusion
    Linear<S> fusion;          // 2d -> d_c
    Tensor<S> codebook;        // k_c x d_c
    Linear<S> dec_in;          // d_c -> d
    EdgeInitParams<S> dec_edge_init;
    std::vector<GtLayerParams<S>> dec;
    LayerNormParams<S> dec_ln; // final node norm before the node head
    Linear<S> node_head;       // d -> d_x
    Linear<S> edge_head;       // d -> 4

    std::vector<int64_t> usage_counts; // per-code quantizer hits (in-memory)

    VqVaeParams() = default;
    VqVaeParams(const VqVaeConfig& c, Rng& rng) : cfg(c) {
        cfg.validate();
        node_embed = Linear<S>(cfg.d_x() + cfg.k_pe, cfg.d, rng);
        edge_embed = Linear<S>(GraphFeatures::d_e, cfg.d, rng);
        for (int l = 0; l < cfg.l_enc; ++l)
            enc.emplace_back(cfg.d, cfg.heads, cfg.ff_mult * cfg.d, rng);
        enc_ln = LayerNormParams<S>(cfg.d);
        fusion = Linear<S>(2 * cfg.d, cfg.d_c, rng);
        codebook =
            init_parameter<S>({cfg.k_c, cfg.d_c}, Init::kCodebookUniform, rng, -1.0 / cfg.k_c,
                              1.0 / cfg.k_c);
        codebook.set_requires_grad(true);
        dec_in = Linear<S>(cfg.d_c, cfg.d, rng);
        dec_edge_init = EdgeInitParams<S>(cfg.d, rng);
        for (int l = 0; l < cfg.l_dec; ++l)
            dec.emplace_back(cfg.d, cfg.heads, cfg.ff_mult * cfg.d, rng);
        dec_ln = LayerNormParams<S>(cfg.d);
        node_head = Linear<S>(cfg.d, cfg.d_x(), rng);
        edge_head = Linear<S>(cfg.d, GraphFeatures::d_e, rng);
        usage_counts.assign(size_t(cfg.k_c), 0);
    }

    ParamList<S> collect() const {
        ParamList<S> out;
        node_embed.collect(out, "node_embed");
        edge_embed.collect(out, "edge_embed");
        for (size_t l = 0; l < enc.size(); ++l) enc[l].collect(out, "enc." + std::to_string(l));
        enc_ln.collect(out, "enc_ln");
        fusion.collect(out, "fusion");
        out.push_back({"codebook", codebook});
        dec_in.collect(out, "dec_in");
        dec_edge_init.collect(out, "dec_edge_init");
        for (size_t l = 0; l < dec.size(); ++l) dec[l].collect(out, "dec." + std::to_string(l));
        dec_ln.collect(out, "dec_ln");
        node_head.collect(out, "node_head");
        edge_head.collect(out, "edge_head");
        return out;
    }
};

namespace detail {

template <typename S>
Tensor<S> constant_tensor(Shape shape, const std::vector<double>& values) {
    std::vector<S> data(values.size());
    for (size_t i = 0; i < values.size(); ++i) data[i] = S(values[i]);
    return Tensor<S>(std::move(shape), std::move(data));
}

inline std::vector<uint8_t> bond_self_mask(const MolGraph& g) {
    const int n = g.n();
    std::vector<uint8_t> mask(size_t(n) * size_t(n), 0);
    for (int i = 0; i < n; ++i) mask[size_t(i) * size_t(n) + size_t(i)] = 1;
    for (const auto& b : g.bonds()) {
        mask[size_t(b.a) * size_t(n) + size_t(b.b)] = 1;
        mask[size_t(b.b) * size_t(n) + size_t(b.a)] = 1;
    }
    return mask;
}

// constant n x n*n matrix averaging the incident-edge rows of each node:
// row i has 1/deg(i) at column j*n+i for every bonded j
template <typename S>
Tensor<S> edge_mean_matrix(const MolGraph& g) {
    const int n = g.n();
    std::vector<S> m(size_t(n) * size_t(n) * size_t(n), S(0));
    for (int i = 0; i < n; ++i) {
        const int deg = g.degree(i);
        if (deg == 0) continue;
        const S w = S(1.0 / double(deg));
        for (const auto& [j, ord] : g.neighbors(i))
            m[size_t(i) * size_t(n) * size_t(n) + size_t(j) * size_t(n) + size_t(i)] = w;
    }
    return Tensor<S>(Shape{n, n * n}, std::move(m));
}

} // namespace detail

// Encoder with the positional-encoding matrix supplied explicitly
// (row-major n x k_pe); `encode` below derives it from the graph spectrum.
template <typename S>
Tensor<S> encode_with_pe(const MolGraph& g, const std::vector<double>& pe,
                         const VqVaeParams<S>& p) {
    const int n = g.n();
    if (int(pe.size()) != n * p.cfg.k_pe) throw ShapeError("encode: positional encoding size");
    const GraphFeatures f = featurize(g, p.cfg.alphabet);
    Tensor<S> x = detail::constant_tensor<S>({n, f.d_x}, f.x);
    Tensor<S> pet = detail::constant_tensor<S>({n, p.cfg.k_pe}, pe);
    Tensor<S> e_onehot = detail::constant_tensor<S>({n * n, GraphFeatures::d_e}, f.e);

    Tensor<S> h = p.node_embed(concat<S>({x, pet}, 1));
    Tensor<S> e = p.edge_embed(e_onehot);
    const std::vector<uint8_t> mask = detail::bond_self_mask(g);
    for (const auto& layer : p.enc) std::tie(h, e) = gt_layer(h, e, mask, layer);
    h = layer_norm(h, p.enc_ln.gamma, p.enc_ln.beta);
    Tensor<S> e_agg = matmul(detail::edge_mean_matrix<S>(g), e); // n x d, zero rows if no bonds
    return p.fusion(concat<S>({h, e_agg}, 1));
}

template <typename S>
Tensor<S> encode(const MolGraph& g, const VqVaeParams<S>& p) {
    return encode_with_pe(g, lap_pe(g, p.cfg.k_pe).p, p);
}

template <typename S>
struct QuantizeResult {
    Tensor<S> zq;            // straight-through output for the decoder
    std::vector<int> codes;  // nearest codebook row per latent, ties to lowest
    Tensor<S> codebook_loss; // ||sg(Ze) - Zq||^2 mean
    Tensor<S> commit_loss;   // ||Ze - sg(Zq)||^2 mean
};

template <typename S>
std::vector<int> nearest_codes(const Tensor<S>& ze, const Tensor<S>& codebook) {
    const int n = ze.dim(0), d_c = ze.dim(1), k_c = codebook.dim(0);
    if (k_c < 1) throw ShapeError("quantize: empty codebook");
    if (codebook.dim(1) != d_c) throw ShapeError("quantize: latent width mismatch");
    std::vector<int> codes(size_t(n), 0);
    const S* z = ze.data().data();
    const S* c = codebook.data().data();
    for (int i = 0; i < n; ++i) {
        double best = -1.0;
        int arg = 0;
        for (int k = 0; k < k_c; ++k) {
            double dist = 0.0;
            for (int t = 0; t < d_c; ++t) {
                const double diff =
                    double(z[size_t(i) * size_t(d_c) + size_t(t)]) -
                    double(c[size_t(k) * size_t(d_c) + size_t(t)]);
                dist += diff * diff;
            }
            if (best < 0.0 || dist < best) { // strict: ties keep the lowest k
                best = dist;
                arg = k;
            }
        }
        codes[size_t(i)] = arg;
    }
    return codes;
}

template <typename S>
QuantizeResult<S> quantize(const Tensor<S>& ze, VqVaeParams<S>& p, bool update_usage = true) {
    QuantizeResult<S> r;
    r.codes = nearest_codes(ze, p.codebook);
    if (update_usage)
        for (int k : r.codes) ++p.usage_counts[size_t(k)];
    Tensor<S> rows = embedding_lookup(p.codebook, r.codes); // exact codebook rows
    r.codebook_loss = squared_error(rows, detach(ze));
    r.commit_loss = squared_error(ze, detach(rows));
    r.zq = straight_through(ze, rows.data());
    return r;
}

template <typename S>
struct DecodeResult {
    Tensor<S> x_logits; // n x d_x
    Tensor<S> a_logits; // n*n x d_e, symmetric, diagonal forced to "no bond"
};

template <typename S>
DecodeResult<S> decode(const Tensor<S>& zq, const VqVaeParams<S>& p) {
    const int n = zq.dim(0);
    if (zq.dim(1) != p.cfg.d_c) throw ShapeError("decode: latent width mismatch");
    Tensor<S> h0 = zq;
    if (p.cfg.use_rope) {
        RopeConfig rc;
        rc.dim = p.cfg.d_c;
        rc.base = p.cfg.rope_base;
        h0 = rope_apply(zq, rc);
    }
    Tensor<S> h = p.dec_in(h0);
    Tensor<S> e = edge_init(h, p.dec_edge_init);
    const std::vector<uint8_t> full(size_t(n) * size_t(n), 1);
    for (const auto& layer : p.dec) std::tie(h, e) = gt_layer(h, e, full, layer);
    h = layer_norm(h, p.dec_ln.gamma, p.dec_ln.beta);

    DecodeResult<S> out;
    out.x_logits = p.node_head(h);
    Tensor<S> raw = p.edge_head(e); // n*n x d_e
    std::vector<int> mirror(size_t(n) * size_t(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mirror[size_t(i) * size_t(n) + size_t(j)] = j * n + i;
    Tensor<S> sym = scale(add(raw, embedding_lookup(raw, mirror)), 0.5);

    // pin the diagonal to a hard "no bond" prediction
    const size_t cells = size_t(n) * size_t(n) * size_t(GraphFeatures::d_e);
    std::vector<uint8_t> keep_ch0(cells, 1), keep_rest(cells, 1);
    for (int i = 0; i < n; ++i) {
        const size_t base = (size_t(i) * size_t(n) + size_t(i)) * size_t(GraphFeatures::d_e);
        keep_ch0[base] = 0;
        for (int c = 1; c < GraphFeatures::d_e; ++c) keep_rest[base + size_t(c)] = 0;
    }
    sym = masked_fill(sym, keep_ch0, S(20));
    sym = masked_fill(sym, keep_rest, S(-20));
    out.a_logits = sym;
    return out;
}

template <typename S>
DecodeResult<S> decode_codes(const std::vector<int>& codes, const VqVaeParams<S>& p) {
    for (int k : codes)
        if (k < 0 || k >= p.cfg.k_c) throw DataError("decode: code index out of range");
    return decode(embedding_lookup(p.codebook, codes), p);
}

template <typename S>
struct VqVaeLossTerms {
    Tensor<S> total, node_ce, edge_ce, codebook, commit;
};

template <typename S>
VqVaeLossTerms<S> vqvae_loss(const MolGraph& g, const DecodeResult<S>& dec,
                             const Tensor<S>& codebook_loss, const Tensor<S>& commit_loss,
                             const VqVaeConfig& cfg) {
    const int n = g.n();
    std::vector<int> node_targets(size_t(n), 0);
    for (int i = 0; i < n; ++i) node_targets[size_t(i)] = g.atom(i);
    VqVaeLossTerms<S> r;
    r.node_ce = cross_entropy_with_logits(dec.x_logits, node_targets);
    if (n > 1) {
        std::vector<int> edge_targets(size_t(n) * size_t(n), -1); // i<j only
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                edge_targets[size_t(i) * size_t(n) + size_t(j)] = g.bond_order(i, j);
        r.edge_ce = cross_entropy_with_logits(dec.a_logits, edge_targets);
    } else {
        r.edge_ce = Tensor<S>::scalar(S(0));
    }
    r.codebook = codebook_loss;
    r.commit = commit_loss;
    r.total = add(add(scale(r.node_ce, cfg.lambda_node), scale(r.edge_ce, cfg.lambda_edge)),
                  add(r.codebook, scale(r.commit, cfg.beta)));
    return r;
}

// Full forward pass on an already-RCM-ordered graph.
template <typename S>
VqVaeLossTerms<S> vqvae_forward(const MolGraph& g, const std::vector<double>& pe,
                                VqVaeParams<S>& p, bool update_usage) {
    Tensor<S> ze = encode_with_pe(g, pe, p);
    QuantizeResult<S> q = quantize(ze, p, update_usage);
    DecodeResult<S> dec = decode(q.zq, p);
    return vqvae_loss(g, dec, q.codebook_loss, q.commit_loss, p.cfg);
}

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 3e-4;
    double weight_decay = 0.0;
    double grad_clip = 1.0;
    int val_size = 32; // per-epoch reconstruction slice when no val set given
    // early stop thresholds (disabled when <= 0): VQ-VAE stops once the
    // validation reconstruction rate reaches stop_at_val_recon percent; the
    // AR trainer stops once next-token accuracy reaches stop_at_accuracy
    double stop_at_val_recon = -1.0;
    double stop_at_accuracy = -1.0;
};

struct EpochStats {
    int epoch = 0;
    double total = 0, node_ce = 0, edge_ce = 0, codebook = 0, commit = 0;
    double usage_entropy = 0;  // nats over this epoch's code usage
    double val_recon_rate = 0; // percent
    int dead_codes_reseeded = 0;
    double seconds = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct ReconReport {
    double rate_percent = 0; // fraction of graphs rebuilt with zero errors
    std::vector<int> errors_per_graph;
};

// Count reconstruction errors of one RCM-ordered graph: atom-type argmax
// mismatches plus bond-entry argmax mismatches over unordered pairs.
template <typename S>
int reconstruction_errors(const MolGraph& g, VqVaeParams<S>& p) {
    Tensor<S> ze = encode(g, p);
    QuantizeResult<S> q = quantize(ze, p, /*update_usage=*/false);
    DecodeResult<S> dec = decode(q.zq, p);
    const int n = g.n();
    const int d_x = p.cfg.d_x();
    int errors = 0;
    const auto& xl = dec.x_logits.data();
    for (int i = 0; i < n; ++i) {
        int arg = 0;
        for (int t = 1; t < d_x; ++t)
            if (xl[size_t(i) * size_t(d_x) + size_t(t)] > xl[size_t(i) * size_t(d_x) + size_t(arg)])
                arg = t;
        if (arg != g.atom(i)) ++errors;
    }
    const auto& al = dec.a_logits.data();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const size_t base = (size_t(i) * size_t(n) + size_t(j)) * size_t(GraphFeatures::d_e);
            int arg = 0;
            for (int c = 1; c < GraphFeatures::d_e; ++c)
                if (al[base + size_t(c)] > al[base + size_t(arg)]) arg = c;
            if (arg != g.bond_order(i, j)) ++errors;
        }
    }
    return errors;
}

// Orders a raw molecule with the model's configured scheme. Random orderings
// draw from a fixed internal stream so repeat evaluations agree.
inline Rng eval_ordering_rng() { return Rng(0x0e7a11u); }

template <typename S>
MolGraph order_for_model(const MolGraph& g, const VqVaeConfig& cfg, Rng& rng) {
    return apply_ordering(g, make_ordering(g, cfg.ordering, rng));
}

// Reconstruction over raw (unordered) molecules; each is ordered with the
// model's scheme first.
template <typename S>
ReconReport reconstruction_rate(const std::vector<MolGraph>& corpus, VqVaeParams<S>& p) {
    ReconReport rep;
    Rng rng = eval_ordering_rng();
    int perfect = 0;
    for (const auto& g : corpus) {
        const MolGraph ordered = order_for_model<S>(g, p.cfg, rng);
        const int errs = reconstruction_errors(ordered, p);
        rep.errors_per_graph.push_back(errs);
        if (errs == 0) ++perfect;
    }
    rep.rate_percent = corpus.empty() ? 0.0 : 100.0 * double(perfect) / double(corpus.size());
    return rep;
}

// Mini-batch trainer. Deterministic given the rng seed: fixed shuffle,
// fixed reduction order, single-threaded. Throws NumericalError (with epoch
// context) if the loss goes non-finite.
template <typename S>
VqVaeParams<S> train_vqvae(const std::vector<MolGraph>& corpus, const VqVaeConfig& cfg,
                           const TrainConfig& tc, Rng& rng,
                           const EpochCallback& on_epoch = nullptr,
                           const std::vector<MolGraph>* val_set = nullptr) {
    if (corpus.empty()) throw DataError("train_vqvae: empty corpus");
    VqVaeParams<S> p(cfg, rng);

    // order once with the configured scheme; cache per-graph constants
    // (features, PE)
    std::vector<MolGraph> ordered;
    std::vector<std::vector<double>> pes;
    ordered.reserve(corpus.size());
    for (const auto& g : corpus) {
        ordered.push_back(apply_ordering(g, make_ordering(g, cfg.ordering, rng)));
        pes.push_back(lap_pe(ordered.back(), cfg.k_pe).p);
    }
    std::vector<MolGraph> val_slice;
    if (!val_set) {
        const int vn = std::min<int>(tc.val_size, int(corpus.size()));
        val_slice.assign(corpus.begin(), corpus.begin() + vn);
        val_set = &val_slice;
    }

    AdamConfig ac;
    ac.lr = tc.lr;
    ac.weight_decay = tc.weight_decay;
    ac.grad_clip = tc.grad_clip;
    AdamW<S> opt(p.collect(), ac);

    std::vector<int> idx(corpus.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = int(idx.size()) - 1; i > 0; --i)
            std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(0, i))]);

        std::vector<int64_t> usage_before = p.usage_counts;
        EpochStats st;
        st.epoch = epoch;
        int batches = 0;
        for (size_t start = 0; start < idx.size(); start += size_t(tc.batch_size)) {
            const size_t stop = std::min(idx.size(), start + size_t(tc.batch_size));
            Tape<S> tape;
            typename Tape<S>::Scope scope(tape);
            opt.zero_grad();
            Tensor<S> batch_loss;
            for (size_t b = start; b < stop; ++b) {
                const int gi = idx[b];
                VqVaeLossTerms<S> terms =
                    vqvae_forward(ordered[size_t(gi)], pes[size_t(gi)], p, true);
                st.total += double(terms.total.item());
                st.node_ce += double(terms.node_ce.item());
                st.edge_ce += double(terms.edge_ce.item());
                st.codebook += double(terms.codebook.item());
                st.commit += double(terms.commit.item());
                batch_loss = b == start ? terms.total : add(batch_loss, terms.total);
            }
            batch_loss = scale(batch_loss, 1.0 / double(stop - start));
            if (!std::isfinite(double(batch_loss.item())))
                throw NumericalError("train_vqvae: non-finite loss at epoch " +
                                     std::to_string(epoch));
            tape.backward(batch_loss);
            opt.step();
            ++batches;
        }
        const double denom = double(idx.size());
        st.total /= denom;
        st.node_ce /= denom;
        st.edge_ce /= denom;
        st.codebook /= denom;
        st.commit /= denom;

        // epoch code usage -> entropy; reseed codes untouched this epoch
        std::vector<int64_t> epoch_usage(size_t(cfg.k_c), 0);
        int64_t total_hits = 0;
        for (int k = 0; k < cfg.k_c; ++k) {
            epoch_usage[size_t(k)] = p.usage_counts[size_t(k)] - usage_before[size_t(k)];
            total_hits += epoch_usage[size_t(k)];
        }
        for (int k = 0; k < cfg.k_c; ++k) {
            if (epoch_usage[size_t(k)] <= 0) continue;
            const double q = double(epoch_usage[size_t(k)]) / double(total_hits);
            st.usage_entropy -= q * std::log(q);
        }
        std::vector<int> dead;
        for (int k = 0; k < cfg.k_c; ++k)
            if (epoch_usage[size_t(k)] == 0) dead.push_back(k);
        if (!dead.empty() && epoch + 1 < tc.epochs) {
            auto& cb = p.codebook.mutable_data();
            for (int k : dead) {
                const int gi = rng.uniform_int(0, int(ordered.size()) - 1);
                Tensor<S> ze = encode_with_pe(ordered[size_t(gi)], pes[size_t(gi)], p);
                const int row = rng.uniform_int(0, ze.dim(0) - 1);
                for (int t = 0; t < cfg.d_c; ++t)
                    cb[size_t(k) * size_t(cfg.d_c) + size_t(t)] =
                        ze.data()[size_t(row) * size_t(cfg.d_c) + size_t(t)];
            }
            opt.reset_rows("codebook", dead, cfg.d_c);
            st.dead_codes_reseeded = int(dead.size());
        }

        if (!val_set->empty())
            st.val_recon_rate = reconstruction_rate(*val_set, p).rate_percent;
        st.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_epoch) on_epoch(st);
        if (tc.stop_at_val_recon > 0 && !val_set->empty() &&
            st.val_recon_rate >= tc.stop_at_val_recon)
            break;
    }
    return p;
}

} // namespace gvt
