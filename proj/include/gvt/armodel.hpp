#pragma once

// Stage 2: decoder-only autoregressive transformer over code sequences.
// Sequences are [BOS, k_1 ... k_N, EOS] with k_i in [0, K_c); the vocabulary
// is K_c + 2. Learned absolute position embeddings, causal masking, standard
// pre-norm blocks. Sampling supports temperature scaling and top-k with
// deterministic tie-breaking (lowest token id).

#include "gvt/molgraph.hpp"
#include "gvt/nn.hpp"
#include "gvt/ops.hpp"
#include "gvt/ordering.hpp"
#include "gvt/vqvae.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gvt {

struct ArConfig {
    int layers = 4;
    int d = 128;
    int heads = 4;
    int max_len = 64; // whole framed sequence, BOS/EOS included
    int vocab = 0;    // k_c + 2
    int ff_mult = 2;
    double temperature = 1.0; // sampling defaults
    int top_k = 0;            // 0 = off

    int bos() const { return vocab - 2; }
    int eos() const { return vocab - 1; }

    void validate() const {
        if (layers < 1 || d < 1 || heads < 1 || max_len < 2 || ff_mult < 1)
            throw ConfigError("ar config: all sizes must be positive");
        if (vocab < 3) throw ConfigError("ar config: vocab must cover codes plus BOS/EOS");
        if (d % heads != 0) throw ConfigError("ar config: d must be divisible by heads");
    }
};

template <typename S>
struct ArBlock {
    LayerNormParams<S> ln1;
    Linear<S> wq, wk, wv, wo;
    LayerNormParams<S> ln2;
    Mlp<S> ffn;

    ArBlock() = default;
    ArBlock(int d, int ff_width, Rng& rng)
        : ln1(d), wq(d, d, rng), wk(d, d, rng), wv(d, d, rng), wo(d, d, rng), ln2(d),
          ffn(d, ff_width, d, rng) {}

    void collect(ParamList<S>& out, const std::string& prefix) const {
        ln1.collect(out, prefix + ".ln1");
        wq.collect(out, prefix + ".wq");
        wk.collect(out, prefix + ".wk");
        wv.collect(out, prefix + ".wv");
        wo.collect(out, prefix + ".wo");
        ln2.collect(out, prefix + ".ln2");
        ffn.collect(out, prefix + ".ffn");
    }
};

template <typename S>
struct ArParams {
    ArConfig cfg;
    Tensor<S> token_embed; // vocab x d
    Tensor<S> pos_embed;   // max_len x d
    std::vector<ArBlock<S>> blocks;
    LayerNormParams<S> final_ln;
    Linear<S> lm_head; // d -> vocab

    ArParams() = default;
    ArParams(const ArConfig& c, Rng& rng) : cfg(c) {
        cfg.validate();
        token_embed = init_parameter<S>({cfg.vocab, cfg.d}, Init::kNormal002, rng);
        pos_embed = init_parameter<S>({cfg.max_len, cfg.d}, Init::kNormal002, rng);
        token_embed.set_requires_grad(true);
        pos_embed.set_requires_grad(true);
        for (int l = 0; l < cfg.layers; ++l)
            blocks.emplace_back(cfg.d, cfg.ff_mult * cfg.d, rng);
        final_ln = LayerNormParams<S>(cfg.d);
        lm_head = Linear<S>(cfg.d, cfg.vocab, rng);
        // zero output head: the untrained model is exactly the uniform prior
        // (initial loss = ln vocab), and the first update is well-scaled
        for (auto& v : lm_head.w.mutable_data()) v = S(0);
    }

    ParamList<S> collect() const {
        ParamList<S> out;
        out.push_back({"token_embed", token_embed});
        out.push_back({"pos_embed", pos_embed});
        for (size_t l = 0; l < blocks.size(); ++l)
            blocks[l].collect(out, "block." + std::to_string(l));
        final_ln.collect(out, "final_ln");
        lm_head.collect(out, "lm_head");
        return out;
    }
};

// Next-token logits for every position of one (unpadded) token prefix.
// Returns T x vocab.
template <typename S>
Tensor<S> ar_logits(const std::vector<int>& tokens, const ArParams<S>& p) {
    const int t_len = int(tokens.size());
    if (t_len < 1) throw ShapeError("ar_logits: empty input");
    if (t_len > p.cfg.max_len)
        throw ShapeError("ar_logits: sequence length " + std::to_string(t_len) +
                         " exceeds max length " + std::to_string(p.cfg.max_len));
    for (int tok : tokens)
        if (tok < 0 || tok >= p.cfg.vocab) throw DataError("ar_logits: token out of vocabulary");

    std::vector<int> positions(size_t(t_len), 0);
    for (int i = 0; i < t_len; ++i) positions[size_t(i)] = i;
    Tensor<S> x = add(embedding_lookup(p.token_embed, tokens),
                      embedding_lookup(p.pos_embed, positions));

    std::vector<uint8_t> causal(size_t(t_len) * size_t(t_len), 0);
    for (int i = 0; i < t_len; ++i)
        for (int j = 0; j <= i; ++j) causal[size_t(i) * size_t(t_len) + size_t(j)] = 1;

    const int d_h = p.cfg.d / p.cfg.heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(d_h));
    for (const auto& blk : p.blocks) {
        Tensor<S> xn = layer_norm(x, blk.ln1.gamma, blk.ln1.beta);
        Tensor<S> q = blk.wq(xn);
        Tensor<S> k = blk.wk(xn);
        Tensor<S> v = blk.wv(xn);
        std::vector<Tensor<S>> heads;
        heads.reserve(size_t(p.cfg.heads));
        for (int hd = 0; hd < p.cfg.heads; ++hd) {
            Tensor<S> qh = slice(q, 1, hd * d_h, d_h);
            Tensor<S> kh = slice(k, 1, hd * d_h, d_h);
            Tensor<S> vh = slice(v, 1, hd * d_h, d_h);
            Tensor<S> logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
            logits = masked_fill(logits, causal, -1e30);
            heads.push_back(matmul(softmax(logits), vh));
        }
        Tensor<S> att = p.cfg.heads == 1 ? heads[0] : concat<S>(heads, 1);
        x = add(x, blk.wo(att));
        x = add(x, blk.ffn(layer_norm(x, blk.ln2.gamma, blk.ln2.beta)));
    }
    x = layer_norm(x, p.final_ln.gamma, p.final_ln.beta);
    return p.lm_head(x);
}

template <typename S>
struct ArNllResult {
    Tensor<S> loss;        // mean cross-entropy over all predicted positions
    double accuracy = 0;   // next-token argmax accuracy over the same positions
    int positions = 0;
};

// Teacher-forced NLL over a batch of framed sequences. Each sequence
// predicts token t+1 from prefix <= t; the batch loss is the
// position-weighted mean so it equals a flat mean over every prediction.
template <typename S>
ArNllResult<S> ar_nll(const std::vector<std::vector<int>>& batch, const ArParams<S>& p) {
    ArNllResult<S> r;
    if (batch.empty()) throw DataError("ar_nll: empty batch");
    int total_positions = 0;
    for (const auto& seq : batch) {
        if (int(seq.size()) < 2) throw DataError("ar_nll: sequence shorter than 2 tokens");
        total_positions += int(seq.size()) - 1;
    }
    int correct = 0;
    Tensor<S> acc_loss;
    bool first = true;
    for (const auto& seq : batch) {
        const std::vector<int> input(seq.begin(), seq.end() - 1);
        const std::vector<int> targets(seq.begin() + 1, seq.end());
        Tensor<S> logits = ar_logits(input, p);
        Tensor<S> ce = cross_entropy_with_logits(logits, targets);
        const double weight = double(targets.size()) / double(total_positions);
        acc_loss = first ? scale(ce, weight) : add(acc_loss, scale(ce, weight));
        first = false;

        const auto& ld = logits.data();
        const int v = p.cfg.vocab;
        for (size_t i = 0; i < targets.size(); ++i) {
            int arg = 0;
            for (int c = 1; c < v; ++c)
                if (ld[i * size_t(v) + size_t(c)] > ld[i * size_t(v) + size_t(arg)]) arg = c;
            if (arg == targets[i]) ++correct;
        }
    }
    r.loss = acc_loss;
    r.positions = total_positions;
    r.accuracy = double(correct) / double(total_positions);
    return r;
}

struct TokenizeResult {
    std::vector<std::vector<int>> sequences; // framed with BOS/EOS
    int skipped_too_long = 0;
};

// Order (model scheme), encode, quantize every molecule into a framed code
// sequence. Molecules whose framed length would exceed max_len are skipped
// and counted.
template <typename S>
TokenizeResult tokenize_corpus(const std::vector<MolGraph>& corpus, VqVaeParams<S>& vq,
                               const ArConfig& ar_cfg) {
    TokenizeResult out;
    Rng order_rng = eval_ordering_rng();
    for (const auto& g : corpus) {
        if (g.n() + 2 > ar_cfg.max_len) {
            ++out.skipped_too_long;
            continue;
        }
        const MolGraph ordered = order_for_model<S>(g, vq.cfg, order_rng);
        Tensor<S> ze = encode(ordered, vq);
        const QuantizeResult<S> q = quantize(ze, vq, /*update_usage=*/true);
        std::vector<int> seq;
        seq.reserve(size_t(g.n()) + 2);
        seq.push_back(ar_cfg.bos());
        for (int k : q.codes) seq.push_back(k);
        seq.push_back(ar_cfg.eos());
        out.sequences.push_back(std::move(seq));
    }
    return out;
}

struct ArEpochStats {
    int epoch = 0;
    double loss = 0;
    double accuracy = 0;
    double seconds = 0;
};

using ArEpochCallback = std::function<void(const ArEpochStats&)>;

// Mini-batch AR trainer; deterministic given the rng seed.
template <typename S>
ArParams<S> train_ar(const std::vector<std::vector<int>>& sequences, const ArConfig& cfg,
                     const TrainConfig& tc, Rng& rng, const ArEpochCallback& on_epoch = nullptr) {
    if (sequences.empty()) throw DataError("train_ar: empty sequence corpus");
    ArParams<S> p(cfg, rng);
    AdamConfig ac;
    ac.lr = tc.lr;
    ac.weight_decay = tc.weight_decay;
    ac.grad_clip = tc.grad_clip;
    AdamW<S> opt(p.collect(), ac);

    std::vector<int> idx(sequences.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = int(idx.size()) - 1; i > 0; --i)
            std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(0, i))]);
        ArEpochStats st;
        st.epoch = epoch;
        double acc_weighted = 0;
        int total_positions = 0;
        for (size_t start = 0; start < idx.size(); start += size_t(tc.batch_size)) {
            const size_t stop = std::min(idx.size(), start + size_t(tc.batch_size));
            std::vector<std::vector<int>> batch;
            batch.reserve(stop - start);
            for (size_t b = start; b < stop; ++b) batch.push_back(sequences[size_t(idx[b])]);
            Tape<S> tape;
            typename Tape<S>::Scope scope(tape);
            opt.zero_grad();
            ArNllResult<S> r = ar_nll(batch, p);
            if (!std::isfinite(double(r.loss.item())))
                throw NumericalError("train_ar: non-finite loss at epoch " +
                                     std::to_string(epoch));
            st.loss += double(r.loss.item()) * r.positions;
            acc_weighted += r.accuracy * r.positions;
            total_positions += r.positions;
            tape.backward(r.loss);
            opt.step();
        }
        st.loss /= double(total_positions);
        st.accuracy = acc_weighted / double(total_positions);
        st.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_epoch) on_epoch(st);
        if (tc.stop_at_accuracy > 0 && st.accuracy >= tc.stop_at_accuracy) break;
    }
    return p;
}

struct SampleResult {
    std::vector<int> tokens; // framed; ends with EOS unless truncated
    bool truncated = false;
};

// Ancestral sampling. temperature == 0 selects the argmax (ties to lowest
// token id); top_k == 0 disables the filter; ties at the top-k boundary keep
// the lowest token id. Stops at EOS or when the framed length reaches
// max_len (flagged truncated).
template <typename S>
SampleResult sample(const ArParams<S>& p, double temperature, int top_k, int max_len, Rng& rng) {
    if (temperature < 0) throw ConfigError("sample: temperature must be >= 0");
    if (top_k < 0 || top_k > p.cfg.vocab) throw ConfigError("sample: top_k out of range");
    max_len = std::min(max_len, p.cfg.max_len);
    const int v = p.cfg.vocab;

    SampleResult out;
    out.tokens.push_back(p.cfg.bos());
    while (int(out.tokens.size()) < max_len) {
        Tensor<S> logits = ar_logits(out.tokens, p);
        const int last = logits.dim(0) - 1;
        std::vector<double> row(size_t(v), 0.0);
        for (int c = 0; c < v; ++c)
            row[size_t(c)] = double(logits.data()[size_t(last) * size_t(v) + size_t(c)]);

        int next;
        if (temperature == 0.0 || top_k == 1) {
            next = 0;
            for (int c = 1; c < v; ++c)
                if (row[size_t(c)] > row[size_t(next)]) next = c;
        } else {
            for (auto& x : row) x /= temperature;
            std::vector<int> order(size_t(v), 0);
            for (int c = 0; c < v; ++c) order[size_t(c)] = c;
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                if (row[size_t(a)] != row[size_t(b)]) return row[size_t(a)] > row[size_t(b)];
                return a < b;
            });
            const int keep = top_k == 0 ? v : top_k;
            order.resize(size_t(keep));
            std::sort(order.begin(), order.end()); // cumulative walk in id order
            double mx = row[size_t(order[0])];
            for (int c : order) mx = std::max(mx, row[size_t(c)]);
            double z = 0;
            std::vector<double> probs(order.size());
            for (size_t i = 0; i < order.size(); ++i) {
                probs[i] = std::exp(row[size_t(order[i])] - mx);
                z += probs[i];
            }
            const double u = rng.uniform() * z;
            double cum = 0;
            next = order.back();
            for (size_t i = 0; i < order.size(); ++i) {
                cum += probs[i];
                if (u < cum) {
                    next = order[i];
                    break;
                }
            }
        }
        out.tokens.push_back(next);
        if (next == p.cfg.eos()) return out;
    }
    out.truncated = true;
    return out;
}

} // namespace gvt
