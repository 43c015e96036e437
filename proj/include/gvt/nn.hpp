#pragma once

// Parameter initialization, the small layer building blocks shared by the
// networks, and the AdamW optimizer.

#include "gvt/ops.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gvt {

enum class Init {
    kZeros,
    kNormal002,      // N(0, 0.02)
    kUniformFanIn,   // U(-sqrt(6/fan_in), +sqrt(6/fan_in)), fan_in = shape[0]
    kCodebookUniform // U(a, b)
};

template <typename S>
Tensor<S> init_parameter(const Shape& shape, Init scheme, Rng& rng, double a = 0.0, double b = 0.0) {
    Tensor<S> t(shape);
    auto& v = t.mutable_data();
    switch (scheme) {
    case Init::kZeros:
        break;
    case Init::kNormal002:
        for (auto& x : v) x = S(rng.normal(0.0, 0.02));
        break;
    case Init::kUniformFanIn: {
        const double bound = std::sqrt(6.0 / double(shape[0]));
        for (auto& x : v) x = S(rng.uniform(-bound, bound));
        break;
    }
    case Init::kCodebookUniform:
        for (auto& x : v) x = S(rng.uniform(a, b));
        break;
    }
    return t;
}

template <typename S>
struct NamedParam {
    std::string name;
    Tensor<S> tensor;
};

template <typename S>
using ParamList = std::vector<NamedParam<S>>;

// y = x W + b, weights stored [in, out]
template <typename S>
struct Linear {
    Tensor<S> w;
    Tensor<S> b;

    Linear() = default;
    Linear(int in, int out, Rng& rng) {
        w = init_parameter<S>({in, out}, Init::kUniformFanIn, rng);
        b = init_parameter<S>({out}, Init::kZeros, rng);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
    }

    Tensor<S> operator()(const Tensor<S>& x) const { return add(matmul(x, w), b); }

    void collect(ParamList<S>& out, const std::string& prefix) const {
        out.push_back({prefix + ".w", w});
        out.push_back({prefix + ".b", b});
    }
};

template <typename S>
struct LayerNormParams {
    Tensor<S> gamma;
    Tensor<S> beta;

    LayerNormParams() = default;
    explicit LayerNormParams(int d) {
        gamma = Tensor<S>(Shape{d}, std::vector<S>(size_t(d), S(1)));
        beta = Tensor<S>(Shape{d});
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
    }

    Tensor<S> operator()(const Tensor<S>& x) const { return layer_norm(x, gamma, beta); }

    void collect(ParamList<S>& out, const std::string& prefix) const {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

// two-layer MLP: in -> hidden (gelu) -> out
template <typename S>
struct Mlp {
    Linear<S> fc1;
    Linear<S> fc2;

    Mlp() = default;
    Mlp(int in, int hidden, int out, Rng& rng) : fc1(in, hidden, rng), fc2(hidden, out, rng) {}

    Tensor<S> operator()(const Tensor<S>& x) const { return fc2(gelu(fc1(x))); }

    void collect(ParamList<S>& out, const std::string& prefix) const {
        fc1.collect(out, prefix + ".fc1");
        fc2.collect(out, prefix + ".fc2");
    }
};

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0; // decoupled
    double grad_clip = 1.0;    // global L2 norm; <= 0 disables
};

// AdamW with decoupled weight decay and global-norm gradient clipping.
template <typename S>
class AdamW {
public:
    AdamW(ParamList<S> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        slots_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            slots_[i].m.assign(size_t(params_[i].tensor.numel()), 0.0);
            slots_[i].v.assign(size_t(params_[i].tensor.numel()), 0.0);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    double grad_norm() const {
        double acc = 0;
        for (const auto& p : params_)
            for (S g : p.tensor.grad()) acc += double(g) * double(g);
        return std::sqrt(acc);
    }

    void step() {
        if (cfg_.grad_clip > 0) {
            const double norm = grad_norm();
            if (norm > cfg_.grad_clip) {
                const double sc = cfg_.grad_clip / norm;
                for (auto& p : params_)
                    for (auto& g : p.tensor.grad()) g = S(double(g) * sc);
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& data = params_[i].tensor.mutable_data();
            const auto& grad = params_[i].tensor.grad();
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            for (size_t j = 0; j < data.size(); ++j) {
                const double g = double(grad[j]);
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                double x = double(data[j]);
                x -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * x);
                data[j] = S(x);
            }
        }
    }

    // drop stale moments for rows that were overwritten out-of-band
    // (dead-code reseeding)
    void reset_rows(const std::string& param_name, const std::vector<int>& rows, int row_width) {
        for (size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].name != param_name) continue;
            for (int r : rows)
                for (int j = 0; j < row_width; ++j) {
                    slots_[i].m[size_t(r) * row_width + j] = 0.0;
                    slots_[i].v[size_t(r) * row_width + j] = 0.0;
                }
        }
    }

    const ParamList<S>& params() const { return params_; }

private:
    struct Slot {
        std::vector<double> m, v;
    };
    ParamList<S> params_;
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    long t_ = 0;
};

} // namespace gvt
