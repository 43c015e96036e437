#include "gvt/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gvt {

std::vector<double> normalized_laplacian(const MolGraph& g) {
    const int n = g.n();
    std::vector<double> l(size_t(n) * size_t(n), 0.0);
    std::vector<double> dinv_sqrt(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const int deg = g.degree(i);
        if (deg > 0) dinv_sqrt[size_t(i)] = 1.0 / std::sqrt(double(deg));
    }
    for (int i = 0; i < n; ++i)
        if (g.degree(i) > 0) l[size_t(i) * size_t(n) + size_t(i)] = 1.0;
    for (const auto& b : g.bonds()) {
        const double v = -dinv_sqrt[size_t(b.a)] * dinv_sqrt[size_t(b.b)];
        l[size_t(b.a) * size_t(n) + size_t(b.b)] = v;
        l[size_t(b.b) * size_t(n) + size_t(b.a)] = v;
    }
    return l;
}

EigResult eig_sym(const std::vector<double>& m, int n) {
    if (n < 0 || int(m.size()) != n * n) throw ShapeError("eig_sym: matrix size mismatch");
    if (n > 256) throw ShapeError("eig_sym: n exceeds the supported limit of 256");
    double scale = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double a = m[size_t(i) * size_t(n) + size_t(j)];
            const double b = m[size_t(j) * size_t(n) + size_t(i)];
            if (std::abs(a - b) > 1e-6)
                throw NumericalError("eig_sym: input is not symmetric");
        }
        for (int j = 0; j < n; ++j)
            scale = std::max(scale, std::abs(m[size_t(i) * size_t(n) + size_t(j)]));
    }

    std::vector<double> a = m;
    std::vector<double> v(size_t(n) * size_t(n), 0.0);
    for (int i = 0; i < n; ++i) v[size_t(i) * size_t(n) + size_t(i)] = 1.0;
    auto at = [&](std::vector<double>& mat, int i, int j) -> double& {
        return mat[size_t(i) * size_t(n) + size_t(j)];
    };

    const double stop = 1e-14 * std::max(1.0, scale);
    const int max_sweeps = 64;
    bool converged = n <= 1;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off = std::max(off, std::abs(at(a, i, j)));
        if (off <= stop) {
            converged = true;
            break;
        }
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(a, p, q);
                if (std::abs(apq) <= stop) continue;
                const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(a, k, p);
                    const double akq = at(a, k, q);
                    at(a, k, p) = c * akp - s * akq;
                    at(a, k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(a, p, k);
                    const double aqk = at(a, q, k);
                    at(a, p, k) = c * apk - s * aqk;
                    at(a, q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = at(v, k, p);
                    const double vkq = at(v, k, q);
                    at(v, k, p) = c * vkp - s * vkq;
                    at(v, k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off = std::max(off, std::abs(at(a, i, j)));
        if (off > stop) throw NumericalError("eig_sym: Jacobi sweeps did not converge");
    }

    std::vector<int> order(size_t(n), 0);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return at(a, x, x) < at(a, y, y);
    });

    EigResult out;
    out.values.resize(size_t(n));
    out.vectors.resize(size_t(n) * size_t(n));
    for (int j = 0; j < n; ++j) {
        const int src = order[size_t(j)];
        out.values[size_t(j)] = at(a, src, src);
        int arg = 0;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            const double mag = std::abs(at(v, i, src));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        const double flip = at(v, arg, src) < 0.0 ? -1.0 : 1.0;
        for (int i = 0; i < n; ++i)
            out.vectors[size_t(i) * size_t(n) + size_t(j)] = flip * at(v, i, src);
    }
    return out;
}

LapPe lap_pe(const MolGraph& g, int k) {
    if (k < 1) throw ShapeError("lap_pe: k must be >= 1");
    const int n = g.n();
    const EigResult eig = eig_sym(normalized_laplacian(g), n);
    const int drop = component_count(g); // one near-zero eigenpair per component
    LapPe pe;
    pe.n = n;
    pe.k = k;
    pe.p.assign(size_t(n) * size_t(k), 0.0);
    pe.values.assign(size_t(k), 0.0);
    for (int t = 0; t < k; ++t) {
        const int col = drop + t;
        if (col >= n) break;
        pe.values[size_t(t)] = eig.values[size_t(col)];
        for (int i = 0; i < n; ++i)
            pe.p[size_t(i) * size_t(k) + size_t(t)] =
                eig.vectors[size_t(i) * size_t(n) + size_t(col)];
    }
    return pe;
}

} // namespace gvt
