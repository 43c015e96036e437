#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gvt/spectral.hpp"

#include <cmath>

using namespace gvt;

namespace {

MolGraph path_graph(int n) {
    MolGraph g;
    for (int i = 0; i < n; ++i) g.add_atom(0);
    for (int i = 0; i + 1 < n; ++i) g.add_bond(i, i + 1, 1);
    return g;
}

MolGraph cycle_graph(int n) {
    MolGraph g = path_graph(n);
    g.add_bond(0, n - 1, 1);
    return g;
}

std::vector<double> random_symmetric(int n, Rng& rng) {
    std::vector<double> m(size_t(n) * size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = rng.uniform(-2.0, 2.0);
            m[size_t(i * n + j)] = v;
            m[size_t(j * n + i)] = v;
        }
    return m;
}

// max |M v_j - lambda_j v_j| over all entries and eigenpairs
double max_residual(const std::vector<double>& m, int n, const EigResult& r) {
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double mv = 0.0;
            for (int k = 0; k < n; ++k) mv += m[size_t(i * n + k)] * r.vectors[size_t(k * n + j)];
            worst = std::max(worst, std::fabs(mv - r.values[size_t(j)] * r.vectors[size_t(i * n + j)]));
        }
    }
    return worst;
}

// max |V^T V - I|
double max_ortho_defect(const EigResult& r, int n) {
    double worst = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            double dot = 0.0;
            for (int k = 0; k < n; ++k)
                dot += r.vectors[size_t(k * n + a)] * r.vectors[size_t(k * n + b)];
            worst = std::max(worst, std::fabs(dot - (a == b ? 1.0 : 0.0)));
        }
    return worst;
}

} // namespace

TEST_CASE("laplacian of a single node is the 1x1 zero matrix") {
    MolGraph g;
    g.add_atom(0);
    const std::vector<double> lap = normalized_laplacian(g);
    REQUIRE(lap.size() == 1);
    CHECK(lap[0] == 0.0);
}

TEST_CASE("laplacian of an edge") {
    const std::vector<double> lap = normalized_laplacian(path_graph(2));
    REQUIRE(lap.size() == 4);
    CHECK(lap[0] == doctest::Approx(1.0));
    CHECK(lap[1] == doctest::Approx(-1.0));
    CHECK(lap[2] == doctest::Approx(-1.0));
    CHECK(lap[3] == doctest::Approx(1.0));
}

TEST_CASE("laplacian of a triangle") {
    const std::vector<double> lap = normalized_laplacian(cycle_graph(3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(lap[size_t(i * 3 + j)] == doctest::Approx(i == j ? 1.0 : -0.5));
}

TEST_CASE("isolated nodes contribute zero rows") {
    MolGraph g = path_graph(2);
    g.add_atom(0); // node 2 isolated
    const std::vector<double> lap = normalized_laplacian(g);
    for (int j = 0; j < 3; ++j) {
        CHECK(lap[size_t(2 * 3 + j)] == 0.0);
        CHECK(lap[size_t(j * 3 + 2)] == 0.0);
    }
}

TEST_CASE("eig of the edge laplacian") {
    const std::vector<double> m = {1, -1, -1, 1};
    EigResult r = eig_sym(m, 2);
    CHECK(r.values[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.values[1] == doctest::Approx(2.0).epsilon(1e-12));
    // second eigenvector is proportional to (1,-1); sign fixed so the
    // largest-magnitude entry is positive
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(r.vectors[size_t(0 * 2 + 1)] == doctest::Approx(inv_sqrt2));
    CHECK(r.vectors[size_t(1 * 2 + 1)] == doctest::Approx(-inv_sqrt2));
}

TEST_CASE("eig of the identity matrix") {
    const int n = 5;
    std::vector<double> m(size_t(n) * size_t(n), 0.0);
    for (int i = 0; i < n; ++i) m[size_t(i * n + i)] = 1.0;
    EigResult r = eig_sym(m, n);
    for (int j = 0; j < n; ++j) CHECK(r.values[size_t(j)] == doctest::Approx(1.0));
    CHECK(max_ortho_defect(r, n) < 1e-12);
}

TEST_CASE("eig rejects non-symmetric input") {
    std::vector<double> m = {1, 2, 3, 4};
    CHECK_THROWS_AS(eig_sym(m, 2), NumericalError);
}

TEST_CASE("eig reconstructs an 8x8 matrix") {
    Rng rng(17);
    const int n = 8;
    const std::vector<double> m = random_symmetric(n, rng);
    EigResult r = eig_sym(m, n);
    // reconstruct V diag(w) V^T
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += r.vectors[size_t(i * n + k)] * r.values[size_t(k)] *
                     r.vectors[size_t(j * n + k)];
            CHECK(s == doctest::Approx(m[size_t(i * n + j)]).epsilon(1e-9));
        }
}

TEST_CASE("eig residual and orthonormality on 200 random matrices up to 64x64") {
    Rng rng(555);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.uniform_int(1, 64);
        const std::vector<double> m = random_symmetric(n, rng);
        EigResult r = eig_sym(m, n);
        for (int j = 0; j + 1 < n; ++j) CHECK(r.values[size_t(j)] <= r.values[size_t(j + 1)]);
        CHECK(max_residual(m, n, r) < 1e-5);
        CHECK(max_ortho_defect(r, n) < 1e-5);
    }
}

TEST_CASE("eigenvector sign convention is deterministic") {
    Rng rng(3);
    const int n = 6;
    const std::vector<double> m = random_symmetric(n, rng);
    EigResult a = eig_sym(m, n);
    EigResult b = eig_sym(m, n);
    for (size_t i = 0; i < a.vectors.size(); ++i) CHECK(a.vectors[i] == b.vectors[i]);
    for (int j = 0; j < n; ++j) {
        // largest-magnitude entry of each column is positive
        int arg = 0;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            const double mag = std::fabs(a.vectors[size_t(i * n + j)]);
            if (mag > best + 1e-15) {
                best = mag;
                arg = i;
            }
        }
        CHECK(a.vectors[size_t(arg * n + j)] > 0.0);
    }
}

TEST_CASE("laplacian eigenvalues live in [0, 2]") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rng.uniform_int(2, 12);
        MolGraph g;
        for (int i = 0; i < n; ++i) g.add_atom(0);
        for (int i = 1; i < n; ++i) g.add_bond(rng.uniform_int(0, i - 1), i, 1);
        EigResult r = eig_sym(normalized_laplacian(g), n);
        for (double v : r.values) {
            CHECK(v >= -1e-6);
            CHECK(v <= 2.0 + 1e-6);
        }
    }
}

TEST_CASE("lap_pe of a single node is zero-padded") {
    MolGraph g;
    g.add_atom(0);
    LapPe pe = lap_pe(g, 4);
    CHECK(pe.n == 1);
    CHECK(pe.k == 4);
    REQUIRE(pe.p.size() == 4);
    for (double v : pe.p) CHECK(v == 0.0);
    for (double v : pe.values) CHECK(v == 0.0);
}

TEST_CASE("lap_pe of an edge with k=1 is the fiedler direction") {
    LapPe pe = lap_pe(path_graph(2), 1);
    REQUIRE(pe.p.size() == 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(pe.p[0] == doctest::Approx(inv_sqrt2));
    CHECK(pe.p[1] == doctest::Approx(-inv_sqrt2));
    CHECK(pe.values[0] == doctest::Approx(2.0));
}

TEST_CASE("lap_pe columns are orthonormal when not padded") {
    MolGraph g = cycle_graph(6);
    const int k = 3;
    LapPe pe = lap_pe(g, k);
    REQUIRE(pe.p.size() == size_t(6 * k));
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            double dot = 0.0;
            for (int i = 0; i < 6; ++i) dot += pe.p[size_t(i * k + a)] * pe.p[size_t(i * k + b)];
            CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
        }
}

TEST_CASE("lap_pe drops one trivial eigenpair per component") {
    // two disjoint edges: two zero eigenvalues are dropped, so the first
    // retained eigenvalue is nonzero
    MolGraph g;
    for (int i = 0; i < 4; ++i) g.add_atom(0);
    g.add_bond(0, 1, 1);
    g.add_bond(2, 3, 1);
    LapPe pe = lap_pe(g, 2);
    CHECK(pe.values[0] > 0.5); // both non-trivial eigenvalues equal 2 here
    CHECK(pe.values[1] > 0.5);
}

TEST_CASE("lap_pe zero-pads past the spectrum") {
    LapPe pe = lap_pe(path_graph(3), 8);
    REQUIRE(pe.p.size() == size_t(3 * 8));
    // only n - 1 = 2 informative columns exist; the rest are zero
    for (int i = 0; i < 3; ++i)
        for (int j = 2; j < 8; ++j) CHECK(pe.p[size_t(i * 8 + j)] == 0.0);
    for (int j = 2; j < 8; ++j) CHECK(pe.values[size_t(j)] == 0.0);
}
