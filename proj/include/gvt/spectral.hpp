#pragma once

// Symmetric-normalized graph Laplacian, a cyclic Jacobi eigensolver, and
// Laplacian positional encodings. All spectral math runs in double precision
// regardless of the model's scalar type.

#include "gvt/common.hpp"
#include "gvt/molgraph.hpp"

#include <vector>

namespace gvt {

// L = I - D^{-1/2} A D^{-1/2} with binary adjacency; rows and diagonal of
// isolated nodes are all zero. Returned row-major, n*n.
std::vector<double> normalized_laplacian(const MolGraph& g);

struct EigResult {
    std::vector<double> values;  // ascending
    std::vector<double> vectors; // row-major n*n; column j pairs with values[j]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix (n <= 256).
// Deterministic sign convention: each eigenvector is scaled so that its
// largest-magnitude entry (ties broken by lowest index) is positive.
// Throws NumericalError if m is not symmetric within 1e-6 or if the sweep
// budget is exhausted before convergence.
EigResult eig_sym(const std::vector<double>& m, int n);

struct LapPe {
    std::vector<double> p;      // row-major n*k
    std::vector<double> values; // length k, zero-padded like the columns
    int n = 0;
    int k = 0;
};

// Drops one near-zero eigenpair per connected component, takes the next k
// eigenvectors ascending, zero-pads when fewer than k remain.
LapPe lap_pe(const MolGraph& g, int k);

} // namespace gvt
