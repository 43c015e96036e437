#pragma once

// Node-ordering schemes (reverse Cuthill-McKee, BFS, random) and the
// adjacency-bandwidth metric. Sequential proximity under a low-bandwidth
// ordering tracks structural proximity, which is what the downstream
// sequence models rely on.

#include "gvt/common.hpp"
#include "gvt/molgraph.hpp"

#include <vector>

namespace gvt {

enum class OrderScheme { kRcm, kBfs, kRandom, kIdentity };

struct NodeOrdering {
    std::vector<int> perm; // perm[new_index] = old_index; a bijection on 0..n-1
    OrderScheme scheme = OrderScheme::kIdentity;
};

// Per component (components in ascending order of their minimum original
// index): Cuthill-McKee BFS from a pseudo-peripheral vertex found by
// double-BFS, neighbors visited in ascending degree with ties by ascending
// original index; the concatenated sequence is reversed as a whole.
NodeOrdering rcm_order(const MolGraph& g);

// Plain BFS from the lowest-index node of each component, neighbor ties by
// ascending original index.
NodeOrdering bfs_order(const MolGraph& g);

// Uniform random permutation drawn from the seeded generator.
NodeOrdering random_order(const MolGraph& g, Rng& rng);

NodeOrdering identity_order(const MolGraph& g);

// Dispatch by scheme; rng is consumed only by kRandom.
NodeOrdering make_ordering(const MolGraph& g, OrderScheme scheme, Rng& rng);

const char* scheme_name(OrderScheme s);
OrderScheme scheme_from_name(const std::string& name); // throws ConfigError

// max over bonds (i,j) of |pos(i) - pos(j)| under the ordering; 0 if edgeless
int bandwidth(const MolGraph& g, const NodeOrdering& ord);

// Relabeled copy: node ord.perm[k] of g becomes node k.
MolGraph apply_ordering(const MolGraph& g, const NodeOrdering& ord);

} // namespace gvt
