#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gvt/ordering.hpp"

#include <algorithm>
#include <numeric>

using namespace gvt;

namespace {

MolGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    MolGraph g;
    for (int i = 0; i < n; ++i) g.add_atom(0);
    for (auto [a, b] : edges) g.add_bond(std::min(a, b), std::max(a, b), 1);
    return g;
}

// Smallest bandwidth over every permutation of the nodes (n <= 8).
int brute_force_optimal_bandwidth(const MolGraph& g) {
    std::vector<int> perm(size_t(g.n()), 0);
    std::iota(perm.begin(), perm.end(), 0);
    int best = g.n();
    do {
        NodeOrdering ord;
        ord.perm = perm;
        best = std::min(best, bandwidth(g, ord));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Random connected graph: random spanning tree plus a few extra edges.
MolGraph random_connected_graph(int n, Rng& rng) {
    MolGraph g;
    for (int i = 0; i < n; ++i) g.add_atom(0);
    for (int i = 1; i < n; ++i) g.add_bond(rng.uniform_int(0, i - 1), i, 1);
    const int extras = rng.uniform_int(0, 2);
    for (int e = 0; e < extras; ++e) {
        const int a = rng.uniform_int(0, n - 1);
        const int b = rng.uniform_int(0, n - 1);
        if (a != b && g.bond_order(a, b) == 0) g.add_bond(std::min(a, b), std::max(a, b), 1);
    }
    return g;
}

bool is_permutation_of_identity(const std::vector<int>& p, int n) {
    if (int(p.size()) != n) return false;
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i)
        if (sorted[size_t(i)] != i) return false;
    return true;
}

} // namespace

TEST_CASE("scrambled path: rcm recovers the optimal bandwidth") {
    // path 0-2-1-3 stored with scrambled labels; identity bandwidth is 2
    MolGraph g = graph_from_edges(4, {{0, 2}, {2, 1}, {1, 3}});
    CHECK(bandwidth(g, identity_order(g)) == 2);
    NodeOrdering rcm = rcm_order(g);
    CHECK(is_permutation_of_identity(rcm.perm, 4));
    CHECK(bandwidth(g, rcm) == 1);
    CHECK(brute_force_optimal_bandwidth(g) == 1);
}

TEST_CASE("star graph: optimum bandwidth is ceil(n-1)/2") {
    // center 0 with four leaves; brute force optimum is 2
    MolGraph g = graph_from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    const int ident = bandwidth(g, identity_order(g));
    CHECK(ident == 4);
    const int opt = brute_force_optimal_bandwidth(g);
    CHECK(opt == 2);
    const int rcm = bandwidth(g, rcm_order(g));
    CHECK(rcm <= ident);
    CHECK(rcm >= opt);
}

TEST_CASE("path in order keeps bandwidth 1") {
    MolGraph g = graph_from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    CHECK(bandwidth(g, identity_order(g)) == 1);
    CHECK(bandwidth(g, rcm_order(g)) == 1);
}

TEST_CASE("triangle bandwidth is 2 under every ordering") {
    MolGraph g = graph_from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    CHECK(brute_force_optimal_bandwidth(g) == 2);
    CHECK(bandwidth(g, rcm_order(g)) == 2);
    CHECK(bandwidth(g, bfs_order(g)) == 2);
}

TEST_CASE("edgeless graph has bandwidth 0") {
    MolGraph g = graph_from_edges(4, {});
    CHECK(bandwidth(g, identity_order(g)) == 0);
    CHECK(bandwidth(g, rcm_order(g)) == 0);
    CHECK(is_permutation_of_identity(rcm_order(g).perm, 4));
}

TEST_CASE("rcm never exceeds identity bandwidth on 500 random connected graphs") {
    Rng rng(1234);
    for (int trial = 0; trial < 500; ++trial) {
        MolGraph g = random_connected_graph(rng.uniform_int(2, 7), rng);
        NodeOrdering rcm = rcm_order(g);
        REQUIRE(is_permutation_of_identity(rcm.perm, g.n()));
        const int bw_rcm = bandwidth(g, rcm);
        const int bw_id = bandwidth(g, identity_order(g));
        const int bw_opt = brute_force_optimal_bandwidth(g);
        INFO("n=" << g.n() << " rcm=" << bw_rcm << " id=" << bw_id << " opt=" << bw_opt);
        CHECK(bw_rcm <= bw_id);
        CHECK(bw_rcm >= bw_opt);
    }
}

TEST_CASE("bfs visits in breadth-first layers with index tie-breaks") {
    // path: bfs from node 0 keeps identity order
    MolGraph path = graph_from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    NodeOrdering bp = bfs_order(path);
    for (int i = 0; i < 4; ++i) CHECK(bp.perm[size_t(i)] == i);
    CHECK(bp.scheme == OrderScheme::kBfs);

    // star centered at 2: root is node 0 (lowest index), then its
    // neighbor 2, then 2's remaining neighbors in ascending index
    MolGraph star = graph_from_edges(4, {{2, 0}, {2, 1}, {2, 3}});
    NodeOrdering bs = bfs_order(star);
    CHECK(bs.perm == std::vector<int>{0, 2, 1, 3});
}

TEST_CASE("random ordering is a seeded permutation") {
    MolGraph g = graph_from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}});
    Rng r1(5), r2(5), r3(6);
    NodeOrdering a = random_order(g, r1);
    NodeOrdering b = random_order(g, r2);
    CHECK(is_permutation_of_identity(a.perm, 6));
    CHECK(a.perm == b.perm); // same seed, same permutation
    CHECK(a.scheme == OrderScheme::kRandom);

    // across many draws with another seed, at least one differs
    bool any_diff = false;
    for (int t = 0; t < 20 && !any_diff; ++t)
        any_diff = (random_order(g, r3).perm != a.perm);
    CHECK(any_diff);
}

TEST_CASE("apply_ordering relabels without changing the molecule") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        MolGraph g = random_connected_graph(rng.uniform_int(2, 7), rng);
        NodeOrdering ord = rcm_order(g);
        MolGraph h = apply_ordering(g, ord);
        CHECK(h.n() == g.n());
        CHECK(h.bonds().size() == g.bonds().size());
        CHECK(wl_hash(h) == wl_hash(g));
        // bandwidth of the relabeled graph under identity equals
        // bandwidth of the original under the ordering
        CHECK(bandwidth(h, identity_order(h)) == bandwidth(g, ord));
    }
}

TEST_CASE("disconnected components ordered by minimum original index") {
    // two components: {3,4} path and {0,1,2} path
    MolGraph g = graph_from_edges(5, {{3, 4}, {0, 1}, {1, 2}});
    NodeOrdering rcm = rcm_order(g);
    REQUIRE(is_permutation_of_identity(rcm.perm, 5));
    // Cuthill-McKee visits component {0,1,2} first, then {3,4}; the final
    // whole-sequence reversal therefore puts {3,4} first in the output.
    std::vector<int> pos(5, 0);
    for (int k = 0; k < 5; ++k) pos[size_t(rcm.perm[size_t(k)])] = k;
    CHECK(std::max(pos[3], pos[4]) < std::min({pos[0], pos[1], pos[2]}));

    NodeOrdering bfs = bfs_order(g);
    std::vector<int> bpos(5, 0);
    for (int k = 0; k < 5; ++k) bpos[size_t(bfs.perm[size_t(k)])] = k;
    CHECK(std::max({bpos[0], bpos[1], bpos[2]}) < std::min(bpos[3], bpos[4]));
}

TEST_CASE("scheme names round-trip") {
    CHECK(scheme_from_name("rcm") == OrderScheme::kRcm);
    CHECK(scheme_from_name("bfs") == OrderScheme::kBfs);
    CHECK(scheme_from_name("random") == OrderScheme::kRandom);
    CHECK(scheme_from_name("identity") == OrderScheme::kIdentity);
    for (OrderScheme s : {OrderScheme::kRcm, OrderScheme::kBfs, OrderScheme::kRandom,
                          OrderScheme::kIdentity})
        CHECK(scheme_from_name(scheme_name(s)) == s);
    CHECK_THROWS_AS(scheme_from_name("zigzag"), ConfigError);
}

TEST_CASE("make_ordering dispatches and is deterministic per scheme") {
    MolGraph g = graph_from_edges(5, {{0, 2}, {2, 4}, {4, 1}, {1, 3}});
    Rng rng(9);
    CHECK(make_ordering(g, OrderScheme::kRcm, rng).perm == rcm_order(g).perm);
    CHECK(make_ordering(g, OrderScheme::kBfs, rng).perm == bfs_order(g).perm);
    CHECK(make_ordering(g, OrderScheme::kIdentity, rng).perm == identity_order(g).perm);
    Rng ra(4), rb(4);
    CHECK(make_ordering(g, OrderScheme::kRandom, ra).perm == random_order(g, rb).perm);
}
