#include "gvt/ordering.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>

namespace gvt {

namespace {

// neighbors of u not yet visited, ascending (degree, index)
std::vector<int> unvisited_by_degree(const MolGraph& g, int u, const std::vector<uint8_t>& visited) {
    std::vector<int> out;
    for (const auto& [nb, ord] : g.neighbors(u))
        if (!visited[size_t(nb)]) out.push_back(nb);
    std::sort(out.begin(), out.end(), [&](int a, int b) {
        if (g.degree(a) != g.degree(b)) return g.degree(a) < g.degree(b);
        return a < b;
    });
    return out;
}

// BFS level structure from root, restricted to root's component.
// Returns the lowest-index vertex among those at maximum distance.
int farthest_vertex(const MolGraph& g, int root) {
    std::vector<int> dist(size_t(g.n()), -1);
    std::deque<int> queue{root};
    dist[size_t(root)] = 0;
    int best = root;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        if (dist[size_t(u)] > dist[size_t(best)] ||
            (dist[size_t(u)] == dist[size_t(best)] && u < best))
            best = u;
        for (const auto& [nb, ord] : g.neighbors(u)) {
            if (dist[size_t(nb)] < 0) {
                dist[size_t(nb)] = dist[size_t(u)] + 1;
                queue.push_back(nb);
            }
        }
    }
    return best;
}

// Cuthill-McKee sequence of the component containing start.
void cuthill_mckee(const MolGraph& g, int start, std::vector<uint8_t>& visited,
                   std::vector<int>& seq) {
    std::deque<int> queue{start};
    visited[size_t(start)] = 1;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        seq.push_back(u);
        for (int nb : unvisited_by_degree(g, u, visited)) {
            visited[size_t(nb)] = 1;
            queue.push_back(nb);
        }
    }
}

void bfs_component(const MolGraph& g, int start, std::vector<uint8_t>& visited,
                   std::vector<int>& seq) {
    std::deque<int> queue{start};
    visited[size_t(start)] = 1;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        seq.push_back(u);
        for (const auto& [nb, ord] : g.neighbors(u)) { // neighbors() is index-sorted
            if (!visited[size_t(nb)]) {
                visited[size_t(nb)] = 1;
                queue.push_back(nb);
            }
        }
    }
}

} // namespace

NodeOrdering rcm_order(const MolGraph& g) {
    const int n = g.n();
    std::vector<uint8_t> visited(size_t(n), 0);
    std::vector<int> seq;
    seq.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        if (visited[size_t(i)]) continue;
        // double-BFS pseudo-peripheral heuristic: sweep once from the
        // component's minimum-index vertex, then once more from the vertex
        // it finds; start CM from the second sweep's result
        const int y = farthest_vertex(g, i);
        const int z = farthest_vertex(g, y);
        cuthill_mckee(g, z, visited, seq);
    }
    std::reverse(seq.begin(), seq.end());
    return {std::move(seq), OrderScheme::kRcm};
}

NodeOrdering bfs_order(const MolGraph& g) {
    const int n = g.n();
    std::vector<uint8_t> visited(size_t(n), 0);
    std::vector<int> seq;
    seq.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        if (visited[size_t(i)]) continue;
        bfs_component(g, i, visited, seq);
    }
    return {std::move(seq), OrderScheme::kBfs};
}

NodeOrdering random_order(const MolGraph& g, Rng& rng) {
    std::vector<int> perm(size_t(g.n()));
    for (int i = 0; i < g.n(); ++i) perm[size_t(i)] = i;
    for (int i = g.n() - 1; i > 0; --i)
        std::swap(perm[size_t(i)], perm[size_t(rng.uniform_int(0, i))]);
    return {std::move(perm), OrderScheme::kRandom};
}

NodeOrdering identity_order(const MolGraph& g) {
    std::vector<int> perm(size_t(g.n()));
    for (int i = 0; i < g.n(); ++i) perm[size_t(i)] = i;
    return {std::move(perm), OrderScheme::kIdentity};
}

NodeOrdering make_ordering(const MolGraph& g, OrderScheme scheme, Rng& rng) {
    switch (scheme) {
    case OrderScheme::kRcm: return rcm_order(g);
    case OrderScheme::kBfs: return bfs_order(g);
    case OrderScheme::kRandom: return random_order(g, rng);
    case OrderScheme::kIdentity: return identity_order(g);
    }
    throw ConfigError("unknown ordering scheme");
}

const char* scheme_name(OrderScheme s) {
    switch (s) {
    case OrderScheme::kRcm: return "rcm";
    case OrderScheme::kBfs: return "bfs";
    case OrderScheme::kRandom: return "random";
    case OrderScheme::kIdentity: return "identity";
    }
    return "unknown";
}

OrderScheme scheme_from_name(const std::string& name) {
    if (name == "rcm") return OrderScheme::kRcm;
    if (name == "bfs") return OrderScheme::kBfs;
    if (name == "random") return OrderScheme::kRandom;
    if (name == "identity") return OrderScheme::kIdentity;
    throw ConfigError("unknown ordering scheme: " + name);
}

int bandwidth(const MolGraph& g, const NodeOrdering& ord) {
    std::vector<int> pos(size_t(g.n()), -1);
    for (int k = 0; k < int(ord.perm.size()); ++k) pos[size_t(ord.perm[size_t(k)])] = k;
    int bw = 0;
    for (const auto& b : g.bonds())
        bw = std::max(bw, std::abs(pos[size_t(b.a)] - pos[size_t(b.b)]));
    return bw;
}

MolGraph apply_ordering(const MolGraph& g, const NodeOrdering& ord) {
    return permute_graph(g, ord.perm);
}

} // namespace gvt
