#include "gvt/molgraph.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace gvt {

namespace {

// built-in maximum valences for the supported element symbols
const std::vector<std::pair<std::string, int>>& valence_table() {
    static const std::vector<std::pair<std::string, int>> table = {
        {"B", 3},  {"C", 4},  {"N", 3}, {"O", 2}, {"F", 1},  {"Si", 4},
        {"P", 5},  {"S", 6},  {"Cl", 1}, {"Br", 1}, {"I", 1},
    };
    return table;
}

int builtin_valence(const std::string& sym) {
    for (const auto& [s, v] : valence_table())
        if (s == sym) return v;
    return -1;
}

} // namespace

int Alphabet::index_of(const std::string& sym) const {
    for (size_t i = 0; i < symbols.size(); ++i)
        if (symbols[i] == sym) return int(i);
    return -1;
}

Alphabet Alphabet::from_symbols(const std::vector<std::string>& syms) {
    Alphabet a;
    for (const auto& s : syms) {
        const int v = builtin_valence(s);
        if (v < 0) throw DataError("unknown atom symbol in alphabet: " + s);
        a.symbols.push_back(s);
        a.max_valence.push_back(v);
    }
    return a;
}

Alphabet Alphabet::qm9() { return from_symbols({"C", "N", "O", "F"}); }

Alphabet Alphabet::organic() {
    return from_symbols({"C", "N", "O", "F", "P", "S", "Cl", "Br", "I"});
}

int MolGraph::add_atom(int type) {
    atoms_.push_back(type);
    adj_.emplace_back();
    return int(atoms_.size()) - 1;
}

void MolGraph::add_bond(int i, int j, int order) {
    if (i == j) throw DataError("self-loop bond on atom " + std::to_string(i));
    if (i < 0 || j < 0 || i >= n() || j >= n())
        throw DataError("bond endpoint out of range");
    if (order < 1 || order > 3) throw DataError("bond order must be 1..3");
    if (bond_order(i, j) != 0)
        throw DataError("duplicate bond between atoms " + std::to_string(i) + " and " +
                        std::to_string(j));
    if (i > j) std::swap(i, j);
    bonds_.push_back({i, j, order});
    auto insert_sorted = [](std::vector<std::pair<int, int>>& v, int nb, int ord) {
        auto it = std::lower_bound(v.begin(), v.end(), std::make_pair(nb, 0));
        v.insert(it, {nb, ord});
    };
    insert_sorted(adj_[size_t(i)], j, order);
    insert_sorted(adj_[size_t(j)], i, order);
}

int MolGraph::bond_order(int i, int j) const {
    for (const auto& [nb, ord] : adj_[size_t(i)])
        if (nb == j) return ord;
    return 0;
}

bool MolGraph::operator==(const MolGraph& other) const {
    if (atoms_ != other.atoms_) return false;
    if (bonds_.size() != other.bonds_.size()) return false;
    for (const auto& b : bonds_)
        if (other.bond_order(b.a, b.b) != b.order) return false;
    return true;
}

// ---------------------------------------------------------------------------
// SMILES reading

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct RingSlot {
    int atom;
    int order;  // 0 = unspecified
    size_t pos; // byte offset of the opening digit, for error reports
};

} // namespace

MolGraph parse_smiles(const std::string& text, const Alphabet& alpha) {
    MolGraph g;
    std::vector<int> branch_stack;
    std::map<int, RingSlot> open_rings;
    int prev_atom = -1;
    int pending_order = 0;     // 0 = no explicit bond symbol pending
    size_t pending_pos = 0;

    auto attach = [&](int atom_idx) {
        if (prev_atom >= 0) g.add_bond(prev_atom, atom_idx, pending_order == 0 ? 1 : pending_order);
        prev_atom = atom_idx;
        pending_order = 0;
    };

    auto close_ring = [&](int num, size_t pos) {
        auto it = open_rings.find(num);
        if (prev_atom < 0) throw SmilesError("ring closure before any atom", pos);
        if (it == open_rings.end()) {
            open_rings[num] = {prev_atom, pending_order, pos};
            pending_order = 0;
            return;
        }
        const RingSlot slot = it->second;
        open_rings.erase(it);
        int order = 1;
        if (slot.order != 0 && pending_order != 0 && slot.order != pending_order)
            throw SmilesError("ring closure bond order conflict", pos);
        if (slot.order != 0) order = slot.order;
        if (pending_order != 0) order = pending_order;
        pending_order = 0;
        if (slot.atom == prev_atom) throw SmilesError("ring closure forms a self-loop", pos);
        try {
            g.add_bond(slot.atom, prev_atom, order);
        } catch (const DataError& e) {
            throw SmilesError(e.what(), pos);
        }
    };

    size_t i = 0;
    const size_t len = text.size();
    while (i < len) {
        const char c = text[i];
        if (c == '-' || c == '=' || c == '#') {
            if (prev_atom < 0) throw SmilesError("bond symbol before any atom", i);
            if (pending_order != 0) throw SmilesError("two consecutive bond symbols", i);
            pending_order = c == '-' ? 1 : c == '=' ? 2 : 3;
            pending_pos = i;
            ++i;
        } else if (c == '(') {
            if (prev_atom < 0) throw SmilesError("branch opened before any atom", i);
            if (pending_order != 0) throw SmilesError("bond symbol before '('", i);
            branch_stack.push_back(prev_atom);
            ++i;
        } else if (c == ')') {
            if (branch_stack.empty()) throw SmilesError("unmatched ')'", i);
            if (pending_order != 0) throw SmilesError("dangling bond symbol before ')'", pending_pos);
            prev_atom = branch_stack.back();
            branch_stack.pop_back();
            ++i;
        } else if (is_digit(c)) {
            close_ring(c - '0', i);
            ++i;
        } else if (c == '%') {
            if (i + 2 >= len || !is_digit(text[i + 1]) || !is_digit(text[i + 2]))
                throw SmilesError("'%' must be followed by two digits", i);
            close_ring((text[i + 1] - '0') * 10 + (text[i + 2] - '0'), i);
            i += 3;
        } else if (c == '[') {
            size_t close = text.find(']', i);
            if (close == std::string::npos) throw SmilesError("unclosed '['", i);
            const std::string inner = text.substr(i + 1, close - i - 1);
            if (inner.empty()) throw SmilesError("empty bracket atom", i);
            for (size_t k = 0; k < inner.size(); ++k) {
                const char b = inner[k];
                if (b == '+' || b == '-') throw SmilesError("charged atoms are not supported", i + 1 + k);
                if (b == '@') throw SmilesError("stereo markers are not supported", i + 1 + k);
                if (is_digit(b)) throw SmilesError("isotopes / H counts are not supported", i + 1 + k);
                if (b == 'H' && k > 0) throw SmilesError("explicit hydrogen counts are not supported", i + 1 + k);
            }
            if (!is_upper(inner[0]))
                throw SmilesError("aromatic (lowercase) atoms are not supported", i + 1);
            const int type = alpha.index_of(inner);
            if (type < 0) throw SmilesError("atom symbol '" + inner + "' not in alphabet", i + 1);
            attach(g.add_atom(type));
            i = close + 1;
        } else if (is_upper(c)) {
            // longest-match bare symbol (two letters first, e.g. Cl before C)
            int type = -1;
            size_t sym_len = 1;
            if (i + 1 < len && is_lower(text[i + 1])) {
                type = alpha.index_of(text.substr(i, 2));
                if (type >= 0) sym_len = 2;
            }
            if (type < 0) type = alpha.index_of(text.substr(i, 1));
            if (type < 0) {
                if (i + 1 < len && is_lower(text[i + 1]) && builtin_valence(text.substr(i, 2)) > 0)
                    throw SmilesError("atom symbol '" + text.substr(i, 2) + "' not in alphabet", i);
                throw SmilesError("atom symbol '" + text.substr(i, 1) + "' not in alphabet", i);
            }
            attach(g.add_atom(type));
            i += sym_len;
        } else if (is_lower(c)) {
            throw SmilesError("aromatic (lowercase) atoms are not supported; input must be kekulized", i);
        } else if (c == '+') {
            throw SmilesError("charged atoms are not supported", i);
        } else if (c == '/' || c == '\\' || c == '@') {
            throw SmilesError("stereo markers are not supported", i);
        } else if (c == '.') {
            throw SmilesError("multi-fragment '.' is not supported", i);
        } else {
            throw SmilesError(std::string("unexpected character '") + c + "'", i);
        }
    }

    if (pending_order != 0) throw SmilesError("dangling bond symbol at end of input", pending_pos);
    if (!branch_stack.empty()) throw SmilesError("unclosed branch", len);
    if (!open_rings.empty()) throw SmilesError("unmatched ring closure", open_rings.begin()->second.pos);
    if (g.n() == 0) throw SmilesError("no atoms", 0);
    return g;
}

// ---------------------------------------------------------------------------
// WL refinement and hashing

std::vector<uint64_t> wl_labels(const MolGraph& g) {
    const int n = g.n();
    std::vector<uint64_t> label(size_t(n), 0);
    for (int i = 0; i < n; ++i) label[size_t(i)] = hash_mix(0x575755aaULL, uint64_t(g.atom(i)));
    std::vector<uint64_t> next(size_t(n), 0);
    std::vector<uint64_t> sig;
    for (int round = 0; round < n; ++round) {
        for (int i = 0; i < n; ++i) {
            sig.clear();
            for (const auto& [nb, ord] : g.neighbors(i))
                sig.push_back(hash_mix(uint64_t(ord), label[size_t(nb)]));
            std::sort(sig.begin(), sig.end());
            uint64_t h = hash_mix(label[size_t(i)], 0x9137ULL);
            for (uint64_t s : sig) h = hash_mix(h, s);
            next[size_t(i)] = h;
        }
        label.swap(next);
    }
    return label;
}

uint64_t wl_hash(const MolGraph& g) {
    std::vector<uint64_t> label = wl_labels(g);
    std::sort(label.begin(), label.end());
    uint64_t h = hash_mix(0x6d6f6c67ULL, uint64_t(g.n()));
    for (uint64_t l : label) h = hash_mix(h, l);
    return h;
}

std::vector<int> connected_components(const MolGraph& g) {
    const int n = g.n();
    std::vector<int> comp(size_t(n), -1);
    int next_id = 0;
    std::deque<int> queue;
    for (int start = 0; start < n; ++start) {
        if (comp[size_t(start)] >= 0) continue;
        comp[size_t(start)] = next_id;
        queue.push_back(start);
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (const auto& [nb, ord] : g.neighbors(u)) {
                if (comp[size_t(nb)] < 0) {
                    comp[size_t(nb)] = next_id;
                    queue.push_back(nb);
                }
            }
        }
        ++next_id;
    }
    return comp;
}

int component_count(const MolGraph& g) {
    const auto comp = connected_components(g);
    int mx = -1;
    for (int c : comp) mx = std::max(mx, c);
    return mx + 1;
}

// ---------------------------------------------------------------------------
// valence

ValidityReport check_valence(const MolGraph& g, const Alphabet& alpha) {
    ValidityReport rep;
    for (int i = 0; i < g.n(); ++i) {
        int used = 0;
        for (const auto& [nb, ord] : g.neighbors(i)) used += ord;
        const int mx = alpha.max_valence[size_t(g.atom(i))];
        if (used > mx) rep.violations.push_back({i, used, mx});
    }
    rep.connected = g.n() >= 1 && component_count(g) == 1;
    rep.valid = rep.connected && rep.violations.empty();
    return rep;
}

// ---------------------------------------------------------------------------
// SMILES writing

namespace {

bool bare_symbol_ok(const std::string& sym) {
    static const char* bare[] = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
    for (const char* b : bare)
        if (sym == b) return true;
    return false;
}

std::string bond_symbol(int order) {
    switch (order) {
    case 2: return "=";
    case 3: return "#";
    default: return "";
    }
}

struct Writer {
    const MolGraph& g;
    const Alphabet& alpha;
    std::vector<int> rank;             // WL rank per node, for deterministic traversal
    std::vector<uint8_t> visited;
    std::vector<std::vector<std::pair<int, int>>> ring_digits; // per node: (closure number, order)
    std::vector<std::map<int, bool>> ring_edge;                // marks bonds emitted as closures
    int next_closure = 1;
    std::ostringstream out;

    explicit Writer(const MolGraph& graph, const Alphabet& a) : g(graph), alpha(a) {
        std::vector<uint64_t> labels = wl_labels(g);
        std::vector<uint64_t> sorted = labels;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        rank.resize(size_t(g.n()));
        for (int i = 0; i < g.n(); ++i)
            rank[size_t(i)] = int(std::lower_bound(sorted.begin(), sorted.end(), labels[size_t(i)]) -
                                  sorted.begin());
        visited.assign(size_t(g.n()), 0);
        ring_digits.resize(size_t(g.n()));
        ring_edge.resize(size_t(g.n()));
    }

    std::vector<std::pair<int, int>> ordered_neighbors(int u) const {
        auto nbs = g.neighbors(u);
        std::stable_sort(nbs.begin(), nbs.end(), [&](const auto& x, const auto& y) {
            if (rank[size_t(x.first)] != rank[size_t(y.first)])
                return rank[size_t(x.first)] < rank[size_t(y.first)];
            return x.first < y.first;
        });
        return nbs;
    }

    // pass 1: classify ring-closure bonds in DFS discovery order
    void classify(int u, int parent) {
        visited[size_t(u)] = 1;
        for (const auto& [v, ord] : ordered_neighbors(u)) {
            if (v == parent) continue; // the tree edge; the graph is simple
            if (!visited[size_t(v)]) {
                classify(v, u);
            } else if (!ring_edge[size_t(u)].count(v)) {
                const int num = next_closure++;
                if (num > 99) throw DataError("too many ring closures to write");
                ring_edge[size_t(u)][v] = true;
                ring_edge[size_t(v)][u] = true;
                ring_digits[size_t(u)].push_back({num, ord});
                ring_digits[size_t(v)].push_back({num, ord});
            }
        }
    }

    void emit_atom(int u) {
        const std::string& sym = alpha.symbols[size_t(g.atom(u))];
        if (bare_symbol_ok(sym))
            out << sym;
        else
            out << '[' << sym << ']';
        std::sort(ring_digits[size_t(u)].begin(), ring_digits[size_t(u)].end());
        for (const auto& [num, ord] : ring_digits[size_t(u)]) {
            out << bond_symbol(ord);
            if (num < 10)
                out << num;
            else
                out << '%' << num;
        }
    }

    // pass 2: same traversal, emitting text
    void emit(int u, int parent) {
        visited[size_t(u)] = 1;
        emit_atom(u);
        std::vector<std::pair<int, int>> children;
        for (const auto& [v, ord] : ordered_neighbors(u)) {
            if (v == parent) continue;
            if (ring_edge[size_t(u)].count(v)) continue;
            if (!visited[size_t(v)]) children.push_back({v, ord});
        }
        for (size_t c = 0; c < children.size(); ++c) {
            const auto& [v, ord] = children[c];
            const bool last = c + 1 == children.size();
            if (!last) out << '(';
            out << bond_symbol(ord);
            emit(v, u);
            if (!last) out << ')';
        }
    }
};

} // namespace

std::string write_smiles(const MolGraph& g, const Alphabet& alpha) {
    if (g.n() == 0) throw DataError("cannot write an empty graph");
    if (component_count(g) != 1)
        throw DataError("cannot write a disconnected graph as a single SMILES");
    Writer w(g, alpha);
    int root = 0;
    for (int i = 1; i < g.n(); ++i)
        if (w.rank[size_t(i)] < w.rank[size_t(root)]) root = i;
    w.classify(root, -1);
    std::fill(w.visited.begin(), w.visited.end(), 0);
    w.emit(root, -1);
    return w.out.str();
}

// ---------------------------------------------------------------------------

GraphFeatures featurize(const MolGraph& g, const Alphabet& alpha) {
    GraphFeatures f;
    f.n = g.n();
    f.d_x = alpha.size();
    f.x.assign(size_t(f.n) * size_t(f.d_x), 0.0);
    f.e.assign(size_t(f.n) * size_t(f.n) * size_t(GraphFeatures::d_e), 0.0);
    for (int i = 0; i < f.n; ++i) {
        const int t = g.atom(i);
        if (t < 0 || t >= f.d_x) throw DataError("atom type outside the alphabet");
        f.x[size_t(i) * size_t(f.d_x) + size_t(t)] = 1.0;
    }
    for (int i = 0; i < f.n; ++i) {
        for (int j = 0; j < f.n; ++j) {
            const int order = i == j ? 0 : g.bond_order(i, j); // 0 = "no bond" channel
            f.e[(size_t(i) * size_t(f.n) + size_t(j)) * size_t(GraphFeatures::d_e) +
                size_t(order)] = 1.0;
        }
    }
    return f;
}

MolGraph defeaturize(const GraphFeatures& f) {
    MolGraph g;
    for (int i = 0; i < f.n; ++i) {
        int best = 0;
        for (int t = 1; t < f.d_x; ++t)
            if (f.x[size_t(i) * size_t(f.d_x) + size_t(t)] >
                f.x[size_t(i) * size_t(f.d_x) + size_t(best)])
                best = t;
        g.add_atom(best);
    }
    for (int i = 0; i < f.n; ++i) {
        for (int j = i + 1; j < f.n; ++j) {
            const size_t base = (size_t(i) * size_t(f.n) + size_t(j)) * size_t(GraphFeatures::d_e);
            int best = 0;
            for (int c = 1; c < GraphFeatures::d_e; ++c)
                if (f.e[base + size_t(c)] > f.e[base + size_t(best)]) best = c;
            if (best > 0) g.add_bond(i, j, best);
        }
    }
    return g;
}

MolGraph permute_graph(const MolGraph& g, const std::vector<int>& perm) {
    const int n = g.n();
    if (int(perm.size()) != n) throw DataError("permutation length mismatch");
    std::vector<int> pos(size_t(n), -1); // old index -> new index
    for (int k = 0; k < n; ++k) {
        const int old = perm[size_t(k)];
        if (old < 0 || old >= n || pos[size_t(old)] != -1) throw DataError("invalid permutation");
        pos[size_t(old)] = k;
    }
    MolGraph out;
    for (int k = 0; k < n; ++k) out.add_atom(g.atom(perm[size_t(k)]));
    for (const auto& b : g.bonds()) out.add_bond(pos[size_t(b.a)], pos[size_t(b.b)], b.order);
    return out;
}

std::vector<MolGraph> load_dataset(const std::string& path, const Alphabet& alpha, int max_atoms) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);
    std::vector<MolGraph> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;
        size_t last = line.find_last_not_of(" \t");
        const std::string smi = line.substr(first, last - first + 1);
        try {
            MolGraph g = parse_smiles(smi, alpha);
            if (max_atoms > 0 && g.n() > max_atoms)
                throw DataError("molecule has " + std::to_string(g.n()) + " atoms, limit is " +
                                std::to_string(max_atoms));
            out.push_back(std::move(g));
        } catch (const SmilesError& e) {
            throw DataError(e.what(), line_no);
        } catch (const DataError& e) {
            throw DataError(e.what(), line_no);
        }
    }
    return out;
}

void save_dataset(const std::string& path, const std::vector<std::string>& smiles_lines) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write dataset file: " + path);
        for (const auto& s : smiles_lines) out << s << '\n';
    }
    std::rename(tmp.c_str(), path.c_str());
}

} // namespace gvt
