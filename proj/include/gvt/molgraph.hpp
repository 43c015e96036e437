#pragma once

// Molecular graph data model, restricted SMILES reading/writing, valence
// checking and Weisfeiler-Lehman hashing.
//
// The SMILES subset is hydrogen-free and kekulized: element symbols from the
// dataset alphabet (bare or bracketed, no charge/isotope/stereo), bond
// symbols - = # (single implicit), branches ( ), ring closures 0-9 and %nn.
// Aromatic lowercase atoms are rejected.

#include "gvt/common.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace gvt {

// Dataset atom alphabet with per-type maximum valence.
struct Alphabet {
    std::vector<std::string> symbols;
    std::vector<int> max_valence;

    int size() const { return int(symbols.size()); }
    int index_of(const std::string& sym) const;

    static Alphabet qm9();     // C,N,O,F
    static Alphabet organic(); // C,N,O,F,P,S,Cl,Br,I
    // symbols drawn from the built-in valence table
    static Alphabet from_symbols(const std::vector<std::string>& symbols);
};

struct Bond {
    int a, b;  // a < b
    int order; // 1..3
};

class MolGraph {
public:
    MolGraph() = default;

    int add_atom(int type);
    void add_bond(int i, int j, int order);

    int n() const { return int(atoms_.size()); }
    int atom(int i) const { return atoms_[size_t(i)]; }
    const std::vector<int>& atoms() const { return atoms_; }
    const std::vector<Bond>& bonds() const { return bonds_; }

    int bond_order(int i, int j) const; // 0 if not bonded
    // (neighbor, order) pairs in ascending neighbor order
    const std::vector<std::pair<int, int>>& neighbors(int i) const { return adj_[size_t(i)]; }
    int degree(int i) const { return int(adj_[size_t(i)].size()); }

    bool operator==(const MolGraph& other) const;

private:
    std::vector<int> atoms_;
    std::vector<Bond> bonds_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
};

struct ValidityReport {
    bool valid = false;
    bool connected = false;
    // (atom index, used valence, max valence)
    std::vector<std::array<int, 3>> violations;
};

class SmilesError : public std::runtime_error {
public:
    SmilesError(const std::string& msg, size_t byte_offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    size_t offset;
};

MolGraph parse_smiles(const std::string& text, const Alphabet& alpha);
std::string write_smiles(const MolGraph& g, const Alphabet& alpha);

ValidityReport check_valence(const MolGraph& g, const Alphabet& alpha);

// Permutation-invariant 64-bit digest via iterated WL label refinement
// (n rounds) over (atom type, multiset of (bond order, neighbor label)).
uint64_t wl_hash(const MolGraph& g);

// Final WL refinement labels, used to pick canonical DFS roots when writing.
std::vector<uint64_t> wl_labels(const MolGraph& g);

std::vector<int> connected_components(const MolGraph& g); // component id per node
int component_count(const MolGraph& g);

// Dense one-hot features: X is n*d_x (atom types), E is n*n*d_e with
// channel 0 = "no bond" and channels 1-3 = bond orders; E is symmetric and
// its diagonal is "no bond".
struct GraphFeatures {
    static constexpr int d_e = 4;
    int n = 0;
    int d_x = 0;
    std::vector<double> x; // n*d_x
    std::vector<double> e; // n*n*d_e
};

GraphFeatures featurize(const MolGraph& g, const Alphabet& alpha);
MolGraph defeaturize(const GraphFeatures& f); // argmax per row / per pair

// Dataset file: one SMILES per line; '#' lines and blank lines ignored.
// Throws DataError carrying the first offending line number.
std::vector<MolGraph> load_dataset(const std::string& path, const Alphabet& alpha, int max_atoms);
void save_dataset(const std::string& path, const std::vector<std::string>& smiles_lines);

MolGraph permute_graph(const MolGraph& g, const std::vector<int>& perm); // perm[new] = old

} // namespace gvt
