#!/usr/bin/env python3
"""Regenerates parser_corpus.tsv.

Builds random valence-legal molecular graphs and writes them as restricted
SMILES with an independent writer (spanning-tree DFS from atom 0, neighbors
in index order, every non-final child parenthesized, ring-closure digits
attached to both endpoints, bond symbol only at the opening digit). The
expected atom counts / element counts / bond-order multisets come straight
from the generated graph, so the file acts as a cross-implementation
reference for the C++ parser.

Columns (tab-separated): smiles, atom_count, element_counts, bond_multiset.
"""

import random
from collections import Counter

VALENCE = {"B": 3, "C": 4, "N": 3, "O": 2, "F": 1,
           "P": 5, "S": 6, "Cl": 1, "Br": 1, "I": 1}
BARE = {"B", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I"}
ALPHABET = ["C", "N", "O", "F", "P", "S", "Cl", "Br", "I"]
BOND_SYM = {1: "", 2: "=", 3: "#"}


class Mol:
    def __init__(self):
        self.atoms = []          # element symbols
        self.bonds = {}          # (i, j) i<j -> order

    def add_atom(self, sym):
        self.atoms.append(sym)
        return len(self.atoms) - 1

    def add_bond(self, i, j, order):
        assert i != j and (min(i, j), max(i, j)) not in self.bonds
        self.bonds[(min(i, j), max(i, j))] = order

    def neighbors(self, i):
        out = []
        for (a, b), o in self.bonds.items():
            if a == i:
                out.append((b, o))
            elif b == i:
                out.append((a, o))
        return sorted(out)

    def used_valence(self, i):
        return sum(o for (a, b), o in self.bonds.items() if i in (a, b))


def random_mol(rng, n):
    m = Mol()
    m.add_atom(rng.choice(ALPHABET))
    for _ in range(n - 1):
        hosts = [i for i in range(len(m.atoms))
                 if m.used_valence(i) < VALENCE[m.atoms[i]]]
        if not hosts:
            break
        parent = rng.choice(hosts)
        sym = rng.choice(ALPHABET)
        cap = min(VALENCE[m.atoms[parent]] - m.used_valence(parent), VALENCE[sym])
        order = 1
        r = rng.random()
        if cap >= 3 and r < 0.06:
            order = 3
        elif cap >= 2 and r < 0.30:
            order = 2
        child = m.add_atom(sym)
        m.add_bond(parent, child, order)
    # up to two extra ring-closing edges
    for _ in range(rng.randint(0, 2)):
        free = [i for i in range(len(m.atoms))
                if m.used_valence(i) < VALENCE[m.atoms[i]]]
        rng.shuffle(free)
        done = False
        for a in free:
            for b in free:
                if a < b and (a, b) not in m.bonds:
                    m.add_bond(a, b, 1)
                    done = True
                    break
            if done:
                break
    return m


def write_smiles(m, ring_start):
    """Independent restricted-SMILES writer; see module docstring."""
    n = len(m.atoms)
    # spanning tree via recursive DFS from 0 (index-ordered neighbors);
    # leftover bonds become ring closures
    tree = {i: [] for i in range(n)}
    ring = []   # (back-edge endpoint u, earlier-visited endpoint v, order)
    seen_edges = set()
    visited = [False] * n

    def dfs(u):
        visited[u] = True
        for v, o in m.neighbors(u):
            key = (min(u, v), max(u, v))
            if key in seen_edges:
                continue
            if visited[v]:
                seen_edges.add(key)
                ring.append((u, v, o))
            else:
                seen_edges.add(key)
                tree[u].append((v, o))
                dfs(v)

    dfs(0)

    digits = {i: [] for i in range(n)}  # atom -> [(number, order, opening?)]
    for k, (u, v, o) in enumerate(ring):
        num = ring_start + k
        digits[v].append((num, o, True))    # v was visited first (back edge)
        digits[u].append((num, o, False))

    def atom_token(i):
        sym = m.atoms[i]
        tok = sym if sym in BARE else "[" + sym + "]"
        for num, o, opening in digits[i]:
            part = BOND_SYM[o] if opening else ""   # bond symbol at opening only
            part += str(num) if num < 10 else "%%%02d" % num
            tok += part
        return tok

    def emit(u):
        out = atom_token(u)
        kids = tree[u]
        for idx, (v, o) in enumerate(kids):
            sub = BOND_SYM[o] + emit(v)
            out += sub if idx == len(kids) - 1 else "(" + sub + ")"
        return out

    return emit(0)


def fixture_row(m, smiles):
    elements = Counter(m.atoms)
    elem_str = ",".join("%s:%d" % (s, c) for s, c in sorted(elements.items()))
    orders = Counter(m.bonds.values())
    bond_str = ",".join("%d:%d" % (o, c) for o, c in sorted(orders.items())) or "-"
    return "%s\t%d\t%s\t%s" % (smiles, len(m.atoms), elem_str, bond_str)


def hand_verified():
    """Known molecules, written and tallied by hand."""
    return [
        "O=C=O\t3\tC:1,O:2\t2:2",                 # carbon dioxide
        "CC(=O)O\t4\tC:2,O:2\t1:2,2:1",           # acetic acid
        "C1=CC=CC=C1\t6\tC:6\t1:3,2:3",           # benzene, kekulized
        "C#N\t2\tC:1,N:1\t3:1",                   # hydrogen cyanide
        "ClCCl\t3\tC:1,Cl:2\t1:2",                # dichloromethane
        "C1CC1\t3\tC:3\t1:3",                     # cyclopropane
        "N#CC#N\t4\tC:2,N:2\t1:1,3:2",            # cyanogen
        "S(=O)(=O)(O)O\t5\tO:4,S:1\t1:2,2:2",     # sulfuric acid
        "C%10CCC%10\t4\tC:4\t1:4",                # cyclobutane via %nn
        "[C]([Br])([Br])[Br]\t4\tBr:3,C:1\t1:3",  # bromoform, bracket form
        "C(C)(C)(C)C\t5\tC:5\t1:4",               # neopentane, all-paren form
        "O=S=O\t3\tO:2,S:1\t2:2",                 # sulfur dioxide
        "FC(F)(F)F\t5\tC:1,F:4\t1:4",             # tetrafluoromethane
        "C1CC1C1CC1\t6\tC:6\t1:7",                # bicyclopropyl, digit reuse
        "N(=O)O\t3\tN:1,O:2\t1:1,2:1",            # nitrous acid fragment
        "C-C-C\t3\tC:3\t1:2",                     # explicit single bonds
        "I\t1\tI:1\t-",                           # single atom
        "P(C)(C)C\t4\tC:3,P:1\t1:3",              # trimethylphosphine
        "C12CC1C2\t4\tC:4\t1:5",                  # bicyclobutane, two closures
        "BrC#CBr\t4\tBr:2,C:2\t1:2,3:1",          # dibromoacetylene
    ]


def main():
    rng = random.Random(20260815)
    rows = hand_verified()
    seen = set(r.split("\t")[0] for r in rows)
    while len(rows) < 200:
        n = rng.randint(1, 14)
        m = random_mol(rng, n)
        ring_start = 10 if rng.random() < 0.12 else 1
        smiles = write_smiles(m, ring_start)
        if smiles in seen:
            continue
        seen.add(smiles)
        rows.append(fixture_row(m, smiles))
    with open("parser_corpus.tsv", "w") as fh:
        fh.write("# smiles<TAB>atom_count<TAB>element_counts<TAB>bond_multiset\n")
        fh.write("\n".join(rows) + "\n")
    print("wrote %d rows" % len(rows))


if __name__ == "__main__":
    main()
