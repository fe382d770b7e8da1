"""Ordered bi-trees, index functions, conjugation parities, phases and cutoffs.

A bi-tree has two roots r1 (id 0, parity +1) and r2 (id 1, parity -1).
Generation 1 always expands r1; every later generation replaces one
terminal node by a node with three ordered children.  Children inherit
the parity pattern (e, -e, e) from a parent of parity e, so slot 2 is the
conjugated one.  The sequence of expanded node ids is the chronicle.
"""

import itertools
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .spectral import PhaseTuple, phase_phi

DEFAULT_BUDGET = 10**8
MAX_ENUMERATION_J = 7


class BudgetExceeded(RuntimeError):
    pass


def enumeration_budget():
    """Assignment budget, overridable through the NF4NLS_BUDGET environment variable."""
    raw = os.environ.get("NF4NLS_BUDGET")
    return int(float(raw)) if raw else DEFAULT_BUDGET


def child_parities(parity):
    """Parities of the three ordered children of a node with the given parity."""
    return (parity, -parity, parity)


class Node(NamedTuple):
    id: int
    parent: int  # -1 for the two roots
    slot: int  # 1, 2, 3 for children, 0 for roots
    parity: int
    gen: int


@dataclass(frozen=True)
class OrderedBiTree:
    nodes: tuple
    chronicle: tuple

    @classmethod
    def initial(cls):
        """The unique element of BT(1): r1 expanded, r2 terminal."""
        roots = (Node(0, -1, 0, 1, 0), Node(1, -1, 0, -1, 0))
        return cls(roots, ())._expand(0)

    @property
    def J(self):
        return len(self.chronicle)

    def children(self, node_id):
        return tuple(nd.id for nd in self.nodes if nd.parent == node_id)

    def is_terminal(self, node_id):
        return node_id not in self.chronicle

    def terminals(self):
        return tuple(nd.id for nd in self.nodes if nd.id not in self.chronicle)

    def nonterminals(self):
        return self.chronicle

    def parity(self, node_id):
        return self.nodes[node_id].parity

    def _expand(self, node_id):
        if node_id in self.chronicle:
            raise ValueError(f"node {node_id} is already expanded")
        parent = self.nodes[node_id]
        gen = self.J + 1
        base = len(self.nodes)
        kids = tuple(
            Node(base + k, node_id, k + 1, p, gen) for k, p in enumerate(child_parities(parent.parity))
        )
        return OrderedBiTree(self.nodes + kids, self.chronicle + (node_id,))

    def expand(self, node_id):
        """The tree of the next generation obtained by expanding a terminal."""
        if not self.is_terminal(node_id):
            raise ValueError(f"node {node_id} is not terminal")
        return self._expand(node_id)

    def dump_lines(self):
        return [f"{nd.id},{nd.parent},{nd.slot},{nd.parity},{nd.gen}" for nd in self.nodes]


def count_ordered_bitrees(J):
    """|BT(J)| = 2^{J-1} J!  (product of 2k terminal choices, k = 1..J-1)."""
    if J < 1:
        raise ValueError("J must be positive")
    return 2 ** (J - 1) * math.factorial(J)


def iter_ordered_bitrees(J):
    """Depth-first generator over BT(J) in chronicle order."""
    if J < 1:
        raise ValueError("J must be positive")

    def rec(tree):
        if tree.J == J:
            yield tree
            return
        for b in tree.terminals():
            yield from rec(tree.expand(b))

    yield from rec(OrderedBiTree.initial())


def enumerate_ordered_bitrees(J, cap=MAX_ENUMERATION_J):
    if J > cap:
        raise BudgetExceeded(f"J={J} exceeds the enumeration cap J<={cap}")
    return list(iter_ordered_bitrees(J))


def project(tree, which):
    """Nodes of the sub-tree hanging from root r1 (which=1) or r2 (which=2)."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    keep = {which - 1}
    out = []
    for nd in tree.nodes:
        if nd.id in keep or nd.parent in keep:
            keep.add(nd.id)
            out.append(nd)
    return tuple(out)


def project_generation(tree, j):
    """Chronicle prefix: the tree as it stood after generation j."""
    if not 1 <= j <= tree.J:
        raise ValueError(f"generation {j} outside 1..{tree.J}")
    nodes = tuple(nd for nd in tree.nodes if nd.gen <= j)
    return OrderedBiTree(nodes, tree.chronicle[:j])


class IndexMode(str, Enum):
    ALL_NODES = "ALL_NODES"
    NONTERMINAL = "NONTERMINAL"
    UNRESTRICTED = "UNRESTRICTED"


class IndexFunction(tuple):
    """Frequencies indexed by node id."""

    def as_dict(self):
        return dict(enumerate(self))


def index_function_size(tree, N, mode=IndexMode.ALL_NODES, root=None, window=None):
    """Upper bound on the number of assignments the enumeration visits."""
    mode = IndexMode(mode)
    w = _window(N, mode, window)
    roots = 1 if root is not None else 2 * N + 1
    return roots * (2 * w + 1) ** (2 * tree.J)


def _window(N, mode, window):
    if mode is IndexMode.ALL_NODES:
        return N
    if window is None:
        raise ValueError(f"mode {mode.value} needs an explicit window for the unbounded nodes")
    return window


def enumerate_index_functions(tree, N, mode=IndexMode.ALL_NODES, root=None, window=None, budget=None):
    """Iterate over admissible index functions of a bi-tree.

    ALL_NODES    every node satisfies |n_a| <= N.
    NONTERMINAL  non-terminal nodes satisfy |n_a| <= N; terminal nodes range over |n_a| <= window.
    UNRESTRICTED the root value is fixed to ``root``; all other nodes range over |n_a| <= window.

    ``root`` optionally fixes n_r in the first two modes as well.  For a
    fixed root each assignment is reached through 2J free variables (the
    first and third child of every expanded node).
    """
    mode = IndexMode(mode)
    if mode is IndexMode.UNRESTRICTED and root is None:
        raise ValueError("UNRESTRICTED mode needs a root value")
    budget = enumeration_budget() if budget is None else budget
    size = index_function_size(tree, N, mode, root, window)
    if size > budget:
        raise BudgetExceeded(f"enumeration of {size} assignments exceeds the budget {budget}")
    w = _window(N, mode, window)
    terminal = {nd.id: tree.is_terminal(nd.id) for nd in tree.nodes}

    def bound(node_id):
        if mode is IndexMode.NONTERMINAL and not terminal[node_id]:
            return N
        return w

    kids = [tree.children(a) for a in tree.chronicle]
    roots = [root] if root is not None else range(-N, N + 1)
    vals = [0] * len(tree.nodes)

    def rec(k):
        if k == len(kids):
            yield IndexFunction(vals)
            return
        a = tree.chronicle[k]
        na = vals[a]
        c1, c2, c3 = kids[k]
        b1, b2, b3 = bound(c1), bound(c2), bound(c3)
        for n1 in range(-b1, b1 + 1):
            if n1 == na:
                continue
            for n3 in range(-b3, b3 + 1):
                if n3 == na:
                    continue
                n2 = n1 + n3 - na
                if abs(n2) > b2:
                    continue
                vals[c1], vals[c2], vals[c3] = n1, n2, n3
                yield from rec(k + 1)

    for r in roots:
        if mode is not IndexMode.UNRESTRICTED and abs(r) > N:
            continue
        vals[0] = vals[1] = r
        yield from rec(0)


def check_index_function(tree, nf, N=None, mode=IndexMode.ALL_NODES, window=None):
    """Independent verification of the consistency conditions (a)-(c) and the bounds."""
    mode = IndexMode(mode)
    if len(nf) != len(tree.nodes) or nf[0] != nf[1]:
        return False
    for a in tree.chronicle:
        c1, c2, c3 = tree.children(a)
        if nf[a] != nf[c1] - nf[c2] + nf[c3]:
            return False
        if {nf[a], nf[c2]} & {nf[c1], nf[c3]}:
            return False
    if N is not None:
        for nd in tree.nodes:
            if mode is IndexMode.ALL_NODES:
                lim = N
            elif mode is IndexMode.NONTERMINAL and not tree.is_terminal(nd.id):
                lim = N
            elif nd.id in (0, 1) and mode is IndexMode.UNRESTRICTED:
                continue
            else:
                lim = window
            if lim is not None and abs(nf[nd.id]) > lim:
                return False
    return True


def brute_force_index_functions(tree, N, root):
    """All consistent assignments with every non-root node in [-N, N], by filtering the full box."""
    free = [nd.id for nd in tree.nodes if nd.id > 1]
    out = []
    for combo in itertools.product(range(-N, N + 1), repeat=len(free)):
        vals = [root, root] + list(combo)
        nf = IndexFunction(vals)
        if check_index_function(tree, nf):
            out.append(nf)
    return out


def generation_tuple(tree, nf, j):
    a = tree.chronicle[j - 1]
    c1, c2, c3 = tree.children(a)
    return PhaseTuple(nf[c1], nf[c2], nf[c3], nf[a])


def generation_phase(tree, nf, j):
    """Signed phase e_j * phi at generation j, e_j the parity of the expanded node."""
    if not 1 <= j <= tree.J:
        raise ValueError(f"generation {j} outside 1..{tree.J}")
    a = tree.chronicle[j - 1]
    return tree.parity(a) * phase_phi(generation_tuple(tree, nf, j))


def cumulative_phase(tree, nf, j):
    return sum(generation_phase(tree, nf, k) for k in range(1, j + 1))


def cutoff_threshold(j):
    return (2 * j + 4) ** 3


def cutoff_Cj(tree, nf, j):
    """Near-resonance set C_j: |cumulative phase at j+1| <= (2j+4)^3."""
    if not 1 <= j < tree.J:
        raise ValueError(f"C_{j} needs generation {j + 1} assigned (tree has J={tree.J})")
    return abs(cumulative_phase(tree, nf, j + 1)) <= cutoff_threshold(j)


def descendant_constant(tree, nf):
    """Smallest C with two terminals b satisfying |n_r| <= C^J |n_b|.

    Returns 0 when n_r = 0 and inf when fewer than two terminals are nonzero.
    """
    nr = abs(nf[0])
    if nr == 0:
        return 0.0
    mags = sorted((abs(nf[b]) for b in tree.terminals()), reverse=True)
    second = mags[1]
    if second == 0:
        return math.inf
    return max(nr / second, 1.0) ** (1.0 / tree.J)


def dump_trees(trees):
    """Text dump: a '# tree k chronicle=...' line then one `id,parent,slot,parity,gen` line per node."""
    lines = ["id,parent,slot,parity,gen"]
    for k, t in enumerate(trees):
        lines.append(f"# tree {k} chronicle={'-'.join(map(str, t.chronicle))}")
        lines.extend(t.dump_lines())
    return "\n".join(lines) + "\n"
