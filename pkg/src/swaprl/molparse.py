"""Token-sequence SMILES parser and canonical-form writer.

parse() turns a list of token symbols into a molecular graph or a positioned
ParseFailure; it performs no chemistry checks (those live in chemcheck).
canonicalize() produces a normal-form string used for set membership.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

BOND_SINGLE = 1
BOND_DOUBLE = 2
BOND_TRIPLE = 3
BOND_AROMATIC = 4

_BOND_STR = {BOND_SINGLE: "-", BOND_DOUBLE: "=", BOND_TRIPLE: "#"}

ELEMENTS = {"H", "B", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I"}
AROMATIC_ELEMENTS = {"b", "c", "n", "o", "p", "s"}

_BRACKET_RE = re.compile(
    r"^\[(\d+)?([A-Z][a-z]?|[bcnops])(@{1,2})?(H(\d*))?(\+\d+|-\d+|\++|-+)?\]$"
)


@dataclass(frozen=True, slots=True)
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    hcount: Optional[int] = None  # None = implicit (organic subset)


@dataclass(slots=True)
class MolGraph:
    atoms: list[Atom]
    bonds: list[tuple[int, int, int]]  # (a, b, order)

    def neighbors(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for a, b, order in self.bonds:
            adj[a].append((b, order))
            adj[b].append((a, order))
        return adj

    def validate(self) -> None:
        n = len(self.atoms)
        seen = set()
        for a, b, order in self.bonds:
            if a == b:
                raise ValueError(f"self-bond on atom {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"bond ({a},{b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
            if order == BOND_AROMATIC and not (
                self.atoms[a].aromatic and self.atoms[b].aromatic
            ):
                raise ValueError(f"aromatic bond {key} on non-aromatic atom")


class FailKind(IntEnum):
    UnbalancedBranch = 1
    EmptyBranch = 2
    UnclosedRing = 3
    DanglingBond = 4
    BadTokenPosition = 5


@dataclass(frozen=True, slots=True)
class ParseFailure:
    kind: FailKind
    position: int  # index of the first offending token


# token classification kinds
_K_ATOM, _K_BOND, _K_DIGIT, _K_OPEN, _K_CLOSE, _K_BAD = range(6)

_token_info: dict[str, tuple] = {}


def _classify(sym: str) -> tuple:
    info = _token_info.get(sym)
    if info is None:
        info = _classify_uncached(sym)
        _token_info[sym] = info
    return info


def _classify_uncached(sym: str) -> tuple:
    if sym == "(":
        return (_K_OPEN,)
    if sym == ")":
        return (_K_CLOSE,)
    if sym == "=":
        return (_K_BOND, BOND_DOUBLE)
    if sym == "#":
        return (_K_BOND, BOND_TRIPLE)
    # stereo slashes degrade to plain single bonds
    if sym in ("-", "/", "\\"):
        return (_K_BOND, BOND_SINGLE)
    if len(sym) == 1 and sym.isdigit():
        return (_K_DIGIT, int(sym))
    if sym in ELEMENTS:
        return (_K_ATOM, Atom(sym))
    if sym in AROMATIC_ELEMENTS:
        return (_K_ATOM, Atom(sym.capitalize(), aromatic=True))
    if sym.startswith("["):
        m = _BRACKET_RE.match(sym)
        if m is None:
            return (_K_BAD,)
        elem = m.group(2)
        aromatic = elem in AROMATIC_ELEMENTS
        if aromatic:
            elem = elem.capitalize()
        if elem not in ELEMENTS:
            return (_K_BAD,)
        hcount = 0
        if m.group(4):
            hcount = int(m.group(5)) if m.group(5) else 1
        charge = 0
        q = m.group(6)
        if q:
            if q[0] == "+":
                charge = int(q[1:]) if q[1:].isdigit() else len(q)
            else:
                charge = -(int(q[1:]) if q[1:].isdigit() else len(q))
        return (_K_ATOM, Atom(elem, aromatic, charge, hcount))
    return (_K_BAD,)


def parse(tokens: Sequence[str]) -> MolGraph | ParseFailure:
    """Standard SMILES walk over token symbols.

    Implicit bonds are aromatic when both ends are aromatic, single otherwise.
    An explicit bond applies to the next atom or ring digit. Returns a
    positioned ParseFailure instead of raising; an empty sequence yields an
    empty graph (callers decide whether that is meaningful).
    """
    atoms: list[Atom] = []
    bonds: list[tuple[int, int, int]] = []
    bonded: set[tuple[int, int]] = set()
    prev: Optional[int] = None
    # (attachment atom, '(' position, atom count at open)
    stack: list[tuple[Optional[int], int, int]] = []
    pending: Optional[tuple[int, int]] = None  # (order, bond token position)
    rings: dict[int, tuple[int, Optional[int], int]] = {}
    after_open = False  # a branch must begin with an atom or a bond token

    for pos, sym in enumerate(tokens):
        info = _classify(sym)
        kind = info[0]
        if kind in (_K_OPEN, _K_DIGIT) and after_open:
            return ParseFailure(FailKind.BadTokenPosition, pos)
        if kind != _K_CLOSE:
            after_open = kind == _K_OPEN
        if kind == _K_ATOM:
            atom: Atom = info[1]
            idx = len(atoms)
            atoms.append(atom)
            if prev is not None:
                if pending is not None:
                    order = pending[0]
                    pending = None
                elif atoms[prev].aromatic and atom.aromatic:
                    order = BOND_AROMATIC
                else:
                    order = BOND_SINGLE
                bonds.append((prev, idx, order))
                bonded.add((prev, idx))
            prev = idx
        elif kind == _K_BOND:
            if prev is None:
                return ParseFailure(FailKind.BadTokenPosition, pos)
            if pending is not None:
                return ParseFailure(FailKind.DanglingBond, pending[1])
            pending = (info[1], pos)
        elif kind == _K_DIGIT:
            if prev is None:
                return ParseFailure(FailKind.BadTokenPosition, pos)
            d = info[1]
            if d in rings:
                other, other_order, _ = rings.pop(d)
                this_order = None
                if pending is not None:
                    this_order = pending[0]
                    pending = None
                if other == prev:
                    return ParseFailure(FailKind.BadTokenPosition, pos)
                if (
                    other_order is not None
                    and this_order is not None
                    and other_order != this_order
                ):
                    return ParseFailure(FailKind.DanglingBond, pos)
                order = other_order if other_order is not None else this_order
                if order is None:
                    if atoms[other].aromatic and atoms[prev].aromatic:
                        order = BOND_AROMATIC
                    else:
                        order = BOND_SINGLE
                key = (min(other, prev), max(other, prev))
                if key in bonded:
                    return ParseFailure(FailKind.BadTokenPosition, pos)
                bonds.append((other, prev, order))
                bonded.add(key)
            else:
                this_order = None
                if pending is not None:
                    this_order = pending[0]
                    pending = None
                rings[d] = (prev, this_order, pos)
        elif kind == _K_OPEN:
            if prev is None:
                return ParseFailure(FailKind.BadTokenPosition, pos)
            if pending is not None:
                return ParseFailure(FailKind.DanglingBond, pending[1])
            stack.append((prev, pos, len(atoms)))
        elif kind == _K_CLOSE:
            if pending is not None:
                return ParseFailure(FailKind.DanglingBond, pending[1])
            if not stack:
                return ParseFailure(FailKind.UnbalancedBranch, pos)
            saved, _, atoms_at_open = stack.pop()
            if len(atoms) == atoms_at_open:
                return ParseFailure(FailKind.EmptyBranch, pos)
            prev = saved
        else:
            return ParseFailure(FailKind.BadTokenPosition, pos)

    if pending is not None:
        return ParseFailure(FailKind.DanglingBond, pending[1])
    # end-of-input failures report the earliest unresolved opener
    fail_pos = None
    fail_kind = None
    if rings:
        fail_pos = min(p for (_, _, p) in rings.values())
        fail_kind = FailKind.UnclosedRing
    if stack:
        p = min(p for (_, p, _) in stack)
        if fail_pos is None or p < fail_pos:
            fail_pos, fail_kind = p, FailKind.UnbalancedBranch
    if fail_kind is not None:
        return ParseFailure(fail_kind, fail_pos)
    return MolGraph(atoms, bonds)


def parse_smiles(s: str) -> MolGraph | ParseFailure:
    """Convenience wrapper: lex a raw string with the base lexer, then parse."""
    from .vocab import TokenizeError, lex_smiles

    try:
        return parse(lex_smiles(s))
    except TokenizeError as e:
        return ParseFailure(FailKind.BadTokenPosition, e.position)


# ---------------------------------------------------------------------------
# canonicalization


def _initial_invariants(g: MolGraph, adj) -> list[tuple]:
    out = []
    for i, a in enumerate(g.atoms):
        h = a.hcount if a.hcount is not None else -1
        out.append((a.element, a.aromatic, a.charge, len(adj[i]), h))
    return out


def _refine(g: MolGraph, adj, ranks: list[int]) -> list[int]:
    """Iterate neighbor-multiset refinement to a fixed point."""
    n = len(g.atoms)
    n_classes = len(set(ranks))
    while True:
        sigs = []
        for i in range(n):
            nbr = sorted((order, ranks[j]) for j, order in adj[i])
            sigs.append((ranks[i], tuple(nbr)))
        order_map = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new_ranks = [order_map[s] for s in sigs]
        new_classes = len(set(new_ranks))
        if new_classes == n_classes:
            return new_ranks
        ranks, n_classes = new_ranks, new_classes


_CANON_BRANCH_CAP = 20_000


def canonicalize(g: MolGraph) -> str:
    """Deterministic canonical SMILES via invariant refinement.

    Remaining ties after refinement are broken exhaustively: each tied atom in
    the lowest tied class is tried as the distinguished one and the smallest
    emitted string wins, which keeps the result invariant under atom
    relabeling without a full automorphism search.
    """
    if not g.atoms:
        return ""
    adj = g.neighbors()
    init = _initial_invariants(g, adj)
    order_map = {s: r for r, s in enumerate(sorted(set(init)))}
    ranks = _refine(g, adj, [order_map[s] for s in init])
    budget = [_CANON_BRANCH_CAP]
    return _canon_search(g, adj, ranks, budget)


def _canon_search(g: MolGraph, adj, ranks: list[int], budget: list[int]) -> str:
    n = len(g.atoms)
    if len(set(ranks)) == n:
        return _emit(g, adj, ranks)
    if budget[0] <= 0:
        raise RuntimeError("canonicalization tie-break budget exhausted")
    # lowest-rank class with a tie
    by_rank: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        by_rank.setdefault(r, []).append(i)
    tied = min(r for r, members in by_rank.items() if len(members) > 1)
    best = None
    for a in by_rank[tied]:
        budget[0] -= 1
        trial = [2 * r + 1 for r in ranks]
        trial[a] = 2 * ranks[a]
        s = _canon_search(g, adj, _refine(g, adj, trial), budget)
        if best is None or s < best:
            best = s
    return best


def _atom_str(a: Atom) -> str:
    sym = a.element.lower() if a.aromatic else a.element
    if a.hcount is None and a.charge == 0:
        return sym
    out = "[" + sym
    h = a.hcount or 0
    if h >= 1:
        out += "H" + (str(h) if h > 1 else "")
    if a.charge > 0:
        out += "+" + (str(a.charge) if a.charge > 1 else "")
    elif a.charge < 0:
        out += "-" + (str(-a.charge) if a.charge < -1 else "")
    return out + "]"


def _bond_str(g: MolGraph, a: int, b: int, order: int) -> str:
    if order == BOND_AROMATIC:
        return ""
    if order == BOND_SINGLE:
        if g.atoms[a].aromatic and g.atoms[b].aromatic:
            return "-"
        return ""
    return _BOND_STR[order]


def _emit(g: MolGraph, adj, ranks: list[int]) -> str:
    """DFS emission from the lowest-rank atom, neighbors in rank order."""
    n = len(g.atoms)
    root = min(range(n), key=lambda i: ranks[i])
    visited = [False] * n
    visit_order: list[int] = []
    children: list[list[int]] = [[] for _ in range(n)]
    ring_open_at: list[list[int]] = [[] for _ in range(n)]  # later partners
    seen_ring: set[tuple[int, int]] = set()

    def dfs(node: int, par: Optional[int]) -> None:
        visited[node] = True
        visit_order.append(node)
        for j in sorted((j for j, _ in adj[node]), key=lambda j: (ranks[j], j)):
            if not visited[j]:
                children[node].append(j)
                dfs(j, node)
            elif j != par:
                key = (min(node, j), max(node, j))
                if key not in seen_ring:
                    seen_ring.add(key)
                    ring_open_at[j].append(node)

    dfs(root, None)

    pos = {a: i for i, a in enumerate(visit_order)}
    for a in range(n):
        ring_open_at[a].sort(key=lambda w: pos[w])

    bond_order = {}
    for a, b, o in g.bonds:
        bond_order[(a, b)] = o
        bond_order[(b, a)] = o

    if len(visit_order) != n:
        raise ValueError("cannot emit a disconnected graph")

    digit_of: dict[tuple[int, int], int] = {}
    free = list(range(1, 10)) + [0]  # digit 0 is legal but used last
    out: list[str] = []

    def emit_atom(node: int) -> None:
        out.append(_atom_str(g.atoms[node]))
        for w in ring_open_at[node]:
            if not free:
                raise RuntimeError("more than 10 simultaneously open rings")
            d = free.pop(0)
            digit_of[(node, w)] = d
            out.append(_bond_str(g, node, w, bond_order[(node, w)]) + str(d))
        closing = sorted(
            (v for (v, w), d in digit_of.items() if w == node),
            key=lambda v: digit_of[(v, node)],
        )
        for v in closing:
            d = digit_of.pop((v, node))
            out.append(str(d))
            free.append(d)
            free.sort(key=lambda x: (x - 1) % 10)
        kids = children[node]
        for i, c in enumerate(kids):
            last = i == len(kids) - 1
            bond = _bond_str(g, node, c, bond_order[(node, c)])
            if last:
                out.append(bond)
                emit_atom(c)
            else:
                out.append("(" + bond)
                emit_atom(c)
                out.append(")")

    emit_atom(root)
    return "".join(out)
