"""Chemistry diagnostics for parsed molecular graphs.

detect_problems() reports one problem per offending atom across a fixed
category enumeration (12 slots, 5 in active use). Kekulization is an exact
search for a double-bond matching on the aromatic subgraph in which every
aromatic carbon is saturated, donor heteroatoms stay unmatched, and each
smallest aromatic ring carries a 4n+2 pi count.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .molparse import BOND_AROMATIC, BOND_DOUBLE, BOND_SINGLE, MolGraph

E_MAX = 12


class Category(IntEnum):
    ValenceExceeded = 1
    KekulizationFailure = 2
    AromaticAtomNotInRing = 3
    AromaticBondOutsideRing = 4
    BadCharge = 5
    # categories 6-12 are reserved so the 12-slot scale keeps its meaning


@dataclass(frozen=True, slots=True)
class ChemProblem:
    category: Category
    atom: Optional[int]
    message: str


@dataclass(frozen=True, slots=True)
class Diagnostics:
    problems: tuple[ChemProblem, ...]

    @property
    def count(self) -> int:
        return len(self.problems)


@dataclass(frozen=True, slots=True)
class KekulizeFailure:
    atoms: tuple[int, ...]


# allowed valence sets before charge adjustment
VALENCES = {
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "P": (3, 5),
    "I": (1,),
    "B": (3,),
    "H": (1,),
}

# (element, charge) pairs accepted by the charge check; the set covers the
# MOSES alphabet ([N+]/[NH+]/..., [O-], [nH])
SUPPORTED_CHARGES = {("N", 1), ("O", -1)}


def allowed_valences(element: str, charge: int) -> tuple[int, ...]:
    base = VALENCES.get(element, (4,))
    if charge > 0 and element in ("N", "P"):
        return tuple(v + charge for v in base)
    if charge < 0 and element in ("O", "S"):
        return tuple(max(0, v + charge) for v in base)
    return base


def _bridges(n: int, edges: list[tuple[int, int]]) -> set[int]:
    """Indices of bridge edges (iterative lowpoint DFS)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for ei, (a, b) in enumerate(edges):
        adj[a].append((b, ei))
        adj[b].append((a, ei))
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for start in range(n):
        if disc[start] != -1:
            continue
        stack = [(start, -1, iter(adj[start]))]
        disc[start] = low[start] = timer
        timer += 1
        while stack:
            node, in_edge, it = stack[-1]
            advanced = False
            for nbr, ei in it:
                if ei == in_edge:
                    continue
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = timer
                    timer += 1
                    stack.append((nbr, ei, iter(adj[nbr])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nbr])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[node])
                    if low[node] > disc[parent]:
                        bridges.add(in_edge)
    return bridges


def ring_atoms(g: MolGraph) -> set[int]:
    """Atoms lying on any cycle of the full graph."""
    edges = [(a, b) for a, b, _ in g.bonds]
    br = _bridges(len(g.atoms), edges)
    out: set[int] = set()
    for ei, (a, b) in enumerate(edges):
        if ei not in br:
            out.add(a)
            out.add(b)
    return out


def _smallest_rings(n: int, edges: list[tuple[int, int]], cycle_edge_ids: list[int]):
    """Smallest ring through each cycle edge, deduplicated, as edge-id sets."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for ei, (a, b) in enumerate(edges):
        adj[a].append((b, ei))
        adj[b].append((a, ei))
    rings: dict[frozenset[int], tuple[int, ...]] = {}
    for target in cycle_edge_ids:
        u, v = edges[target]
        # BFS shortest path u -> v avoiding the edge itself
        prev: dict[int, tuple[int, int]] = {u: (-1, -1)}
        q = deque([u])
        while q:
            x = q.popleft()
            if x == v:
                break
            for y, ei in adj[x]:
                if ei == target or y in prev:
                    continue
                prev[y] = (x, ei)
                q.append(y)
        if v not in prev:
            continue
        path_edges = [target]
        path_atoms = [v]
        x = v
        while x != u:
            px, ei = prev[x]
            path_edges.append(ei)
            path_atoms.append(px)
            x = px
        rings.setdefault(frozenset(path_edges), tuple(sorted(path_atoms)))
    return [(set(es), atoms) for es, atoms in sorted(rings.items(), key=lambda kv: kv[1])]


# donor role per aromatic atom: must / may / never take the ring double bond
_REQUIRED, _FLEXIBLE, _DONOR = 0, 1, 2


def _sigma_sum(g: MolGraph) -> list[int]:
    """Bond order sum with every aromatic bond counted once, plus explicit H."""
    sums = [a.hcount or 0 for a in g.atoms]
    for a, b, o in g.bonds:
        o = BOND_SINGLE if o == BOND_AROMATIC else o
        sums[a] += o
        sums[b] += o
    return sums


def _aromatic_role(atom, sigma: int) -> int:
    """Role from element class and valence headroom: carbons must take a
    double bond, O/S donate their lone pair, nitrogen-family atoms may do
    either, and any atom without room for one more bond order is a donor
    (this is what makes [nH] and exocyclic-substituted n pyrrole-type)."""
    feasible = sigma + 1 <= max(allowed_valences(atom.element, atom.charge))
    if atom.element in ("O", "S"):
        return _DONOR
    if atom.element in ("N", "P"):
        if atom.charge > 0:
            return _REQUIRED  # pyridinium-type nitrogen
        return _FLEXIBLE if feasible else _DONOR
    return _REQUIRED  # aromatic carbon / boron


class _KekSearch:
    """Backtracking search for a saturating matching with per-ring 4n+2 counts."""

    NODE_CAP = 200_000

    def __init__(self, atoms, adj, roles, rings):
        self.atoms = atoms  # local vertex ids 0..m-1
        self.adj = adj  # local adjacency: vertex -> [(vertex, edge_id)]
        self.roles = roles
        self.rings = rings  # [(edge_id set, atom tuple)] in local ids
        self.match: list[int] = [-1] * len(atoms)  # partner vertex or -1
        self.matched_edges: set[int] = set()
        self.nodes = 0

    def _rings_ok(self) -> bool:
        for edge_set, ring_atoms_ in self.rings:
            doubles = len(edge_set & self.matched_edges)
            lone_pairs = sum(
                1
                for a in ring_atoms_
                if self.roles[a] == _DONOR
                or (self.roles[a] == _FLEXIBLE and self.match[a] == -1)
            )
            if (2 * doubles + 2 * lone_pairs) % 4 != 2:
                return False
        return True

    def _free_required(self) -> Optional[int]:
        best, best_deg = None, None
        for v in self.atoms:
            if self.roles[v] == _REQUIRED and self.match[v] == -1:
                deg = sum(
                    1
                    for u, _ in self.adj[v]
                    if self.match[u] == -1 and self.roles[u] != _DONOR
                )
                if deg == 0:
                    return v  # dead end, fail fast
                if best_deg is None or deg < best_deg:
                    best, best_deg = v, deg
        return best

    def _optional_edges(self) -> list[tuple[int, int, int]]:
        out = []
        for v in self.atoms:
            if self.roles[v] != _FLEXIBLE or self.match[v] != -1:
                continue
            for u, ei in self.adj[v]:
                if u > v and self.roles[u] == _FLEXIBLE and self.match[u] == -1:
                    out.append((v, u, ei))
        return out

    def search(self) -> bool:
        self.nodes += 1
        if self.nodes > self.NODE_CAP:
            return False
        v = self._free_required()
        if v is None:
            return self._extend_optional(self._optional_edges(), 0)
        for u, ei in sorted(self.adj[v]):
            if self.match[u] != -1 or self.roles[u] == _DONOR:
                continue
            self.match[v], self.match[u] = u, v
            self.matched_edges.add(ei)
            if self.search():
                return True
            self.match[v] = self.match[u] = -1
            self.matched_edges.discard(ei)
        return False

    def _extend_optional(self, edges, i) -> bool:
        self.nodes += 1
        if self.nodes > self.NODE_CAP:
            return False
        if i == len(edges):
            return self._rings_ok()
        v, u, ei = edges[i]
        if self._extend_optional(edges, i + 1):
            return True
        if self.match[v] == -1 and self.match[u] == -1:
            self.match[v], self.match[u] = u, v
            self.matched_edges.add(ei)
            if self._extend_optional(edges, i + 1):
                return True
            self.match[v] = self.match[u] = -1
            self.matched_edges.discard(ei)
        return False


def _greedy_cover(atoms, adj, roles) -> list[int]:
    """Deterministic maximal matching used to name unsaturable atoms."""
    match = [-1] * len(atoms)
    for v in atoms:
        if roles[v] != _REQUIRED or match[v] != -1:
            continue
        for u, _ in sorted(adj[v]):
            if match[u] == -1 and roles[u] != _DONOR:
                match[v], match[u] = u, v
                break
    return match


def kekulize(g: MolGraph) -> dict[tuple[int, int], int] | KekulizeFailure:
    """Resolve aromatic bonds to single/double orders.

    Returns {(a, b): order} for every aromatic bond (a < b), or a
    KekulizeFailure naming the unsaturable atoms. Aromatic atoms that are not
    on an aromatic-bond cycle are reported as failures outright (callers
    normally run the ring-residency check first).
    """
    arom_atoms = sorted(i for i, at in enumerate(g.atoms) if at.aromatic)
    if not arom_atoms:
        return {}
    resident = _resident_atoms(g)
    stray = [i for i in arom_atoms if i not in resident]
    if stray:
        return KekulizeFailure(tuple(stray))
    return _kekulize_resident(g, resident)


def _resident_atoms(g: MolGraph) -> set[int]:
    """Aromatic atoms incident to a cycle edge of the aromatic subgraph."""
    edges = [
        (a, b) for a, b, o in g.bonds if o == BOND_AROMATIC
    ]
    br = _bridges(len(g.atoms), edges)
    out: set[int] = set()
    for ei, (a, b) in enumerate(edges):
        if ei not in br:
            out.add(a)
            out.add(b)
    return out


def _kekulize_resident(
    g: MolGraph, resident: set[int]
) -> dict[tuple[int, int], int] | KekulizeFailure:
    edges_all = [
        (min(a, b), max(a, b)) for a, b, o in g.bonds if o == BOND_AROMATIC
    ]
    edges = [
        (a, b) for a, b in edges_all if a in resident and b in resident
    ]
    atoms = sorted(resident)
    local = {a: i for i, a in enumerate(atoms)}
    adj: list[list[tuple[int, int]]] = [[] for _ in atoms]
    for ei, (a, b) in enumerate(edges):
        adj[local[a]].append((local[b], ei))
        adj[local[b]].append((local[a], ei))
    sigma = _sigma_sum(g)
    roles = [_aromatic_role(g.atoms[a], sigma[a]) for a in atoms]
    # a required atom with no valence headroom can never be saturated
    blocked = tuple(
        sorted(
            a
            for v, a in enumerate(atoms)
            if roles[v] == _REQUIRED
            and sigma[a] + 1 > max(allowed_valences(g.atoms[a].element, g.atoms[a].charge))
        )
    )
    if blocked:
        return KekulizeFailure(blocked)

    br = _bridges(len(atoms), [(local[a], local[b]) for a, b in edges])
    cycle_ids = [ei for ei in range(len(edges)) if ei not in br]
    rings = _smallest_rings(
        len(atoms), [(local[a], local[b]) for a, b in edges], cycle_ids
    )

    s = _KekSearch(list(range(len(atoms))), adj, roles, rings)
    if s.search():
        assignment = {}
        for a, b in edges_all:
            assignment[(a, b)] = BOND_SINGLE
        for ei in s.matched_edges:
            assignment[edges[ei]] = BOND_DOUBLE
        return assignment
    cover = _greedy_cover(list(range(len(atoms))), adj, roles)
    uncovered = [atoms[v] for v in range(len(atoms)) if roles[v] == _REQUIRED and cover[v] == -1]
    if uncovered:
        return KekulizeFailure(tuple(sorted(uncovered)))
    # coverable but no matching satisfies the ring counts: name the ring atoms
    bad: set[int] = set()
    s2 = _KekSearch(list(range(len(atoms))), adj, roles, [])
    s2.search()
    for edge_set, ring_atoms_ in rings:
        doubles = len(edge_set & s2.matched_edges)
        lone = sum(
            1
            for a in ring_atoms_
            if roles[a] == _DONOR or (roles[a] == _FLEXIBLE and s2.match[a] == -1)
        )
        if (2 * doubles + 2 * lone) % 4 != 2:
            bad.update(atoms[a] for a in ring_atoms_)
    if not bad:
        bad.update(atoms[v] for v in range(len(atoms)) if roles[v] == _REQUIRED)
    return KekulizeFailure(tuple(sorted(bad)))


def hydrogen_counts(g: MolGraph) -> list[int]:
    """Effective hydrogen count per atom (explicit if set, else filled up to
    the smallest allowed valence). Aromatic orders resolve through the
    kekulized assignment when one exists, otherwise count as single."""
    assignment = kekulize(g)
    if isinstance(assignment, KekulizeFailure):
        assignment = {}
    sums = _order_sums(g, assignment)
    out = []
    for i, a in enumerate(g.atoms):
        if a.hcount is not None:
            out.append(a.hcount)
            continue
        allowed = allowed_valences(a.element, a.charge)
        fill = [v for v in allowed if v >= sums[i]]
        out.append((min(fill) - sums[i]) if fill else 0)
    return out


def _order_sums(g: MolGraph, assignment: dict[tuple[int, int], int]) -> list[int]:
    sums = [0] * len(g.atoms)
    for a, b, o in g.bonds:
        if o == BOND_AROMATIC:
            o = assignment.get((min(a, b), max(a, b)), BOND_SINGLE)
        sums[a] += o
        sums[b] += o
    return sums


def detect_problems(g: MolGraph) -> Diagnostics:
    """Run all diagnostics; one problem per offending atom, ordered by
    (category, atom index)."""
    problems: list[ChemProblem] = []

    resident = _resident_atoms(g)
    stray = [i for i, a in enumerate(g.atoms) if a.aromatic and i not in resident]
    for i in stray:
        problems.append(
            ChemProblem(
                Category.AromaticAtomNotInRing,
                i,
                f"aromatic atom {i} is not in an aromatic ring",
            )
        )

    kek = _kekulize_resident(g, resident) if resident else {}
    if isinstance(kek, KekulizeFailure):
        for i in kek.atoms:
            problems.append(
                ChemProblem(
                    Category.KekulizationFailure,
                    i,
                    f"atom {i} cannot be kekulized",
                )
            )
        assignment: dict[tuple[int, int], int] = {}
    else:
        assignment = kek

    sums = _order_sums(g, assignment)
    for i, a in enumerate(g.atoms):
        allowed = allowed_valences(a.element, a.charge)
        total = sums[i] + (a.hcount or 0)
        if total > max(allowed):
            problems.append(
                ChemProblem(
                    Category.ValenceExceeded,
                    i,
                    f"atom {i} ({a.element}) has bond order sum {total}, max {max(allowed)}",
                )
            )

    for i, a in enumerate(g.atoms):
        if a.charge != 0 and (a.element, a.charge) not in SUPPORTED_CHARGES:
            problems.append(
                ChemProblem(
                    Category.BadCharge,
                    i,
                    f"charge {a.charge:+d} on {a.element} is not supported",
                )
            )

    problems.sort(key=lambda p: (p.category, -1 if p.atom is None else p.atom))
    return Diagnostics(tuple(problems))
