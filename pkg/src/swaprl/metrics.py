"""Evaluation metrics: validity/novelty/uniqueness over canonical forms,
circular fingerprints with nearest-neighbor diversity, ring-system scaffolds,
token-repair statistics, peak reward, throughput, and a two-proportion test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chemcheck import detect_problems, hydrogen_counts, ring_atoms
from .molparse import MolGraph, canonicalize, parse_smiles
from .swap_reward import Path as RewardPath
from .swap_reward import RewardBreakdown
from .vocab import TokenizeError, lex_smiles

FP_BITS = 2048
_FP_WORDS = FP_BITS // 64


@dataclass(frozen=True)
class Fingerprint:
    packed: tuple[int, ...]  # 32 x 64-bit words

    def bits(self) -> set[int]:
        out = set()
        for w, word in enumerate(self.packed):
            b = 0
            while word:
                if word & 1:
                    out.add(64 * w + b)
                word >>= 1
                b += 1
        return out

    def popcount(self) -> int:
        return sum(bin(w).count("1") for w in self.packed)


def _fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _mix(*vals) -> int:
    return _fnv1a("|".join(str(v) for v in vals).encode("ascii"))


def fingerprint(g: MolGraph) -> Fingerprint:
    """Circular substructure hashing: per-atom invariants refined for two
    rounds over sorted neighbor identifiers, every (atom, radius) identifier
    folded into 2048 bits."""
    adj = g.neighbors()
    hs = hydrogen_counts(g)
    ids = [
        _mix(a.element, len(adj[i]), a.charge, int(a.aromatic), hs[i])
        for i, a in enumerate(g.atoms)
    ]
    words = [0] * _FP_WORDS
    for i in ids:
        bit = i % FP_BITS
        words[bit // 64] |= 1 << (bit % 64)
    for _round in range(2):
        nxt = []
        for i in range(len(g.atoms)):
            nbr = sorted((order, ids[j]) for j, order in adj[i])
            nxt.append(_mix(ids[i], *[f"{o}:{h}" for o, h in nbr]))
        ids = nxt
        for i in ids:
            bit = i % FP_BITS
            words[bit // 64] |= 1 << (bit % 64)
    return Fingerprint(tuple(words))


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    inter = sum(bin(x & y).count("1") for x, y in zip(a.packed, b.packed))
    union = sum(bin(x | y).count("1") for x, y in zip(a.packed, b.packed))
    if union == 0:
        return 1.0
    return inter / union


def _pack_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    return np.array([fp.packed for fp in fps], dtype=np.uint64)


def nn_diversity(fps: Sequence[Fingerprint]) -> float:
    """Mean over molecules of (1 - Tanimoto similarity to the most similar
    other molecule)."""
    n = len(fps)
    if n < 2:
        raise ValueError("nn_diversity needs at least two molecules")
    mat = _pack_matrix(fps)
    pops = np.bitwise_count(mat).sum(axis=1).astype(np.int64)
    total = 0.0
    for i in range(n):
        inter = np.bitwise_count(mat & mat[i]).sum(axis=1).astype(np.int64)
        union = pops + pops[i] - inter
        sim = np.divide(inter, union, out=np.ones(n), where=union > 0)
        sim[i] = -1.0
        total += 1.0 - float(sim.max())
    return total / n


def murcko_scaffold(g: MolGraph) -> MolGraph:
    """Iteratively delete terminal atoms outside every ring; what remains is
    the ring systems plus their linkers (possibly an empty graph)."""
    in_ring = ring_atoms(g)
    alive = set(range(len(g.atoms)))
    adj = g.neighbors()
    degree = {i: len(adj[i]) for i in alive}
    changed = True
    while changed:
        changed = False
        for i in sorted(alive):
            if i not in in_ring and degree[i] <= 1:
                alive.discard(i)
                for j, _ in adj[i]:
                    if j in alive:
                        degree[j] -= 1
                degree[i] = 0
                changed = True
    mapping = {old: new for new, old in enumerate(sorted(alive))}
    atoms = [g.atoms[old] for old in sorted(alive)]
    bonds = [
        (mapping[a], mapping[b], o)
        for a, b, o in g.bonds
        if a in alive and b in alive
    ]
    return MolGraph(atoms, bonds)


def scaffold_stats(
    generated: Sequence[MolGraph], reference: Sequence[MolGraph]
) -> tuple[int, float, bool]:
    """(unique scaffold count, mean max scaffold Tanimoto to the reference
    scaffolds, defined flag). Acyclic molecules contribute no scaffold."""
    if not generated or not reference:
        raise ValueError("scaffold_stats needs non-empty molecule sets")
    gen_scaffolds: dict[str, MolGraph] = {}
    for g in generated:
        s = murcko_scaffold(g)
        if s.atoms:
            gen_scaffolds.setdefault(canonicalize(s), s)
    ref_scaffolds: dict[str, MolGraph] = {}
    for g in reference:
        s = murcko_scaffold(g)
        if s.atoms:
            ref_scaffolds.setdefault(canonicalize(s), s)
    count = len(gen_scaffolds)
    if not gen_scaffolds or not ref_scaffolds:
        return count, 0.0, False
    ref = _pack_matrix([fingerprint(s) for s in ref_scaffolds.values()])
    ref_pops = np.bitwise_count(ref).sum(axis=1).astype(np.int64)
    total = 0.0
    for s in gen_scaffolds.values():
        fp = np.array(fingerprint(s).packed, dtype=np.uint64)
        inter = np.bitwise_count(ref & fp).sum(axis=1).astype(np.int64)
        union = ref_pops + int(np.bitwise_count(fp).sum()) - inter
        sim = np.divide(inter, union, out=np.ones(len(ref)), where=union > 0)
        total += float(sim.max())
    return count, total / len(gen_scaffolds), True


@dataclass
class MetricsReport:
    n_gen: int
    n_syntactic_valid: int
    n_chem_valid: int
    n_novel: int
    n_novel_syntactic: int
    n_unique: int
    validity: float
    chem_validity: float
    novelty: float
    novelty_syntactic: float
    novelty_defined: bool
    uniqueness: float
    mean_length: float
    nn_diversity: Optional[float] = None
    scaffold_count: Optional[int] = None
    scaffold_similarity: Optional[float] = None
    swap_count: Optional[float] = None
    fix_rate: Optional[float] = None
    chem_err_mean: Optional[float] = None

    def check_counts(self) -> None:
        ok = (
            self.n_novel
            <= self.n_chem_valid
            <= self.n_syntactic_valid
            <= self.n_gen
        )
        if not ok:
            raise AssertionError("count chain violated")


def evaluate(
    generated: Sequence[str],
    train_canonical: set[str],
    with_diversity: bool = True,
) -> MetricsReport:
    """Molecule-set metrics over generated SMILES lines against a
    pre-canonicalized training set."""
    if not generated:
        raise ValueError("empty generation set")
    n_gen = len(generated)
    n_syn = 0
    length_sum = 0
    chem_graphs: list[MolGraph] = []
    chem_canon: list[str] = []
    syn_canon: list[str] = []
    for line in generated:
        line = line.strip()
        try:
            toks = lex_smiles(line)
        except TokenizeError:
            length_sum += len(line)
            continue
        length_sum += len(toks)
        if not line:
            continue
        g = parse_smiles(line)
        if not isinstance(g, MolGraph) or not g.atoms:
            continue
        n_syn += 1
        c = canonicalize(g)
        syn_canon.append(c)
        if detect_problems(g).count == 0:
            chem_graphs.append(g)
            chem_canon.append(c)

    n_chem = len(chem_graphs)
    n_novel = sum(1 for c in chem_canon if c not in train_canonical)
    n_novel_syn = sum(1 for c in syn_canon if c not in train_canonical)
    n_unique = len(set(chem_canon))
    novelty_defined = n_chem > 0
    report = MetricsReport(
        n_gen=n_gen,
        n_syntactic_valid=n_syn,
        n_chem_valid=n_chem,
        n_novel=n_novel,
        n_novel_syntactic=n_novel_syn,
        n_unique=n_unique,
        validity=n_syn / n_gen,
        chem_validity=n_chem / n_gen,
        novelty=(n_novel / n_chem) if n_chem else 0.0,
        novelty_syntactic=(n_novel_syn / n_syn) if n_syn else 0.0,
        novelty_defined=novelty_defined,
        uniqueness=(n_unique / n_chem) if n_chem else 0.0,
        mean_length=length_sum / n_gen,
    )
    if with_diversity and n_chem >= 2:
        fps = [fingerprint(g) for g in chem_graphs]
        report.nn_diversity = nn_diversity(fps)
    report.check_counts()
    return report


def repair_stats(
    breakdowns: Sequence[RewardBreakdown],
) -> tuple[float, float, float]:
    """(mean accepted substitutions, repaired fraction, mean initial problem
    count). Sequences that never parsed contribute zero problems."""
    if not breakdowns:
        raise ValueError("no reward breakdowns")
    n = len(breakdowns)
    swap_count = sum(b.n_accepted for b in breakdowns) / n
    fix_rate = sum(1 for b in breakdowns if b.path is RewardPath.RepairedFromInvalid) / n
    chem_err_mean = sum(b.e0 for b in breakdowns) / n
    return swap_count, fix_rate, chem_err_mean


def peak_reward(discounted_returns: Sequence[float]) -> float:
    if not discounted_returns:
        raise ValueError("no episodes")
    return max(discounted_returns)


def throughput(n_updates: int, batch: int, mean_length: float, seconds: float) -> float:
    """Tokens processed per second: n_updates * batch * mean_length / seconds."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    return n_updates * batch * mean_length / seconds


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, bool]:
    """Pooled two-proportion z-test at the 95% level."""
    if n1 <= 0 or n2 <= 0:
        raise ValueError("zero denominator")
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    z = 0.0 if var == 0.0 else (p1 - p2) / math.sqrt(var)
    return z, abs(z) > 1.96


def format_report(report: MetricsReport) -> str:
    """"key = value" lines; fractions carry six decimals."""
    lines = []

    def frac(name: str, value: Optional[float]) -> None:
        if value is not None:
            lines.append(f"{name} = {value:.6f}")

    lines.append(f"n_gen = {report.n_gen}")
    lines.append(f"n_syntactic_valid = {report.n_syntactic_valid}")
    lines.append(f"n_chem_valid = {report.n_chem_valid}")
    lines.append(f"n_novel = {report.n_novel}")
    lines.append(f"n_novel_syntactic = {report.n_novel_syntactic}")
    lines.append(f"n_unique = {report.n_unique}")
    frac("validity", report.validity)
    frac("chem_validity", report.chem_validity)
    frac("novelty", report.novelty)
    frac("novelty_syntactic", report.novelty_syntactic)
    lines.append(f"novelty_defined = {int(report.novelty_defined)}")
    frac("uniqueness", report.uniqueness)
    frac("mean_length", report.mean_length)
    frac("nn_diversity", report.nn_diversity)
    if report.scaffold_count is not None:
        lines.append(f"scaffold_count = {report.scaffold_count}")
    frac("scaffold_similarity", report.scaffold_similarity)
    frac("swap_count", report.swap_count)
    frac("fix_rate", report.fix_rate)
    frac("chem_err_mean", report.chem_err_mean)
    return "\n".join(lines) + "\n"
