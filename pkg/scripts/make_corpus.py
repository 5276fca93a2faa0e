#!/usr/bin/env python3
"""Generate a deterministic drug-like SMILES corpus over the MOSES-style
alphabet (C N O S F Cl Br, aromatics c n o s, ring digits, branches, and the
bracket atoms [nH]/[N+]/[O-] family).

Molecules are assembled from ring systems, linkers, and substituents with
per-atom slot bookkeeping, validated with the package's own diagnostics, and
emitted in canonical form. Usage:

    python scripts/make_corpus.py --n 11000 --seed 7 --out data/corpus_11k.smi
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from swaprl.chemcheck import detect_problems
from swaprl.molparse import (BOND_AROMATIC, BOND_DOUBLE, BOND_SINGLE,
                             BOND_TRIPLE, Atom, MolGraph, canonicalize,
                             parse_smiles)


@dataclass
class Fragment:
    atoms: list[Atom]
    bonds: list[tuple[int, int, int]]
    # (atom index, capacity, becomes [nH] when left unused)
    sites: list[tuple[int, int, bool]]


def _arom(element: str, h: int | None = None, charge: int = 0) -> Atom:
    return Atom(element, aromatic=True, charge=charge, hcount=h)


def _ring(elements: str, n_sites: str) -> Fragment:
    """Aromatic ring from a compact spec: elements like "ccnccc", site string
    of '.' (none), '1' (one slot), 'N' (azole nitrogen, [nH] if unused)."""
    atoms = []
    for e in elements:
        atoms.append(_arom(e.upper()))
    n = len(atoms)
    bonds = [(i, (i + 1) % n, BOND_AROMATIC) for i in range(n)]
    sites = []
    for i, s in enumerate(n_sites):
        if s == "1":
            sites.append((i, 1, False))
        elif s == "N":
            sites.append((i, 1, True))
    return Fragment(atoms, bonds, sites)


def _sat_ring(elements: str, caps: str) -> Fragment:
    atoms = [Atom(e.upper()) for e in elements]
    n = len(atoms)
    bonds = [(i, (i + 1) % n, BOND_SINGLE) for i in range(n)]
    sites = [(i, 1, False) for i, c in enumerate(caps) if c == "1"]
    return Fragment(atoms, bonds, sites)


def _fused(
    elements: str, extra_bonds: list[tuple[int, int]], site_spec: str
) -> Fragment:
    """Fused aromatic bicyclic: a perimeter walk plus explicit cross bonds."""
    atoms = [_arom(e.upper()) for e in elements]
    n = len(atoms)
    bonds = [(i, (i + 1) % n, BOND_AROMATIC) for i in range(n)]
    bonds += [(a, b, BOND_AROMATIC) for a, b in extra_bonds]
    sites = []
    for i, s in enumerate(site_spec):
        if s == "1":
            sites.append((i, 1, False))
        elif s == "N":
            sites.append((i, 1, True))
    return Fragment(atoms, bonds, sites)


AROMATIC_RINGS = [
    (_ring("cccccc", "111111"), 10),  # benzene
    (_ring("nccccc", ".11111"), 6),  # pyridine
    (_ring("ncnccc", ".1.111"), 2),  # pyrimidine
    (_ring("nccncc", ".11.11"), 1),  # pyrazine
    (_ring("nncccc", "..1111"), 1),  # pyridazine
    (_ring("ncccc", "N1111"), 2),  # pyrrole
    (_ring("ncncc", "N1.11"), 2),  # imidazole
    (_ring("nnccc", "N.111"), 1),  # pyrazole
    (_ring("occcc", ".1111"), 1),  # furan
    (_ring("scccc", ".1111"), 2),  # thiophene
    (_ring("ocncc", ".1.11"), 1),  # oxazole
    (_ring("scncc", ".1.11"), 2),  # thiazole
    (_ring("onccc", "..111"), 1),  # isoxazole
]

# perimeter walk plus a cross bond; bridgehead atoms never carry sites
FUSED_RINGS = [
    (_fused("c" * 10, [(0, 5)], ".1111.1111"), 3),  # naphthalene
    (_fused("nccccccccc", [(1, 6)], "..1111.111"), 2),  # quinoline
    (_fused("ccccccccn", [(0, 5)], ".1111.11N"), 3),  # indole
    (_fused("ccccccncn", [(0, 5)], ".1111..1N"), 2),  # benzimidazole
    (_fused("cccccccco", [(0, 5)], ".1111.11."), 1),  # benzofuran
    (_fused("ccccccccs", [(0, 5)], ".1111.11."), 1),  # benzothiophene
    (_fused("ccccccnnc", [(0, 5)], ".1111.N.1"), 1),  # indazole
]

SATURATED_RINGS = [
    (_sat_ring("ccc", "111"), 1),  # cyclopropane
    (_sat_ring("ccccc", "11111"), 1),  # cyclopentane
    (_sat_ring("cccccc", "111111"), 2),  # cyclohexane
    (_sat_ring("nccccc", "111111"), 3),  # piperidine
    (_sat_ring("nccncc", "1..1.."), 3),  # piperazine
    (_sat_ring("nccocc", "1....."), 2),  # morpholine
    (_sat_ring("ncccc", "11111"), 2),  # pyrrolidine
    (_sat_ring("occcc", ".1111"), 1),  # tetrahydrofuran
]


def _chain(spec: list[tuple[str, int, list[tuple[int, int]]]], end0: int, end1: int):
    """Linker from (element, charge, extra double-bond partners) atom specs."""
    atoms = []
    bonds = []
    for element, charge, doubles in spec:
        atoms.append(Atom(element, charge=charge, hcount=0 if charge else None))
        for j, order in doubles:
            bonds.append((len(atoms) - 1, j, order))
    return atoms, bonds, end0, end1


LINKERS = [
    (None, 4),  # direct single bond
    (_chain([("C", 0, [])], 0, 0), 3),  # methylene
    (_chain([("C", 0, []), ("C", 0, [(0, BOND_SINGLE)])], 0, 1), 2),
    (_chain([("O", 0, [])], 0, 0), 3),  # ether
    (_chain([("N", 0, [])], 0, 0), 2),  # amine
    (_chain([("C", 0, []), ("O", 0, [(0, BOND_DOUBLE)])], 0, 0), 2),  # carbonyl
    (
        _chain([("C", 0, []), ("O", 0, [(0, BOND_DOUBLE)]), ("N", 0, [(0, BOND_SINGLE)])], 0, 2),
        4,
    ),  # amide
    (
        _chain([("C", 0, []), ("O", 0, [(0, BOND_DOUBLE)]), ("O", 0, [(0, BOND_SINGLE)])], 0, 2),
        2,
    ),  # ester
    (
        _chain(
            [("S", 0, []), ("O", 0, [(0, BOND_DOUBLE)]), ("O", 0, [(0, BOND_DOUBLE)]),
             ("N", 0, [(0, BOND_SINGLE)])],
            0,
            3,
        ),
        2,
    ),  # sulfonamide
    (
        _chain([("C", 0, []), ("C", 0, [(0, BOND_DOUBLE)])], 0, 1),
        1,
    ),  # vinylene
]


def _subst(smiles_atoms, bonds, root) -> tuple[list[Atom], list, int]:
    return smiles_atoms, bonds, root


SUBSTITUENTS = [
    ((_subst([Atom("F")], [], 0)), 6),
    ((_subst([Atom("Cl")], [], 0)), 5),
    ((_subst([Atom("Br")], [], 0)), 2),
    ((_subst([Atom("C")], [], 0)), 10),  # methyl
    ((_subst([Atom("C"), Atom("C")], [(0, 1, BOND_SINGLE)], 0)), 3),  # ethyl
    ((_subst([Atom("O")], [], 0)), 4),  # hydroxyl
    ((_subst([Atom("O"), Atom("C")], [(0, 1, BOND_SINGLE)], 0)), 5),  # methoxy
    ((_subst([Atom("N")], [], 0)), 3),  # amino
    (
        (_subst([Atom("N"), Atom("C"), Atom("C")],
                [(0, 1, BOND_SINGLE), (0, 2, BOND_SINGLE)], 0)),
        2,
    ),  # dimethylamino
    ((_subst([Atom("C"), Atom("N")], [(0, 1, BOND_TRIPLE)], 0)), 3),  # nitrile
    (
        (_subst([Atom("C"), Atom("F"), Atom("F"), Atom("F")],
                [(0, 1, BOND_SINGLE), (0, 2, BOND_SINGLE), (0, 3, BOND_SINGLE)], 0)),
        3,
    ),  # trifluoromethyl
    (
        (_subst([Atom("N", charge=1, hcount=0), Atom("O"), Atom("O", charge=-1, hcount=0)],
                [(0, 1, BOND_DOUBLE), (0, 2, BOND_SINGLE)], 0)),
        2,
    ),  # nitro
    (
        (_subst([Atom("C"), Atom("O"), Atom("O")],
                [(0, 1, BOND_DOUBLE), (0, 2, BOND_SINGLE)], 0)),
        2,
    ),  # carboxyl
    (
        (_subst([Atom("C"), Atom("O"), Atom("C")],
                [(0, 1, BOND_DOUBLE), (0, 2, BOND_SINGLE)], 0)),
        2,
    ),  # acetyl
]


class Builder:
    def __init__(self):
        self.atoms: list[Atom] = []
        self.bonds: list[tuple[int, int, int]] = []
        self.sites: list[tuple[int, bool]] = []  # (atom, nH-if-unused)

    def add_fragment(self, frag: Fragment) -> list[int]:
        base = len(self.atoms)
        self.atoms.extend(frag.atoms)
        self.bonds.extend((a + base, b + base, o) for a, b, o in frag.bonds)
        for atom, cap, fill in frag.sites:
            for _ in range(cap):
                self.sites.append((atom + base, fill))
        return list(range(base, len(self.atoms)))

    def add_atoms(self, atoms, bonds) -> int:
        base = len(self.atoms)
        self.atoms.extend(atoms)
        self.bonds.extend((a + base, b + base, o) for a, b, o in bonds)
        return base

    def take_site(self, rng: np.random.Generator) -> tuple[int, bool] | None:
        if not self.sites:
            return None
        k = int(rng.integers(len(self.sites)))
        return self.sites.pop(k)

    def finalize(self) -> MolGraph:
        atoms = list(self.atoms)
        for a, fill in self.sites:
            if fill:
                atoms[a] = replace(atoms[a], hcount=1)
        return MolGraph(atoms, list(self.bonds))


def _weighted(rng: np.random.Generator, table):
    weights = np.array([w for _, w in table], dtype=float)
    k = int(rng.choice(len(table), p=weights / weights.sum()))
    return table[k][0]


def build_molecule(rng: np.random.Generator) -> MolGraph:
    b = Builder()
    n_rings = int(rng.choice([1, 2, 3], p=[0.25, 0.50, 0.25]))
    ring_pool = AROMATIC_RINGS + FUSED_RINGS + SATURATED_RINGS
    for r in range(n_rings):
        frag = _weighted(rng, ring_pool)
        mark = (len(b.atoms), len(b.bonds), len(b.sites))
        ids = set(b.add_fragment(frag))
        if r > 0:
            old_idx = [k for k, s in enumerate(b.sites) if s[0] not in ids]
            new_idx = [k for k, s in enumerate(b.sites) if s[0] in ids]
            if not old_idx or not new_idx:
                # cannot connect; drop the fragment
                b.atoms = b.atoms[: mark[0]]
                b.bonds = b.bonds[: mark[1]]
                b.sites = b.sites[: mark[2]]
                continue
            ka = old_idx[int(rng.integers(len(old_idx)))]
            kb = new_idx[int(rng.integers(len(new_idx)))]
            anchor = b.sites[ka]
            other = b.sites[kb]
            for k in sorted((ka, kb), reverse=True):
                del b.sites[k]
            linker = _weighted(rng, LINKERS)
            if linker is None:
                b.bonds.append((anchor[0], other[0], BOND_SINGLE))
            else:
                atoms, bonds, e0, e1 = linker
                base = b.add_atoms(atoms, bonds)
                b.bonds.append((anchor[0], base + e0, BOND_SINGLE))
                b.bonds.append((other[0], base + e1, BOND_SINGLE))
    n_subst = int(rng.integers(0, 5))
    for _ in range(n_subst):
        site = b.take_site(rng)
        if site is None:
            break
        atoms, bonds, root = _weighted(rng, SUBSTITUENTS)
        base = b.add_atoms(atoms, bonds)
        b.bonds.append((site[0], base + root, BOND_SINGLE))
    return b.finalize()


def generate(n: int, seed: int) -> list[str]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    seen: set[str] = set()
    out: list[str] = []
    rejected = 0
    while len(out) < n:
        g = build_molecule(rng)
        if detect_problems(g).count != 0:
            rejected += 1
            continue
        smi = canonicalize(g)
        if smi in seen:
            continue
        from swaprl.vocab import lex_smiles

        if len(lex_smiles(smi)) > 58:  # must fit BOS + tokens + EOS in 60
            continue
        check = parse_smiles(smi)
        assert isinstance(check, MolGraph), smi
        assert detect_problems(check).count == 0, smi
        seen.add(smi)
        out.append(smi)
    if rejected:
        print(f"note: {rejected} assemblies rejected by diagnostics", file=sys.stderr)
    return out


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=11000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    lines = generate(args.n, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    lengths = [len(l) for l in lines]
    print(f"{len(lines)} molecules -> {args.out}")
    print(f"char length mean {np.mean(lengths):.1f} min {min(lengths)} max {max(lengths)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
