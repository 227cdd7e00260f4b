"""Correct squares, commuting systems of algebras over an almost-lattice,
system generators and direct limits."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product
from math import prod

import numpy as np

from . import catalog
from .balg import AtomMap, FiniteBA, compose, identity
from .order import (
    AlmostLattice,
    PreconditionError,
    Violation,
    grid_coordinates,
    grid_index_set,
    poset_from_json,
    three_element,
)


class NonCommutingSquare(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingSquare:
    """``bottom <o left, right <o top`` stored as four atom surjections."""

    bottom: FiniteBA
    left: FiniteBA
    right: FiniteBA
    top: FiniteBA
    left_to_bottom: AtomMap
    right_to_bottom: AtomMap
    top_to_left: AtomMap
    top_to_right: AtomMap

    def commutes(self) -> bool:
        return compose(self.left_to_bottom, self.top_to_left) == compose(self.right_to_bottom, self.top_to_right)

    @classmethod
    def from_partitions(cls, n, left_blocks, right_blocks, bottom_blocks):
        """Square on top atoms ``t0..t{n-1}`` whose sides are given as partitions of them."""
        top = FiniteBA([f"t{k}" for k in range(n)])

        def side(blocks, name):
            alg = FiniteBA([f"{name}{k}" for k in range(len(blocks))])
            owner = {x: f"{name}{k}" for k, block in enumerate(blocks) for x in block}
            return alg, owner

        left, lo = side(left_blocks, "l")
        right, ro = side(right_blocks, "r")
        bottom, bo = side(bottom_blocks, "b")
        return cls(
            bottom,
            left,
            right,
            top,
            AtomMap(left, bottom, {lo[block[0]]: bo[block[0]] for block in left_blocks}),
            AtomMap(right, bottom, {ro[block[0]]: bo[block[0]] for block in right_blocks}),
            AtomMap(top, left, {f"t{x}": lo[x] for x in range(n)}),
            AtomMap(top, right, {f"t{x}": ro[x] for x in range(n)}),
        )


@dataclass
class CorrectnessReport:
    conditions: tuple  # (left formula, right formula, compatibility)
    witnesses: dict

    @property
    def agree(self) -> bool:
        return len(set(self.conditions)) == 1

    @property
    def correct(self) -> bool:
        if not self.agree:
            raise AssertionError(f"correctness conditions disagree: {self.conditions} {self.witnesses}")
        return self.conditions[0]


def _side_formula(sq: EmbeddingSquare, side: str):
    """First element where h^top_other(a) != h^side_bottom(a), or None."""
    if side == "left":
        to_side, to_other, side_down, other_down = sq.top_to_left, sq.top_to_right, sq.left_to_bottom, sq.right_to_bottom
        alg = sq.left
    else:
        to_side, to_other, side_down, other_down = sq.top_to_right, sq.top_to_left, sq.right_to_bottom, sq.left_to_bottom
        alg = sq.right
    a = np.arange(alg.full + 1, dtype=np.int64)
    through_top = to_other.project_masks(to_side.embed_masks(a))
    through_bottom = other_down.embed_masks(side_down.project_masks(a))
    bad = np.flatnonzero(through_top != through_bottom)
    if len(bad):
        return list(alg.atom_ids(int(bad[0])))
    return None


def _compatibility(sq: EmbeddingSquare):
    """First pair (a0, a1) with equal bottom projections that is incompatible at the top."""
    a0 = np.arange(1, sq.left.full + 1, dtype=np.int64)
    a1 = np.arange(1, sq.right.full + 1, dtype=np.int64)
    b0, b1 = sq.left_to_bottom.project_masks(a0), sq.right_to_bottom.project_masks(a1)
    e0, e1 = sq.top_to_left.embed_masks(a0), sq.top_to_right.embed_masks(a1)
    for b in np.unique(b0):
        x = np.flatnonzero(b0 == b)
        y = np.flatnonzero(b1 == b)
        if not len(y):
            continue
        meet = e0[x][:, None] & e1[y][None, :]
        bad = np.argwhere(meet == 0)
        if len(bad):
            k, m = bad[0]
            return [list(sq.left.atom_ids(int(a0[x[k]]))), list(sq.right.atom_ids(int(a1[y[m]])))]
    return None


def check_correct(sq: EmbeddingSquare) -> CorrectnessReport:
    """Evaluate the three equivalent correctness conditions independently."""
    if not sq.commutes():
        raise NonCommutingSquare("the two paths bottom -> top differ")
    found = {
        "left": _side_formula(sq, "left"),
        "right": _side_formula(sq, "right"),
        "compatibility": _compatibility(sq),
    }
    conditions = tuple(found[k] is None for k in ("left", "right", "compatibility"))
    return CorrectnessReport(conditions, {k: v for k, v in found.items() if v is not None})


def bottom_is_intersection(sq: EmbeddingSquare) -> bool:
    """Whether the embedded bottom is exactly the intersection of the embedded sides."""
    left = set(sq.top_to_left.embed_masks(np.arange(sq.left.full + 1)).tolist())
    right = set(sq.top_to_right.embed_masks(np.arange(sq.right.full + 1)).tolist())
    down = compose(sq.left_to_bottom, sq.top_to_left)
    bottom = set(down.embed_masks(np.arange(sq.bottom.full + 1)).tolist())
    return left & right == bottom


def squares_up_to(max_atoms: int):
    """Every commuting square whose four algebras have at most ``max_atoms`` atoms.

    Squares are enumerated up to relabelling: the top's atom set is fixed and each
    side is a partition of it, the bottom a common coarsening of both sides.
    """
    for n in range(1, max_atoms + 1):
        parts = list(catalog.set_partitions(range(n)))
        for left in parts:
            for right in parts:
                for bottom in parts:
                    if catalog.coarsens(bottom, left) and catalog.coarsens(bottom, right):
                        yield EmbeddingSquare.from_partitions(n, left, right, bottom)


def random_square(rng: random.Random, max_top: int = 8) -> EmbeddingSquare:
    n = rng.randint(1, max_top)

    def rand_partition(items, k):
        labels = [rng.randrange(k) for _ in items]
        groups = {}
        for x, lab in zip(items, labels):
            groups.setdefault(lab, []).append(x)
        return tuple(tuple(g) for g in groups.values())

    left = rand_partition(range(n), rng.randint(1, n))
    right = rand_partition(range(n), rng.randint(1, n))
    # bottom: random coarsening of the join of left and right in the partition lattice
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for block in left + right:
        for x in block[1:]:
            parent[find(x)] = find(block[0])
    joined = {}
    for x in range(n):
        joined.setdefault(find(x), []).append(x)
    blocks = list(joined.values())
    merged = rand_partition(range(len(blocks)), rng.randint(1, len(blocks)))
    bottom = tuple(tuple(x for b in group for x in blocks[b]) for group in merged)
    return EmbeddingSquare.from_partitions(n, left, right, bottom)


# ---------------------------------------------------------------------------
# systems


class BASystem:
    """Algebras indexed by an almost-lattice with an atom map ``A_j -> A_i`` for each i <= j.

    Maps missing from the input are filled in by composing along chains.
    """

    def __init__(self, index: AlmostLattice, algebras: dict, maps: dict):
        self.index = index
        self.algebras = {i: algebras[i] for i in index.elements}
        self.maps = dict(maps)
        P = index.poset
        for i in index.elements:
            self.maps.setdefault((i, i), identity(self.algebras[i]))
        pending = sorted(
            ((i, j) for i, j in P.strict_pairs() if (i, j) not in self.maps),
            key=lambda ij: (len(P.up(ij[0]) & P.down(ij[1])), ij),
        )
        for i, j in pending:
            for k in sorted(P.up(i) & P.down(j)):
                if k not in (i, j) and (i, k) in self.maps and (k, j) in self.maps:
                    self.maps[i, j] = compose(self.maps[i, k], self.maps[k, j])
                    break

    def map(self, i, j) -> AtomMap:
        """The atom map ``A_j -> A_i`` (i <= j), dual to ``A_i <o A_j``."""
        return self.maps[i, j]

    def algebra(self, i) -> FiniteBA:
        return self.algebras[i]

    def square(self, i, j) -> EmbeddingSquare:
        m, t = self.index.meet(i, j), self.index.join(i, j)
        if t is None:
            raise PreconditionError(f"{i} and {j} have no join")
        return EmbeddingSquare(
            self.algebras[m],
            self.algebras[i],
            self.algebras[j],
            self.algebras[t],
            self.maps[m, i],
            self.maps[m, j],
            self.maps[i, t],
            self.maps[j, t],
        )

    def join_squares(self):
        els = self.index.elements
        return [
            (i, j)
            for a, i in enumerate(els)
            for j in els[a + 1 :]
            if not self.index.poset.comparable(i, j) and self.index.has_join(i, j)
        ]

    def atom_counts(self):
        return {i: len(A) for i, A in self.algebras.items()}

    def product_size(self):
        return prod(len(A) for A in self.algebras.values())

    def to_json(self):
        maps = {}
        for i, j in self.index.poset.strict_pairs():
            if (i, j) in self.maps:
                maps[f"{i}<{j}"] = self.maps[i, j].mapping
        return {
            "index": self.index.to_json(),
            "algebras": {i: A.to_json() for i, A in self.algebras.items()},
            "maps": maps,
        }

    @classmethod
    def from_json(cls, data, atoms_key="atoms"):
        index = AlmostLattice.from_poset(poset_from_json(data["index"]))
        algebras = {i: FiniteBA(data["algebras"][i][atoms_key]) for i in index.elements}
        maps = {}
        for key, mapping in data.get("maps", {}).items():
            i, j = split_map_key(key, index.elements)
            maps[i, j] = AtomMap(algebras[j], algebras[i], mapping)
        return cls(index, algebras, maps)


def split_map_key(key: str, ids) -> tuple:
    """Split ``"i<j"`` into two known ids (ids may themselves contain '<')."""
    known = set(ids)
    for pos, ch in enumerate(key):
        if ch == "<" and key[:pos] in known and key[pos + 1 :] in known:
            return key[:pos], key[pos + 1 :]
    raise KeyError(f"map key {key!r} does not name two indices")


@dataclass
class SystemReport:
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_json(self):
        return {"valid": self.valid, "violations": [v.to_json() for v in self.violations]}


class _Stop(Exception):
    pass


def validate_system(S: BASystem, fail_fast: bool = True) -> SystemReport:
    """Check identities, surjectivity, commutativity and correctness of every join square.

    Iteration follows sorted ids; with ``fail_fast`` only the first violation is kept.
    """
    report = SystemReport()
    P = S.index.poset
    els = P.elements

    def add(law, *witness):
        report.violations.append(Violation(law, tuple(witness)))
        if fail_fast:
            raise _Stop

    try:
        for i in els:
            if S.maps[i, i] != identity(S.algebras[i]):
                add("identity", i)
        for i, j in P.strict_pairs():
            e = S.maps.get((i, j))
            if e is None:
                add("missing map", i, j)
                continue
            if e.source != S.algebras[j] or e.target != S.algebras[i]:
                add("map endpoints", i, j)
            elif not e.is_surjective():
                add("surjectivity", i, j, *e.missed())
        bad = {(v.witness[0], v.witness[1]) for v in report.violations if len(v.witness) >= 2}
        for i, j, k in product(els, repeat=3):
            if i != j and j != k and P.leq(i, j) and P.leq(j, k):
                if {(i, j), (j, k), (i, k)} & bad:
                    continue
                if S.maps[i, k] != compose(S.maps[i, j], S.maps[j, k]):
                    add("commutativity", i, j, k)
                    bad.add((i, k))
        for i, j in S.join_squares():
            m, t = S.index.meet(i, j), S.index.join(i, j)
            if {(m, i), (m, j), (i, t), (j, t)} & bad:
                continue
            try:
                rep = check_correct(S.square(i, j))
            except NonCommutingSquare:
                add("commutativity", m, i, j, t)
                continue
            if not rep.correct:
                add("correctness", i, j, rep.witnesses)
    except _Stop:
        pass
    return report


# ---------------------------------------------------------------------------
# coordinate-product generator


def _check_assignment(L: AlmostLattice, coords: dict):
    for i in L.elements:
        for j in L.elements:
            if coords[L.meet(i, j)] != coords[i] & coords[j]:
                raise ValueError(f"coords({L.meet(i, j)}) is not coords({i}) & coords({j})")
            t = L.join(i, j)
            if t is not None and coords[t] != coords[i] | coords[j]:
                raise ValueError(f"coords({t}) is not coords({i}) | coords({j})")


def _atom_name(assignment):
    if not assignment:
        return "*"
    return ",".join(f"{c}={v}" for c, v in assignment)


def generate_coordinate_system(L: AlmostLattice, coordinate_assignment: dict, fiber_sizes: dict, seed=None) -> BASystem:
    """Product skeleton: ``A_i`` has one atom per function ``coords(i) -> fibers``.

    Maps restrict functions to the smaller coordinate set.  With a seed the atom
    ids are replaced by shuffled opaque names so nothing downstream can lean on
    their structure.
    """
    coords = {i: frozenset(coordinate_assignment.get(i, ())) for i in L.elements}
    _check_assignment(L, coords)
    for c in set().union(*coords.values()):
        if fiber_sizes[c] < 1:
            raise ValueError(f"fiber of {c} is empty")
    rng = random.Random(seed) if seed is not None else None
    funcs, names = {}, {}
    for i in L.elements:
        cs = sorted(coords[i])
        funcs[i] = [tuple(zip(cs, vals)) for vals in product(*(range(fiber_sizes[c]) for c in cs))]
        if rng is None:
            names[i] = {f: _atom_name(f) for f in funcs[i]}
        else:
            labels = list(range(len(funcs[i])))
            rng.shuffle(labels)
            names[i] = {f: f"{i}:{lab}" for f, lab in zip(funcs[i], labels)}
    algebras = {i: FiniteBA(names[i].values()) for i in L.elements}
    maps = {}
    for i, j in L.poset.strict_pairs():
        keep = coords[i]
        maps[i, j] = AtomMap(
            algebras[j],
            algebras[i],
            {names[j][f]: names[i][tuple((c, v) for c, v in f if c in keep)] for f in funcs[j]},
        )
    return BASystem(L, algebras, maps)


MAX_CATALOGUED = 6


@dataclass
class GeneratedSystem:
    system: BASystem
    coordinates: dict
    fibers: dict


def random_coordinate_system(
    seed: int,
    max_index_size: int = 6,
    max_fiber: int = 3,
    product_budget: int = 10**6,
    max_atoms: int = 8,
    max_coordinates: int = 4,
) -> GeneratedSystem:
    """Draw an almost-lattice from the exhaustive catalogue and a random coordinate skeleton.

    Coordinates are born at join-irreducible indices, which makes the meet/join
    conditions of the product skeleton hold.  Budgets are hard: coordinates are
    dropped until every algebra has at most ``max_atoms`` atoms and the product of
    all atom counts is within ``product_budget``.
    """
    if min(max_index_size, max_fiber, product_budget, max_atoms) < 1:
        raise ValueError("budgets must be positive")
    if max_index_size > MAX_CATALOGUED:
        raise ValueError(f"index sets are catalogued up to {MAX_CATALOGUED} elements")
    rng = random.Random(seed)
    shapes = catalog.almost_lattice_catalogue(max_index_size)
    L = shapes[rng.randrange(len(shapes))]
    births = L.join_irreducibles()
    picks = [(births[rng.randrange(len(births))], rng.randint(1, max_fiber)) for _ in range(rng.randint(0, max_coordinates))]
    while True:
        fibers = {f"c{k}": size for k, (_, size) in enumerate(picks)}
        coords = {i: {f"c{k}" for k, (b, _) in enumerate(picks) if L.leq(b, i)} for i in L.elements}
        sizes = [prod(fibers[c] for c in coords[i]) for i in L.elements]
        if max(sizes) <= max_atoms and prod(sizes) <= product_budget:
            break
        picks.pop()
    system = generate_coordinate_system(L, coords, fibers, seed=rng.randrange(2**31))
    return GeneratedSystem(system, coords, fibers)


def grid_coordinate_system(beta: int, delta: int, fiber: int = 2, seed=None) -> BASystem:
    """Coordinate system on the grid index: (a, g) carries the coordinates a_k (k < a) and g_k (k < g)."""
    L = grid_index_set(beta, delta)
    coords = {}
    for i in L.elements:
        a, g = grid_coordinates(i)
        coords[i] = {f"a{k}" for k in range(a)} | {f"g{k}" for k in range(g)}
    fibers = {c: fiber for c in set().union(*coords.values())}
    return generate_coordinate_system(L, coords, fibers, seed=seed)


def two_factor_system(m: int, n: int) -> BASystem:
    """Two free factors with m and n atoms over the trivial algebra."""
    L = three_element()
    coords = {"0^1": set(), "0": {"x"}, "1": {"y"}}
    return generate_coordinate_system(L, coords, {"x": m, "y": n})


# ---------------------------------------------------------------------------
# restriction and direct limits


def restrict(S: BASystem, K) -> BASystem:
    """The subsystem over a closed subset ``K`` of the index."""
    sub = S.index.sublattice(K)
    return BASystem(
        sub,
        {i: S.algebras[i] for i in sub.elements},
        {(i, j): S.maps[i, j] for i, j in sub.poset.pairs()},
    )


def direct_limit(S: BASystem, K=None):
    """Limit over a finite directed subset: the algebra at its maximum plus the system maps."""
    K = sorted(S.index.elements if K is None else set(K))
    P = S.index.poset
    for a in K:
        for b in K:
            if not any(P.leq(a, c) and P.leq(b, c) for c in K):
                raise PreconditionError(f"{a} and {b} have no upper bound in K")
    top = [k for k in K if all(P.leq(x, k) for x in K)]
    m = top[0]
    return S.algebras[m], {k: S.maps[k, m] for k in K}
