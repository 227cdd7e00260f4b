"""Finite Boolean algebras as atom universes.

A complete embedding of finite algebras ``A_i <o A_j`` is stored dually as a
surjection from the atoms of ``A_j`` onto the atoms of ``A_i``: an element of
``A_i`` embeds as its preimage, and the projection of an element of ``A_j`` is
its image.  Elements are bitmasks over the (sorted) atom list.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

TABLE_LIMIT = 16


class ParentMismatch(ValueError):
    pass


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def bits(mask: int):
    k = 0
    while mask:
        if mask & 1:
            yield k
        mask >>= 1
        k += 1


def submasks(mask: int):
    """All submasks of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class FiniteBA:
    """The powerset algebra of a finite non-empty atom set."""

    def __init__(self, atoms: Iterable[str]):
        atoms = tuple(sorted(set(atoms)))
        if not atoms:
            raise ValueError("a Boolean algebra needs at least one atom")
        self.atoms = atoms
        self.index = {a: k for k, a in enumerate(atoms)}

    def __len__(self):
        return len(self.atoms)

    def __eq__(self, other):
        return isinstance(other, FiniteBA) and self.atoms == other.atoms

    def __hash__(self):
        return hash(self.atoms)

    def __repr__(self):
        return f"FiniteBA({list(self.atoms)})"

    @property
    def full(self) -> int:
        return (1 << len(self.atoms)) - 1

    @property
    def one(self) -> "BAElement":
        return BAElement(self, self.full)

    @property
    def zero(self) -> "BAElement":
        return BAElement(self, 0)

    def element(self, atom_ids: Iterable[str]) -> "BAElement":
        mask = 0
        for a in atom_ids:
            mask |= 1 << self.index[a]
        return BAElement(self, mask)

    def atom(self, a: str) -> "BAElement":
        return self.element([a])

    def elements(self, nonzero=False):
        start = 1 if nonzero else 0
        return [BAElement(self, m) for m in range(start, self.full + 1)]

    def atom_ids(self, mask: int) -> tuple:
        return tuple(self.atoms[k] for k in bits(mask))

    def to_json(self):
        return {"atoms": list(self.atoms)}

    @classmethod
    def from_json(cls, data):
        return cls(data["atoms"])


TRIVIAL_ATOM = "*"


def trivial() -> FiniteBA:
    """The two-element algebra {0, 1}."""
    return FiniteBA([TRIVIAL_ATOM])


@dataclass(frozen=True)
class BAElement:
    parent: FiniteBA
    mask: int

    @property
    def atom_set(self) -> frozenset:
        return frozenset(self.parent.atom_ids(self.mask))

    def _check(self, other):
        if other.parent != self.parent:
            raise ParentMismatch("elements of different algebras")

    def __and__(self, other):
        self._check(other)
        return BAElement(self.parent, self.mask & other.mask)

    def __or__(self, other):
        self._check(other)
        return BAElement(self.parent, self.mask | other.mask)

    def __invert__(self):
        return BAElement(self.parent, self.parent.full & ~self.mask)

    def __le__(self, other):
        self._check(other)
        return self.mask & ~other.mask == 0

    def __ge__(self, other):
        return other <= self

    def __lt__(self, other):
        return self <= other and self.mask != other.mask

    def __bool__(self):
        return self.mask != 0

    def __repr__(self):
        return "{" + ",".join(sorted(self.atom_set)) + "}"

    def to_json(self):
        return sorted(self.atom_set)


class AtomMap:
    """Atom surjection ``source -> target``, dual to the embedding ``target <o source``."""

    def __init__(self, source: FiniteBA, target: FiniteBA, mapping: Mapping[str, str]):
        self.source = source
        self.target = target
        missing = set(source.atoms) - set(mapping)
        if missing:
            raise ValueError(f"atom map undefined on {sorted(missing)}")
        self.table = tuple(target.index[mapping[a]] for a in source.atoms)

    @classmethod
    def from_table(cls, source, target, table) -> "AtomMap":
        self = cls.__new__(cls)
        self.source, self.target, self.table = source, target, tuple(table)
        return self

    @property
    def mapping(self) -> dict:
        return {a: self.target.atoms[t] for a, t in zip(self.source.atoms, self.table)}

    def __call__(self, atom: str) -> str:
        return self.target.atoms[self.table[self.source.index[atom]]]

    def __eq__(self, other):
        return (
            isinstance(other, AtomMap)
            and self.source == other.source
            and self.target == other.target
            and self.table == other.table
        )

    def __hash__(self):
        return hash((self.source, self.target, self.table))

    def __repr__(self):
        return f"AtomMap({self.mapping})"

    def is_surjective(self) -> bool:
        return len(set(self.table)) == len(self.target)

    def missed(self) -> tuple:
        return tuple(a for k, a in enumerate(self.target.atoms) if k not in set(self.table))

    @cached_property
    def fibers(self) -> tuple:
        out = [0] * len(self.target)
        for s, t in enumerate(self.table):
            out[t] |= 1 << s
        return tuple(out)

    @cached_property
    def _project_table(self):
        n = len(self.source)
        if n > TABLE_LIMIT:
            return None
        out = np.zeros(1 << n, dtype=np.int64)
        for m in range(1, 1 << n):
            low = m & -m
            out[m] = out[m ^ low] | (1 << self.table[low.bit_length() - 1])
        return out

    @cached_property
    def _embed_table(self):
        n = len(self.target)
        if n > TABLE_LIMIT:
            return None
        fib = self.fibers
        out = np.zeros(1 << n, dtype=np.int64)
        for m in range(1, 1 << n):
            low = m & -m
            out[m] = out[m ^ low] | fib[low.bit_length() - 1]
        return out

    def project_mask(self, mask: int) -> int:
        out = 0
        for s in bits(mask):
            out |= 1 << self.table[s]
        return out

    def embed_mask(self, mask: int) -> int:
        out = 0
        fib = self.fibers
        for t in bits(mask):
            out |= fib[t]
        return out

    def project_masks(self, masks: np.ndarray) -> np.ndarray:
        table = self._project_table
        if table is not None:
            return table[masks]
        return np.array([self.project_mask(int(m)) for m in masks], dtype=np.int64)

    def embed_masks(self, masks: np.ndarray) -> np.ndarray:
        table = self._embed_table
        if table is not None:
            return table[masks]
        return np.array([self.embed_mask(int(m)) for m in masks], dtype=np.int64)

    def to_json(self, source_id=None, target_id=None):
        return {"source": source_id, "target": target_id, "map": self.mapping}


def identity(A: FiniteBA) -> AtomMap:
    return AtomMap.from_table(A, A, range(len(A)))


def embed(e: AtomMap, a: BAElement) -> BAElement:
    """Image of ``a`` (in the smaller algebra) inside the larger algebra."""
    if a.parent != e.target:
        raise ParentMismatch("embed: element is not in the map's target")
    return BAElement(e.source, e.embed_mask(a.mask))


def project(e: AtomMap, b: BAElement) -> BAElement:
    """Least element of the smaller algebra above ``b``."""
    if b.parent != e.source:
        raise ParentMismatch("project: element is not in the map's source")
    return BAElement(e.target, e.project_mask(b.mask))


def inner(e: AtomMap, b: BAElement) -> BAElement:
    """Greatest element of the smaller algebra below ``b``."""
    if b.parent != e.source:
        raise ParentMismatch("inner: element is not in the map's source")
    return BAElement(e.target, e.target.full & ~e.project_mask(e.source.full & ~b.mask))


def compose(e2: AtomMap, e1: AtomMap) -> AtomMap:
    """``e2 . e1``: first ``e1`` (A_k -> A_j), then ``e2`` (A_j -> A_i)."""
    if e1.target != e2.source:
        raise ParentMismatch("compose: e1.target != e2.source")
    return AtomMap.from_table(e1.source, e2.target, [e2.table[t] for t in e1.table])


def pair_atom(a: str, b: str) -> str:
    return f"({a},{b})"


def free_product(A: FiniteBA, B: FiniteBA):
    """Product algebra with atoms ``atoms(A) x atoms(B)`` and its two coordinate maps."""
    atoms = {pair_atom(a, b): (a, b) for a in A.atoms for b in B.atoms}
    P = FiniteBA(atoms)
    to_a = AtomMap(P, A, {k: v[0] for k, v in atoms.items()})
    to_b = AtomMap(P, B, {k: v[1] for k, v in atoms.items()})
    return P, to_a, to_b


def fibre_product(ea: AtomMap, eb: AtomMap):
    """Amalgamated product over a common subalgebra: atom pairs agreeing below.

    ``ea: A -> C`` and ``eb: B -> C``; with a trivial ``C`` this is ``free_product``.
    """
    if ea.target != eb.target:
        raise ParentMismatch("the two maps must share their target")
    A, B = ea.source, eb.source
    atoms = {pair_atom(a, b): (a, b) for a in A.atoms for b in B.atoms if ea(a) == eb(b)}
    P = FiniteBA(atoms)
    to_a = AtomMap(P, A, {k: v[0] for k, v in atoms.items()})
    to_b = AtomMap(P, B, {k: v[1] for k, v in atoms.items()})
    return P, to_a, to_b


# ---------------------------------------------------------------------------
# preorders and their regular-open completions


class FinitePreorder:
    """Reflexive, transitive relation given as a boolean matrix: ``leq[a, b]`` iff a <= b.

    In the forcing convention smaller means stronger.
    """

    def __init__(self, elements, leq, check=True):
        self.elements = tuple(elements)
        self.leq = np.asarray(leq, dtype=bool)
        n = len(self.elements)
        if self.leq.shape != (n, n):
            raise ValueError("relation shape does not match element count")
        if check:
            bad = self.violations()
            if bad:
                raise ValueError(f"not a preorder: {bad[0]}")

    @classmethod
    def from_pairs(cls, elements, pairs):
        elements = tuple(elements)
        idx = {e: k for k, e in enumerate(elements)}
        m = np.eye(len(elements), dtype=bool)
        for a, b in pairs:
            m[idx[a], idx[b]] = True
        return cls(elements, m)

    def __len__(self):
        return len(self.elements)

    def violations(self):
        n = len(self.elements)
        m = self.leq
        out = []
        for a in range(n):
            if not m[a, a]:
                out.append(("reflexivity", (self.elements[a],)))
        if n:
            comp = (m.astype(np.int32) @ m.astype(np.int32)) > 0
            bad = np.argwhere(comp & ~m)
            if len(bad):
                a, c = bad[0]
                b = int(np.flatnonzero(m[a] & m[:, c])[0])
                out.append(("transitivity", (self.elements[a], self.elements[b], self.elements[c])))
        return out

    def minimal(self) -> np.ndarray:
        """Indices p such that every q <= p is equivalent to p."""
        strictly_below = self.leq & ~self.leq.T
        return np.flatnonzero(~strictly_below.any(axis=0))


def _minimal_classes(P: FinitePreorder):
    mins = P.minimal()
    classes, seen = [], set()
    for m in mins:
        if m in seen:
            continue
        cls = [int(x) for x in mins if P.leq[m, x] and P.leq[x, m]]
        seen.update(cls)
        classes.append(tuple(cls))
    return classes


@dataclass
class Completion:
    """A finite regular-open completion.

    ``classes`` lists the equivalence classes of minimal elements (one atom each);
    ``dense[p]`` is the bitmask of classes lying below element ``p``.
    """

    preorder: FinitePreorder
    algebra: FiniteBA
    classes: tuple
    dense: tuple

    def image(self, p: int) -> BAElement:
        return BAElement(self.algebra, self.dense[p])


def regular_open_completion(P: FinitePreorder, atom_names=None) -> Completion:
    """Completion of a finite preorder: atoms are the classes of minimal elements.

    A down-set of a finite preorder is regular open exactly when it is determined
    by the minimal elements it contains, so the regular-open algebra is the
    powerset of the minimal classes and ``p`` maps to the classes below it.
    """
    if len(P) == 0:
        raise ValueError("completion of an empty preorder")
    classes = _minimal_classes(P)
    names = list(atom_names(classes)) if atom_names else [f"m{k}" for k in range(len(classes))]
    if len(set(names)) != len(names):
        raise ValueError("atom names must be distinct")
    # the algebra sorts atom ids; keep class k at the bit of its name
    algebra = FiniteBA(names)
    order = [algebra.index[name] for name in names]
    rep = np.array([c[0] for c in classes])
    below = P.leq[rep, :]  # below[k, p]: class k lies below p
    dense = []
    for p in range(len(P)):
        mask = 0
        for k in np.flatnonzero(below[:, p]):
            mask |= 1 << order[k]
        dense.append(mask)
    sorted_classes = [None] * len(classes)
    for k, c in enumerate(classes):
        sorted_classes[order[k]] = c
    return Completion(P, algebra, tuple(sorted_classes), tuple(dense))


@dataclass
class SeparativeQuotient:
    poset: FinitePreorder
    quotient_map: tuple  # element index -> class index
    classes: tuple


def separative_quotient(P: FinitePreorder) -> SeparativeQuotient:
    """Identify elements with the same minimal elements below them.

    Classes are ordered by their least member; the quotient order is inclusion
    of those minimal sets, which makes the result a separative partial order.
    """
    mins = P.minimal()
    keys = [frozenset(int(m) for m in mins if P.leq[m, p]) for p in range(len(P))]
    first = {}
    qmap = []
    for p, key in enumerate(keys):
        if key not in first:
            first[key] = len(first)
        qmap.append(first[key])
    reps = [None] * len(first)
    for key, k in first.items():
        reps[k] = key
    members = [tuple(p for p in range(len(P)) if qmap[p] == k) for k in range(len(first))]
    n = len(reps)
    leq = np.array([[reps[a] <= reps[b] for b in range(n)] for a in range(n)], dtype=bool)
    names = [P.elements[m[0]] for m in members]
    return SeparativeQuotient(FinitePreorder(names, leq), tuple(qmap), tuple(members))


def is_separative(P: FinitePreorder) -> bool:
    """Antisymmetric, and q not <= p implies some r <= q incompatible with p."""
    n = len(P)
    m = P.leq
    if np.any(m & m.T & ~np.eye(n, dtype=bool)):
        return False
    compatible = (m.T.astype(np.int32) @ m.astype(np.int32)) > 0  # common lower bound
    for q in range(n):
        for p in range(n):
            if not m[q, p]:
                below_q = np.flatnonzero(m[:, q])
                if all(compatible[r, p] for r in below_q):
                    return False
    return True
