"""Finite posets, distributive almost-lattices, closed subsets and the grid index sets."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Sequence

AXIOMS = ("i", "ii", "iii", "iv", "v", "vi")


class InvalidOrder(ValueError):
    """Raised when a relation is not a partial order; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    law: str
    witness: tuple

    def __str__(self):
        return f"{self.law} violated at {self.witness}"

    def to_json(self):
        return {"law": self.law, "witness": list(self.witness)}


class FinitePoset:
    """A finite partial order on opaque string ids.

    Elements are kept in sorted order; ``leq`` holds the reflexive relation as a
    set of pairs.  Instances are immutable after construction.
    """

    __slots__ = ("elements", "index", "_leq", "_up", "_down")

    def __init__(self, elements: Iterable[str], leq_pairs: Iterable[tuple[str, str]]):
        self.elements = tuple(sorted(set(elements)))
        self.index = {e: k for k, e in enumerate(self.elements)}
        n = len(self.elements)
        rel = [[False] * n for _ in range(n)]
        for k in range(n):
            rel[k][k] = True
        for a, b in leq_pairs:
            rel[self.index[a]][self.index[b]] = True
        self._leq = tuple(tuple(row) for row in rel)
        self._up = tuple(frozenset(self.elements[b] for b in range(n) if rel[a][b]) for a in range(n))
        self._down = tuple(frozenset(self.elements[a] for a in range(n) if rel[a][b]) for b in range(n))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return x in self.index

    def __eq__(self, other):
        return isinstance(other, FinitePoset) and self.elements == other.elements and self._leq == other._leq

    def __hash__(self):
        return hash((self.elements, self._leq))

    def __repr__(self):
        return f"FinitePoset({list(self.elements)}, {sorted(self.strict_pairs())})"

    def leq(self, a: str, b: str) -> bool:
        return self._leq[self.index[a]][self.index[b]]

    def lt(self, a, b):
        return a != b and self.leq(a, b)

    def up(self, a) -> frozenset:
        return self._up[self.index[a]]

    def down(self, a) -> frozenset:
        return self._down[self.index[a]]

    def comparable(self, a, b):
        return self.leq(a, b) or self.leq(b, a)

    def pairs(self):
        """All pairs (a, b) with a <= b, reflexive ones included."""
        return [(a, b) for a in self.elements for b in self.elements if self.leq(a, b)]

    def strict_pairs(self):
        return [(a, b) for a, b in self.pairs() if a != b]

    def covers(self):
        """Covering pairs (a, b): a < b with nothing strictly in between."""
        out = []
        for a, b in self.strict_pairs():
            if not any(self.lt(a, c) and self.lt(c, b) for c in self.elements):
                out.append((a, b))
        return out

    def upper_bounds(self, a, b) -> frozenset:
        return self.up(a) & self.up(b)

    def lower_bounds(self, a, b) -> frozenset:
        return self.down(a) & self.down(b)

    def maximal(self, subset=None):
        s = self.elements if subset is None else sorted(subset)
        return tuple(a for a in s if not any(self.lt(a, b) for b in s))

    def minimal(self, subset=None):
        s = self.elements if subset is None else sorted(subset)
        return tuple(a for a in s if not any(self.lt(b, a) for b in s))

    def restrict(self, subset) -> "FinitePoset":
        keep = set(subset)
        return FinitePoset(keep, [(a, b) for a, b in self.pairs() if a in keep and b in keep])

    def to_json(self):
        return {"elements": list(self.elements), "leq": [list(p) for p in self.strict_pairs()]}


def order_violations(elements: Sequence[str], leq_pairs) -> list[Violation]:
    """All antisymmetry and transitivity failures, each with its least witness."""
    elements = sorted(set(elements))
    known = set(elements)
    violations = []
    rel = {(a, a) for a in elements}
    for a, b in leq_pairs:
        if a not in known or b not in known:
            violations.append(Violation("unknown element", (a, b)))
            continue
        rel.add((a, b))
    for a, b in sorted(rel):
        if a < b and (b, a) in rel:
            violations.append(Violation("antisymmetry", (a, b)))
    for a, b, c in product(elements, repeat=3):
        if (a, b) in rel and (b, c) in rel and (a, c) not in rel:
            violations.append(Violation("transitivity", (a, b, c)))
    return violations


def validate_poset(elements, leq_pairs) -> FinitePoset:
    """Build a poset, raising InvalidOrder listing every violated law.

    Reflexive pairs are implied and need not be listed.
    """
    elements = list(elements)
    if not elements:
        raise InvalidOrder([Violation("non-empty", ())])
    leq_pairs = [tuple(p) for p in leq_pairs]
    violations = order_violations(elements, leq_pairs)
    if violations:
        raise InvalidOrder(violations)
    return FinitePoset(elements, leq_pairs)


def poset_from_json(data) -> FinitePoset:
    return validate_poset(data["elements"], data.get("leq", []))


# ---------------------------------------------------------------------------
# almost-lattices


@dataclass
class AxiomReport:
    poset: FinitePoset
    holds: dict
    witnesses: dict
    meet: dict | None = None
    join: dict | None = None

    @property
    def verdict(self) -> bool:
        return all(self.holds.values())

    def first_four(self) -> bool:
        return all(self.holds[a] for a in ("i", "ii", "iii", "iv"))

    @property
    def lattice(self) -> "AlmostLattice":
        if not self.verdict:
            raise PreconditionError(f"not a distributive almost-lattice: {self.failed()}")
        return AlmostLattice(self.poset, self.meet, self.join)

    def failed(self):
        return [a for a in AXIOMS if not self.holds[a]]

    def to_json(self):
        return {
            "verdict": self.verdict,
            "axioms": {a: self.holds[a] for a in AXIOMS},
            "witnesses": {a: list(w) for a, w in sorted(self.witnesses.items())},
        }


def _glb(P: FinitePoset, a, b):
    lower = P.lower_bounds(a, b)
    tops = [c for c in lower if all(P.leq(d, c) for d in lower)]
    return tops[0] if tops else None


def _lub(P: FinitePoset, a, b):
    upper = P.upper_bounds(a, b)
    bottoms = [c for c in upper if all(P.leq(c, d) for d in upper)]
    return bottoms[0] if bottoms else None


def check_almost_lattice(P: FinitePoset) -> AxiomReport:
    """Evaluate axioms (i)-(vi) of a distributive almost-lattice on ``P``.

    Each failing axiom gets its lexicographically least witness.  Axioms (iv)-(vi)
    are only meaningful once meets and bounded joins exist; when (i) or (ii) fails
    they are reported as failing with an empty witness.
    """
    els = P.elements
    holds = {a: True for a in AXIOMS}
    witnesses = {}

    def fail(axiom, witness):
        if holds[axiom]:
            holds[axiom] = False
            witnesses[axiom] = tuple(witness)

    meet, join = {}, {}
    for a, b in product(els, repeat=2):
        m = _glb(P, a, b)
        if m is None:
            fail("i", (a, b))
        meet[a, b] = m
        if P.upper_bounds(a, b):
            j = _lub(P, a, b)
            if j is None:
                fail("ii", (a, b))
            join[a, b] = j
        else:
            join[a, b] = None

    def bounded(a, b):
        return bool(P.upper_bounds(a, b))

    for a, b, c in combinations(els, 3):
        if not (bounded(a, b) or bounded(a, c) or bounded(b, c)):
            fail("iii", (a, b, c))

    if not (holds["i"] and holds["ii"]):
        for axiom in ("iv", "v", "vi"):
            fail(axiom, ())
        return AxiomReport(P, holds, witnesses)

    for a, b, c in product(els, repeat=3):
        # a ^ (b v c) = (a ^ b) v (a ^ c)
        bc = join[b, c]
        if bc is not None:
            rhs = join[meet[a, b], meet[a, c]]
            if rhs is None or meet[a, bc] != rhs:
                fail("iv", (a, b, c))
        # a v (b ^ c) = (a v b) ^ (a v c)
        ab, ac = join[a, b], join[a, c]
        if ab is not None and ac is not None:
            lhs = join[a, meet[b, c]]
            if lhs is None or lhs != meet[ab, ac]:
                fail("iv", (a, b, c))

    for i, j, jp in product(els, repeat=3):
        if bounded(i, j):
            continue
        # inclusive reading: if either join exists then both exist and agree
        x, y = join[i, jp], join[i, meet[j, jp]]
        if (x is not None or y is not None) and x != y:
            fail("v", (i, j, jp))

    for j, jp, i in product(els, repeat=3):
        if bounded(j, jp):
            continue
        if join[meet[i, j], meet[i, jp]] != i:
            fail("vi", (j, jp, i))

    return AxiomReport(P, holds, witnesses, meet, join)


class AlmostLattice:
    """A verified distributive almost-lattice with its meet and partial join tables."""

    def __init__(self, poset: FinitePoset, meet: dict, join: dict):
        self.poset = poset
        self._meet = meet
        self._join = join

    @classmethod
    def from_poset(cls, P: FinitePoset) -> "AlmostLattice":
        return check_almost_lattice(P).lattice

    @classmethod
    def from_json(cls, data) -> "AlmostLattice":
        return cls.from_poset(poset_from_json(data))

    @property
    def elements(self):
        return self.poset.elements

    def __len__(self):
        return len(self.poset)

    def __iter__(self):
        return iter(self.poset.elements)

    def __contains__(self, x):
        return x in self.poset

    def __eq__(self, other):
        return isinstance(other, AlmostLattice) and self.poset == other.poset

    def __hash__(self):
        return hash(self.poset)

    def __repr__(self):
        return f"AlmostLattice({self.poset!r})"

    def leq(self, a, b):
        return self.poset.leq(a, b)

    def meet(self, a, b):
        return self._meet[a, b]

    def join(self, a, b):
        """The join, or None when ``a`` and ``b`` have no upper bound."""
        return self._join[a, b]

    def has_join(self, a, b):
        return self._join[a, b] is not None

    def meet_all(self, items):
        items = list(items)
        out = items[0]
        for x in items[1:]:
            out = self._meet[out, x]
        return out

    @property
    def bottom(self):
        return self.meet_all(self.elements)

    def maximum(self):
        tops = self.poset.maximal()
        return tops[0] if len(tops) == 1 else None

    def tops(self):
        return self.poset.maximal()

    def is_lattice(self):
        return all(j is not None for j in self._join.values())

    def sublattice(self, subset) -> "AlmostLattice":
        """Restriction to a closed subset; meets and joins are inherited."""
        cs = closure(self, subset)
        if set(cs) != set(subset):
            raise PreconditionError(f"subset not closed: missing {sorted(set(cs) - set(subset))}")
        return AlmostLattice.from_poset(self.poset.restrict(subset))

    def join_irreducibles(self):
        """Elements that are not the join of two strictly smaller elements (bottom included)."""
        out = []
        for x in self.elements:
            below = [y for y in self.poset.down(x) if y != x]
            if not any(self._join[a, b] == x for a in below for b in below):
                out.append(x)
        return tuple(out)

    def to_json(self):
        return self.poset.to_json()


# ---------------------------------------------------------------------------
# adding a top element


@dataclass
class TopExtension:
    poset: FinitePoset
    top: str
    lattice_verdict: bool
    axioms_v_vi: bool
    degenerate: bool
    witness: tuple = ()

    @property
    def agrees(self) -> bool:
        return self.lattice_verdict == self.axioms_v_vi


def fresh_id(existing, base="ell"):
    name, k = base, 0
    while name in existing:
        k += 1
        name = f"{base}{k}"
    return name


def distributive_lattice_violation(P: FinitePoset):
    """Return None if ``P`` is a distributive lattice, else a witness tuple.

    Meets and joins are recomputed from the order alone.
    """
    els = P.elements
    meet, join = {}, {}
    for a, b in product(els, repeat=2):
        meet[a, b], join[a, b] = _glb(P, a, b), _lub(P, a, b)
        if meet[a, b] is None or join[a, b] is None:
            return ("not a lattice", a, b)
    for a, b, c in product(els, repeat=3):
        if meet[a, join[b, c]] != join[meet[a, b], meet[a, c]]:
            return ("meet over join", a, b, c)
        if join[a, meet[b, c]] != meet[join[a, b], join[a, c]]:
            return ("join over meet", a, b, c)
    return None


def add_top(L, top=None) -> TopExtension:
    """Adjoin a new maximum and decide whether the result is a distributive lattice.

    ``L`` may be a FinitePoset or an AlmostLattice and must satisfy axioms (i)-(iv).
    The returned verdict is computed directly in the extended order and compared
    with (v) and (vi) by the caller via ``TopExtension.agrees``.
    """
    P = L.poset if isinstance(L, AlmostLattice) else L
    report = check_almost_lattice(P)
    for axiom in ("i", "ii", "iii", "iv"):
        if not report.holds[axiom]:
            raise PreconditionError(f"axiom ({axiom}) fails at {report.witnesses[axiom]}")
    top = top or fresh_id(P.elements)
    if top in P:
        raise PreconditionError(f"top id {top!r} already used")
    ext = FinitePoset(P.elements + (top,), P.pairs() + [(a, top) for a in P.elements])
    witness = distributive_lattice_violation(ext)
    return TopExtension(
        poset=ext,
        top=top,
        lattice_verdict=witness is None,
        axioms_v_vi=report.holds["v"] and report.holds["vi"],
        degenerate=len(P.maximal()) == 1,
        witness=witness or (),
    )


# ---------------------------------------------------------------------------
# closed sets


class ClosedSet(frozenset):
    """A subset of an almost-lattice closed under meets and existing joins."""

    lattice: AlmostLattice

    def __new__(cls, lattice: AlmostLattice, carrier):
        self = super().__new__(cls, carrier)
        self.lattice = lattice
        for a, b in product(self, repeat=2):
            j = lattice.join(a, b)
            if lattice.meet(a, b) not in self or (j is not None and j not in self):
                raise PreconditionError(f"set not closed at {(a, b)}")
        tops = lattice.poset.maximal(self)
        if len(tops) > 2 or (len(tops) == 2 and lattice.has_join(*tops)):
            raise AssertionError(f"closed set with tops {tops}")
        return self

    def __reduce__(self):
        return (ClosedSet, (self.lattice, frozenset(self)))

    def tops(self):
        return top_elements(self)


def closure(L: AlmostLattice, F) -> ClosedSet:
    """The smallest closed set containing ``F``."""
    carrier = set(F)
    for x in carrier:
        if x not in L:
            raise KeyError(x)
    frontier = list(carrier)
    while frontier:
        new = []
        for a in frontier:
            for b in list(carrier):
                for c in (L.meet(a, b), L.join(a, b)):
                    if c is not None and c not in carrier:
                        carrier.add(c)
                        new.append(c)
        frontier = new
    return ClosedSet(L, carrier)


def top_elements(F: ClosedSet) -> tuple:
    """The unique maximal element as a 1-tuple, or the two join-less tops."""
    if not isinstance(F, ClosedSet):
        raise PreconditionError("top_elements needs a ClosedSet")
    if not F:
        raise PreconditionError("empty closed set has no top")
    tops = F.lattice.poset.maximal(F)
    assert len(tops) in (1, 2), tops
    return tops


# ---------------------------------------------------------------------------
# grid index sets


def grid_id(alpha: int, gamma: int) -> str:
    return f"({alpha},{gamma})"


def grid_coordinates(node: str) -> tuple:
    """Inverse of ``grid_id``."""
    a, g = node.strip("()").split(",")
    return int(a), int(g)


def grid_index_set(beta: int, delta: int) -> AlmostLattice:
    """Pairs (alpha, gamma) with alpha <= beta, gamma <= delta, minus the corner (beta, delta)."""
    if beta < 0 or delta < 0 or (beta == 0 and delta == 0):
        raise PreconditionError("grid needs beta, delta >= 0 and not both zero")
    pts = [(a, g) for a in range(beta + 1) for g in range(delta + 1) if (a, g) != (beta, delta)]
    pairs = [
        (grid_id(*p), grid_id(*q))
        for p in pts
        for q in pts
        if p[0] <= q[0] and p[1] <= q[1]
    ]
    return AlmostLattice.from_poset(FinitePoset([grid_id(*p) for p in pts], pairs))


def three_element() -> AlmostLattice:
    """The index set {0 ^ 1, 0, 1} of a two-step amalgamation."""
    return AlmostLattice.from_poset(FinitePoset(["0", "1", "0^1"], [("0^1", "0"), ("0^1", "1")]))


def chain(n: int) -> AlmostLattice:
    ids = [str(k) for k in range(n)]
    return AlmostLattice.from_poset(FinitePoset(ids, [(a, b) for a in ids for b in ids if int(a) <= int(b)]))
