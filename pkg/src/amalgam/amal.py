"""The amalgamated limit of a correct system of finite Boolean algebras.

The union of all algebras is formed by identifying each element with its
images under the embeddings; an element is stored canonically at its *home*,
the least index whose algebra contains it.  Conditions are unordered pairs of
nonzero elements whose projections to the meet of their homes agree, ordered by
the four-case rule, and the limit algebra is the regular-open completion of the
resulting preorder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .balg import AtomMap, BAElement, FiniteBA, FinitePreorder, bits, fibre_product, regular_open_completion
from .diagram import BASystem, direct_limit, validate_system
from .order import PreconditionError, add_top, AlmostLattice


ORDER_CHUNK = 1024


class InvalidSystem(ValueError):
    pass


class TheoremViolation(AssertionError):
    """A construction step that the theory guarantees has failed."""


@dataclass(frozen=True)
class Condition:
    p: BAElement
    q: BAElement
    witness: tuple  # canonical (home of p, home of q)

    def __repr__(self):
        return f"({self.witness[0]}:{self.p!r}, {self.witness[1]}:{self.q!r})"


def canonical(S: BASystem, i, mask: int) -> tuple:
    """Home index and mask of an element of ``A_i``.

    The home is the meet of all ``k <= i`` whose algebra contains the element; by
    correctness that meet contains it as well, which is asserted.
    """
    P = S.index.poset
    holders = []
    for k in P.down(i):
        e = S.maps[k, i]
        if e.embed_mask(e.project_mask(mask)) == mask:
            holders.append(k)
    home = S.index.meet_all(sorted(holders))
    e = S.maps[home, i]
    small = e.project_mask(mask)
    if e.embed_mask(small) != mask:
        raise TheoremViolation(f"element {mask:b} of {i} not contained in the meet {home} of its holders")
    return home, small


class ConditionSet:
    """The conditions of the amalgamated limit together with their order matrix."""

    def __init__(self, S: BASystem):
        self.system = S
        self.elements = []  # universe: (home, mask)
        self.uindex = {}
        for i in S.index.elements:
            for mask in range(1, S.algebras[i].full + 1):
                key = canonical(S, i, mask)
                if key not in self.uindex:
                    self.uindex[key] = len(self.elements)
                    self.elements.append(key)
        self._by_home = {}
        for u, (h, _) in enumerate(self.elements):
            self._by_home.setdefault(h, []).append(u)
        self._enumerate()
        self._R = None
        self._order = None

    def _enumerate(self):
        S = self.system
        homes = sorted(self._by_home)
        pairs = []
        for a_pos, a in enumerate(homes):
            for b in homes[a_pos:]:
                xs, ys = self._by_home[a], self._by_home[b]
                if a == b:
                    pairs.extend((x, x) for x in xs)
                    continue
                m = S.index.meet(a, b)
                bucket = {}
                for y in ys:
                    bucket.setdefault(S.maps[m, b].project_mask(self.elements[y][1]), []).append(y)
                for x in xs:
                    for y in bucket.get(S.maps[m, a].project_mask(self.elements[x][1]), ()):
                        pairs.append((min(x, y), max(x, y)))
        pairs.sort()
        self.P = np.array([p for p, _ in pairs], dtype=np.int64)
        self.Q = np.array([q for _, q in pairs], dtype=np.int64)
        self.index = {pq: k for k, pq in enumerate(pairs)}
        self.diagonal = {p: self.index[p, p] for p in range(len(self.elements))}

    def __len__(self):
        return len(self.P)

    def element(self, u: int) -> BAElement:
        h, mask = self.elements[u]
        return BAElement(self.system.algebras[h], mask)

    def home(self, u: int):
        return self.elements[u][0]

    def condition(self, d: int) -> Condition:
        p, q = int(self.P[d]), int(self.Q[d])
        return Condition(self.element(p), self.element(q), (self.home(p), self.home(q)))

    @property
    def conditions(self):
        return [self.condition(d) for d in range(len(self))]

    def lookup(self, i, p_mask: int, j=None, q_mask=None) -> int:
        """Index of the condition (p, q) with p in A_i, q in A_j (default: the pair (p, p))."""
        x = self.uindex[canonical(self.system, i, p_mask)]
        y = x if j is None else self.uindex[canonical(self.system, j, q_mask)]
        return self.index[min(x, y), max(x, y)]

    def label(self, d: int) -> str:
        return repr(self.condition(d))

    @property
    def below(self) -> np.ndarray:
        """``below[x, y]``: projecting x into the home algebra of y lands below y."""
        if self._R is None:
            S = self.system
            U = len(self.elements)
            R = np.zeros((U, U), dtype=bool)
            masks = np.array([m for _, m in self.elements], dtype=np.int64)
            for a, xs in self._by_home.items():
                for b, ys in self._by_home.items():
                    m = S.index.meet(a, b)
                    xs_a, ys_a = np.array(xs), np.array(ys)
                    lifted = S.maps[m, b].embed_masks(S.maps[m, a].project_masks(masks[xs_a]))
                    R[np.ix_(xs_a, ys_a)] = (lifted[:, None] & ~masks[ys_a][None, :]) == 0
            self._R = R
        return self._R

    @property
    def order(self) -> np.ndarray:
        """``order[d1, d2]`` iff d1 <= d2 under the four-case rule with canonical witnesses."""
        if self._order is None:
            R = self.below
            n = len(self)
            out = np.empty((n, n), dtype=bool)
            P2, Q2 = self.P[None, :], self.Q[None, :]
            for lo in range(0, n, ORDER_CHUNK):  # row blocks keep temporaries small
                P1, Q1 = self.P[lo : lo + ORDER_CHUNK, None], self.Q[lo : lo + ORDER_CHUNK, None]
                pp, qq, qp, pq = R[P1, P2], R[Q1, Q2], R[Q1, P2], R[P1, Q2]
                out[lo : lo + ORDER_CHUNK] = (pp & qq) | (qp & pq) | (pp & pq) | (qp & qq)
            self._order = out
        return self._order

    def preorder(self) -> FinitePreorder:
        return FinitePreorder(range(len(self)), self.order, check=False)

    def witnesses(self, d: int):
        """Every (i, j) witnessing membership of condition ``d``."""
        S = self.system
        P = S.index.poset
        (hp, mp), (hq, mq) = self.elements[self.P[d]], self.elements[self.Q[d]]
        out = []
        for i in sorted(P.up(hp)):
            for j in sorted(P.up(hq)):
                m = S.index.meet(i, j)
                a = S.maps[m, i].project_mask(S.maps[hp, i].embed_mask(mp))
                b = S.maps[m, j].project_mask(S.maps[hq, j].embed_mask(mq))
                if a == b:
                    out.append((i, j))
        return out


def build_condition_set(S: BASystem, validate: bool = True) -> ConditionSet:
    if validate:
        report = validate_system(S)
        if not report.valid:
            raise InvalidSystem(str(report.violations[0]))
    return ConditionSet(S)


def case_holds(S: BASystem, x, wx, y, wy) -> bool:
    """``h^{wx}_{wx ^ wy}(x) <= y`` evaluated inside ``A_wy``.

    ``x`` and ``y`` are (home, mask) pairs with homes below the witnesses.
    """
    (hx, mx), (hy, my) = x, y
    m = S.index.meet(wx, wy)
    in_wx = S.maps[hx, wx].embed_mask(mx)
    projected = S.maps[m, wx].project_mask(in_wx)
    lhs = S.maps[m, wy].embed_mask(projected)
    rhs = S.maps[hy, wy].embed_mask(my)
    return lhs & ~rhs == 0


def leq_with_witnesses(S, p1, q1, w1, p2, q2, w2) -> bool:
    """Four-case order ``(p1, q1) <= (p2, q2)`` with explicit witnesses ``w1``, ``w2``."""
    (i1, j1), (i2, j2) = w1, w2
    return (
        (case_holds(S, p1, i1, p2, i2) and case_holds(S, q1, j1, q2, j2))
        or (case_holds(S, q1, j1, p2, i2) and case_holds(S, p1, i1, q2, j2))
        or (case_holds(S, p1, i1, p2, i2) and case_holds(S, p1, i1, q2, j2))
        or (case_holds(S, q1, j1, p2, i2) and case_holds(S, q1, j1, q2, j2))
    )


def cond_leq(cs: ConditionSet, d1: int, d2: int, check_witnesses: bool = False) -> bool:
    """Order between two conditions of the same set, evaluated at canonical witnesses.

    With ``check_witnesses`` the verdict is recomputed for every pair of valid
    witnesses and a disagreement raises TheoremViolation.
    """
    S = cs.system
    p1, q1 = cs.elements[cs.P[d1]], cs.elements[cs.Q[d1]]
    p2, q2 = cs.elements[cs.P[d2]], cs.elements[cs.Q[d2]]
    verdict = leq_with_witnesses(S, p1, q1, (p1[0], q1[0]), p2, q2, (p2[0], q2[0]))
    if check_witnesses:
        for w1 in cs.witnesses(d1):
            for w2 in cs.witnesses(d2):
                if leq_with_witnesses(S, p1, q1, w1, p2, q2, w2) != verdict:
                    raise TheoremViolation(f"witnesses {w1}, {w2} change the order of {cs.label(d1)}, {cs.label(d2)}")
    return verdict


# ---------------------------------------------------------------------------
# the limit algebra


@dataclass
class LimitAlgebra:
    system: BASystem
    conditions: ConditionSet
    algebra: FiniteBA
    dense: tuple  # condition index -> bitmask over limit atoms
    classes: tuple  # limit atom -> condition indices of its minimal class
    limit_embedding: dict  # index -> AtomMap (limit -> A_i), None where the fibres do not partition
    defects: list = field(default_factory=list)

    def dense_map(self, d: int) -> BAElement:
        return BAElement(self.algebra, self.dense[d])

    def image(self, i, p_mask: int) -> BAElement:
        """Image of ``p`` in ``A_i`` via p -> (p, p)."""
        return self.dense_map(self.conditions.lookup(i, p_mask))


def limit_atom_names(classes):
    width = len(str(max(len(classes) - 1, 0)))
    return [f"L{k:0{width}d}" for k in range(len(classes))]


def amalgamated_limit(S: BASystem, validate: bool = True) -> LimitAlgebra:
    cs = build_condition_set(S, validate=validate)
    comp = regular_open_completion(cs.preorder(), atom_names=limit_atom_names)
    A = comp.algebra
    embeddings, defects = {}, []
    for i in S.index.elements:
        Ai = S.algebras[i]
        owner = [None] * len(A)
        ok = True
        for a in range(len(Ai)):
            for c in bits(comp.dense[cs.lookup(i, 1 << a)]):
                if owner[c] is not None:
                    ok = False
                owner[c] = a
        if ok and None not in owner:
            embeddings[i] = AtomMap.from_table(A, Ai, owner)
        else:
            embeddings[i] = None
            defects.append(f"atoms of {i} do not partition the limit atoms")
    return LimitAlgebra(S, cs, A, comp.dense, comp.classes, embeddings, defects)


@dataclass
class EmbeddabilityReport:
    per_index: dict
    meet_identity: bool
    density: bool
    extended: dict
    defects: list

    @property
    def ok(self) -> bool:
        return not self.defects

    def to_json(self):
        return {
            "ok": self.ok,
            "per_index": self.per_index,
            "meet_identity": self.meet_identity,
            "density": self.density,
            "extended_system": self.extended,
            "defects": self.defects,
        }


def extended_system(Lm: LimitAlgebra, top=None) -> BASystem:
    """The system over I + {top} with the limit algebra at the new top."""
    S = Lm.system
    ext = add_top(S.index, top)
    index = AlmostLattice.from_poset(ext.poset)
    algebras = dict(S.algebras)
    algebras[ext.top] = Lm.algebra
    maps = dict(S.maps)
    for i, e in Lm.limit_embedding.items():
        maps[i, ext.top] = e
    return BASystem(index, algebras, maps)


def verify_embeddability(Lm: LimitAlgebra) -> EmbeddabilityReport:
    """Check that every A_i completely embeds and that the extended system is correct."""
    S, cs = Lm.system, Lm.conditions
    defects = list(Lm.defects)
    per_index = {}
    for i in S.index.elements:
        e = Lm.limit_embedding[i]
        if e is None:
            per_index[i] = {"complete_embedding": False}
            continue
        surjective = e.is_surjective()
        recovers = matches = True
        for mask in range(1, S.algebras[i].full + 1):
            up = e.embed_mask(mask)
            if up != Lm.dense[cs.lookup(i, mask)]:
                matches = False
            if up == 0 or e.project_mask(up) != mask:
                recovers = False
        per_index[i] = {"complete_embedding": surjective, "recovers": recovers, "matches_dense": matches}
        if not (surjective and recovers and matches):
            defects.append(f"embedding of {i} fails: {per_index[i]}")
    dense = np.array(Lm.dense, dtype=np.int64)
    diag = np.array([cs.diagonal[u] for u in range(len(cs.elements))], dtype=np.int64)
    meet_identity = bool(np.all(dense == (dense[diag[cs.P]] & dense[diag[cs.Q]])))
    covered = int(np.bitwise_or.reduce(dense)) if len(dense) else 0
    density = bool(np.all(dense != 0)) and covered == Lm.algebra.full
    if not meet_identity:
        defects.append("image of (p, q) differs from the meet of the images of p and q")
    if not density:
        defects.append("dense map misses a limit atom or sends a condition to zero")
    if any(e is None for e in Lm.limit_embedding.values()):
        extended = {"valid": False, "violations": [{"law": "limit embedding", "witness": []}]}
    else:
        try:
            extended = validate_system(extended_system(Lm), fail_fast=False).to_json()
        except PreconditionError as exc:
            extended = {"valid": False, "violations": [{"law": "index extension", "witness": [str(exc)]}]}
        if not extended["valid"]:
            defects.append(f"extended system invalid: {extended['violations'][0]}")
    return EmbeddabilityReport(per_index, meet_identity, density, extended, defects)


def isomorphism_over(Lm: LimitAlgebra, A: FiniteBA, maps: dict):
    """Atom bijection ``phi: limit -> A`` with ``maps[i] . phi == limit_embedding[i]`` for all i.

    Returns the bijection as a dict, or None when no such bijection exists.
    """
    keys = sorted(maps)
    signature = {}
    for x in A.atoms:
        sig = tuple(maps[i](x) for i in keys)
        if sig in signature:
            return None
        signature[sig] = x
    phi = {}
    for c in Lm.algebra.atoms:
        e = [Lm.limit_embedding[i] for i in keys]
        if any(m is None for m in e):
            return None
        sig = tuple(m(c) for m in e)
        if sig not in signature:
            return None
        phi[c] = signature[sig]
    if len(set(phi.values())) != len(A):
        return None
    return phi


# ---------------------------------------------------------------------------
# degenerate shapes of the index


def degenerate_identifications(Lm: LimitAlgebra) -> dict:
    """Compare the limit with its expected closed form on special index shapes.

    With a maximum (in particular when the index is a lattice) the limit should
    be the algebra at the maximum; over a three-element index ``{0 ^ 1, 0, 1}``
    it should be the product of the two sides amalgamated over the bottom, the
    free product when the bottom is trivial.
    """
    S = Lm.system
    L = S.index
    out = {}
    top = L.maximum()
    if top is not None:
        A, maps = direct_limit(S)
        phi = isomorphism_over(Lm, A, maps)
        out["max_index"] = {"index": top, "isomorphic": phi is not None, "atoms": len(A)}
        if L.is_lattice():
            out["lattice"] = {"isomorphic_to_direct_limit": phi is not None}
    tops = L.tops()
    if len(L) == 3 and len(tops) == 2:
        a, b = tops
        bottom = L.bottom
        P, to_a, to_b = fibre_product(S.maps[bottom, a], S.maps[bottom, b])
        phi = isomorphism_over(Lm, P, {a: to_a, b: to_b})
        out["three_element"] = {
            "tops": [a, b],
            "trivial_bottom": len(S.algebras[bottom]) == 1,
            "isomorphic_to_product": phi is not None,
            "atoms": len(P),
        }
    return out
