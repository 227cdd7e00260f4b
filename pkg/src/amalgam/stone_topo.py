"""Finite Stone duality and the limit of a system of finite discrete spaces.

Each finite algebra dualises to the discrete space of its atoms (principal
ultrafilters), each complete embedding to the surjection of atoms.  Points of
the limit are threads: coherent choices of one point per index.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import prod

from .diagram import BASystem, split_map_key
from .order import AlmostLattice, ClosedSet, PreconditionError, closure, poset_from_json, top_elements


class CorrectnessViolation(AssertionError):
    """No lift exists where correctness of the system promises one."""


class BudgetExceeded(ValueError):
    def __init__(self, bound, budget):
        self.bound, self.budget = bound, budget
        super().__init__(f"product of space sizes {bound} exceeds budget {budget}")


@dataclass(frozen=True)
class SpaceMap:
    source: tuple
    target: tuple
    table: dict  # point -> point

    def __call__(self, x):
        return self.table[x]

    def is_surjective(self):
        return set(self.table.values()) == set(self.target)

    def image(self, xs):
        return frozenset(self.table[x] for x in xs)

    def preimage(self, ys):
        ys = set(ys)
        return frozenset(x for x in self.source if self.table[x] in ys)

    def lifts(self, y):
        return [x for x in self.source if self.table[x] == y]


class DiscreteSystem:
    """Finite discrete spaces over an almost-lattice with surjections ``p^j_i: X_j -> X_i``."""

    def __init__(self, index: AlmostLattice, spaces: dict, maps: dict):
        self.index = index
        self.spaces = {i: tuple(sorted(spaces[i])) for i in index.elements}
        for i, pts in self.spaces.items():
            if not pts:
                raise ValueError(f"space at {i} is empty")
        self.maps = {}
        for i in index.elements:
            self.maps[i, i] = SpaceMap(self.spaces[i], self.spaces[i], {x: x for x in self.spaces[i]})
        for (i, j), table in maps.items():
            self.maps[i, j] = SpaceMap(self.spaces[j], self.spaces[i], dict(table))
        P = index.poset
        for i, j in sorted(P.strict_pairs(), key=lambda ij: len(P.up(ij[0]) & P.down(ij[1]))):
            if (i, j) in self.maps:
                continue
            for k in sorted(P.up(i) & P.down(j)):
                if k not in (i, j) and (i, k) in self.maps and (k, j) in self.maps:
                    a, b = self.maps[i, k], self.maps[k, j]
                    self.maps[i, j] = SpaceMap(self.spaces[j], self.spaces[i], {x: a(b(x)) for x in self.spaces[j]})
                    break

    def p(self, i, j) -> SpaceMap:
        """Projection ``X_j -> X_i`` for i <= j."""
        return self.maps[i, j]

    def product_size(self):
        return prod(len(s) for s in self.spaces.values())

    def to_json(self):
        return {
            "index": self.index.to_json(),
            "spaces": {i: {"points": list(pts)} for i, pts in self.spaces.items()},
            "maps": {f"{i}<{j}": dict(self.maps[i, j].table) for i, j in self.index.poset.strict_pairs()},
        }

    @classmethod
    def from_json(cls, data):
        index = AlmostLattice.from_poset(poset_from_json(data["index"]))
        spaces_key = "spaces" if "spaces" in data else "algebras"
        spaces = {i: data[spaces_key][i]["points"] for i in index.elements}
        maps = {split_map_key(k, index.elements): v for k, v in data.get("maps", {}).items()}
        return cls(index, spaces, maps)


def dualize(S: BASystem) -> DiscreteSystem:
    """Points are atoms and projections are the system's own atom maps."""
    return DiscreteSystem(
        S.index,
        {i: A.atoms for i, A in S.algebras.items()},
        {(i, j): e.mapping for (i, j), e in S.maps.items() if i != j},
    )


def lifts(DS: DiscreteSystem, top, constraints) -> list:
    """Points of ``X_top`` projecting to each prescribed (index, point), in sorted order."""
    return [x for x in DS.spaces[top] if all(DS.p(k, top)(x) == y for k, y in constraints)]


def check_topological_correctness(DS: DiscreteSystem, i, j):
    """Every pair agreeing at i ^ j has a common lift to i v j.

    Returns (verdict, first failing pair or None).
    """
    t = DS.index.join(i, j)
    if t is None:
        raise PreconditionError(f"{i} v {j} undefined")
    m = DS.index.meet(i, j)
    for xi in DS.spaces[i]:
        for xj in DS.spaces[j]:
            if DS.p(m, i)(xi) == DS.p(m, j)(xj) and not lifts(DS, t, [(i, xi), (j, xj)]):
                return False, (xi, xj)
    return True, None


def system_violations(DS: DiscreteSystem):
    P = DS.index.poset
    out = []
    for i, j in P.strict_pairs():
        if (i, j) not in DS.maps:
            out.append(("missing map", i, j))
        elif not DS.p(i, j).is_surjective():
            out.append(("surjectivity", i, j))
    if out:
        return out
    els = P.elements
    for i, j, k in product(els, repeat=3):
        if i != j != k and P.leq(i, j) and P.leq(j, k):
            a, b, c = DS.p(i, j), DS.p(j, k), DS.p(i, k)
            if any(a(b(x)) != c(x) for x in DS.spaces[k]):
                out.append(("commutativity", i, j, k))
    for a_pos, i in enumerate(els):
        for j in els[a_pos + 1 :]:
            if not P.comparable(i, j) and DS.index.has_join(i, j):
                ok, pair = check_topological_correctness(DS, i, j)
                if not ok:
                    out.append(("correctness", i, j, *pair))
    return out


# ---------------------------------------------------------------------------
# partial threads and their extension


@dataclass(frozen=True)
class PartialThread:
    domain: ClosedSet
    values: tuple  # sorted (index, point) pairs

    @classmethod
    def of(cls, L: AlmostLattice, values: dict) -> "PartialThread":
        dom = closure(L, values)
        if set(dom) != set(values):
            raise PreconditionError("partial thread domain must be closed")
        return cls(dom, tuple(sorted(values.items())))

    def __getitem__(self, i):
        return dict(self.values)[i]

    def as_dict(self):
        return dict(self.values)


def is_coherent(DS: DiscreteSystem, values: dict) -> bool:
    P = DS.index.poset
    return all(DS.p(k, j)(values[j]) == values[k] for j in values for k in values if P.leq(k, j))


def extension_plan(DS: DiscreteSystem, y: PartialThread, j):
    """The steps of one extension from ``y.domain`` to the closure of it plus ``j``.

    Returns (G, steps, tops).  A step is either ``("set", k, s)``: the value at k
    is the projection of the value at s; or ``("lift", t, constraints)``: choose a
    point of X_t whose projection to each k equals the projection to k of the
    value at s, for every (k, s) in constraints.  All remaining values of G are
    projections from ``tops``.
    """
    L = DS.index
    F = y.domain
    G = closure(L, set(F) | {j})
    if not F:
        return G, [("lift", j, [])], (j,)
    tops = top_elements(F)
    if len(tops) == 1:
        (j0,) = tops
        t = L.join(j0, j)
        if t is not None:
            plan = [("lift", t, [(j0, j0)])], (t,)
        else:
            (jp,) = [g for g in top_elements(G) if g != j0]
            m = L.meet(j0, jp)
            plan = [("lift", jp, [(m, j0)])], (j0, jp)
    else:
        j0, j1 = tops
        t0, t1 = L.join(j0, j), L.join(j1, j)
        if t0 is None and t1 is None:
            raise AssertionError("axiom (iii) fails for the two tops and the new index")
        if t0 is None or t1 is None:
            if t0 is None:
                j0, j1, t0 = j1, j0, t1
            m = L.meet(t0, j1)
            corner = L.join(j0, m)
            steps = [("set", m, j1), ("lift", corner, [(j0, j0), (m, m)])]
            if corner != t0:
                steps.append(("lift", t0, [(corner, corner)]))
            plan = steps, (t0, j1)
        else:
            m0, m1 = L.meet(j0, j), L.meet(j1, j)
            if L.join(m0, m1) != j:
                raise AssertionError("axiom (vi) fails: (j0 ^ j) v (j1 ^ j) != j")
            plan = [
                ("set", m0, j0),
                ("set", m1, j1),
                ("lift", j, [(m0, m0), (m1, m1)]),
                ("lift", t0, [(j0, j0), (j, j)]),
                ("lift", t1, [(j1, j1), (j, j)]),
            ], (t0, t1)
    steps, new_tops = plan
    assert set(top_elements(G)) == set(new_tops), (top_elements(G), new_tops)
    return G, steps, new_tops


def _run(DS, steps, work, pick):
    """Yield the work dicts produced by ``steps``; ``pick`` selects which lifts to follow."""
    if not steps:
        yield work
        return
    kind, target, arg = steps[0]
    if kind == "set":
        yield from _run(DS, steps[1:], {**work, target: DS.p(target, arg)(work[arg])}, pick)
        return
    wanted = [(k, DS.p(k, s)(work[s])) for k, s in arg]
    candidates = lifts(DS, target, wanted)
    if not candidates:
        raise CorrectnessViolation(f"no point of {target} over {wanted}")
    for x in pick(candidates):
        yield from _run(DS, steps[1:], {**work, target: x}, pick)


def _complete(DS, G, tops, work, y):
    values = y.as_dict()
    for g in G:
        if g not in values:
            top = next(t for t in tops if DS.index.leq(g, t))
            values[g] = DS.p(g, top)(work[top])
    if not is_coherent(DS, values):
        raise CorrectnessViolation(f"extension of {sorted(y.domain)} to {sorted(G)} is not coherent")
    return PartialThread(G, tuple(sorted(values.items())))


def extend_partial_thread(DS: DiscreteSystem, y: PartialThread, j) -> PartialThread:
    """Extend a coherent partial thread to the closure of its domain plus ``j``.

    Follows the case analysis on the tops of the domain: lifts are taken by
    correctness (or surjectivity) at the marked points, choosing the least point,
    and every other new value is obtained by projection.
    """
    if j in y.domain:
        return y
    G, steps, tops = extension_plan(DS, y, j)
    work = next(_run(DS, steps, y.as_dict(), lambda c: c[:1]))
    return _complete(DS, G, tops, work, y)


def all_extensions(DS: DiscreteSystem, y: PartialThread, j):
    """Every extension obtainable by the same steps, branching over all lift choices."""
    if j in y.domain:
        return [y]
    G, steps, tops = extension_plan(DS, y, j)
    return [_complete(DS, G, tops, work, y) for work in _run(DS, steps, y.as_dict(), lambda c: c)]


# ---------------------------------------------------------------------------
# the thread space


@dataclass
class ThreadSpace:
    system: DiscreteSystem
    order: tuple  # index ids; threads are tuples aligned with it
    threads: tuple

    def __len__(self):
        return len(self.threads)

    def projection(self, i):
        k = self.order.index(i)
        return {t: t[k] for t in self.threads}

    def value(self, t, i):
        return t[self.order.index(i)]


def _check_budget(DS, budget):
    if budget is not None and DS.product_size() > budget:
        raise BudgetExceeded(DS.product_size(), budget)


def threads_by_extension(DS: DiscreteSystem, budget=None) -> ThreadSpace:
    """Build the threads by iterated extension, branching over every lift choice.

    Starts from every singleton partial thread at the first index and extends
    through the remaining indices in sorted order.
    """
    _check_budget(DS, budget)
    order = DS.index.elements
    first = order[0]
    layer = [PartialThread.of(DS.index, {first: x}) for x in DS.spaces[first]]
    for j in order[1:]:
        nxt = []
        for y in layer:
            nxt.extend(all_extensions(DS, y, j))
        layer = nxt
    threads = sorted({tuple(y[i] for i in order) for y in layer})
    return ThreadSpace(DS, order, tuple(threads))


def full_extension(DS: DiscreteSystem, y: PartialThread) -> tuple:
    """Deterministic full thread extending ``y``."""
    for j in DS.index.elements:
        y = extend_partial_thread(DS, y, j)
    return tuple(y[i] for i in DS.index.elements)


@dataclass
class ThreadReport:
    size: int
    agrees_with_filtration: bool
    surjective: dict
    singleton_extensions: bool
    commutativity: bool
    correctness: bool
    witnesses: list

    @property
    def ok(self):
        return (
            self.agrees_with_filtration
            and all(self.surjective.values())
            and self.singleton_extensions
            and self.commutativity
            and self.correctness
        )

    def to_json(self):
        return {
            "ok": self.ok,
            "size": self.size,
            "agrees_with_filtration": self.agrees_with_filtration,
            "surjective": self.surjective,
            "singleton_extensions": self.singleton_extensions,
            "commutativity": self.commutativity,
            "correctness": self.correctness,
            "witnesses": self.witnesses,
        }


def thread_space(DS: DiscreteSystem, budget=None):
    """Constructive thread space, cross-checked against filtration of the full product.

    Also checks that every limit projection is onto (each singleton extends), and
    that commutativity and correctness hold for the system extended by the limit.
    """
    from .oracles import threads_by_filtration

    _check_budget(DS, budget)
    X = threads_by_extension(DS)
    oracle = threads_by_filtration(DS)
    witnesses = []
    agrees = set(X.threads) == set(oracle)
    if not agrees:
        witnesses.append({"symmetric_difference": sorted(set(X.threads) ^ set(oracle))[:5]})
    L, order = DS.index, X.order
    surjective = {i: {t[order.index(i)] for t in X.threads} == set(DS.spaces[i]) for i in order}
    singles = True
    members = set(X.threads)
    for i in order:
        for x in DS.spaces[i]:
            t = full_extension(DS, PartialThread.of(L, {i: x}))
            if t not in members or t[order.index(i)] != x:
                singles = False
                witnesses.append({"singleton": [i, x]})
    commutes = all(
        DS.p(i, j)(t[order.index(j)]) == t[order.index(i)]
        for t in X.threads
        for i, j in L.poset.pairs()
    )
    correct = True
    for a, i in enumerate(order):
        for j in order[a + 1 :]:
            m = L.meet(i, j)
            seen = {(t[order.index(i)], t[order.index(j)]) for t in X.threads}
            for xi in DS.spaces[i]:
                for xj in DS.spaces[j]:
                    if DS.p(m, i)(xi) == DS.p(m, j)(xj) and (xi, xj) not in seen:
                        correct = False
                        witnesses.append({"correctness": [i, j, xi, xj]})
    report = ThreadReport(len(X), agrees, surjective, singles, commutes, correct, witnesses)
    return X, report


# ---------------------------------------------------------------------------
# images of basic open sets


def box_image(DS: DiscreteSystem, F: ClosedSet, boxes: dict) -> dict:
    """Sets ``V_i`` (i in F) with ``p_i(A) = V_i`` for the box ``A`` cut out by ``boxes``.

    With one top ``i0``: ``V_i0`` is the part of ``U_i0`` whose projections stay in
    every box below, and ``V_i`` its projection.  With two tops the two such sets
    are first trimmed to a common projection onto ``i0 ^ i1``.
    """
    if not isinstance(F, ClosedSet) or set(closure(DS.index, F)) != set(F):
        raise PreconditionError("box_image needs a closed index set")
    if not F:
        return {}
    L = DS.index
    U = {i: frozenset(boxes.get(i, DS.spaces[i])) for i in F}

    def trimmed(top):
        return frozenset(
            x for x in U[top] if all(DS.p(i, top)(x) in U[i] for i in F if L.leq(i, top))
        )

    tops = top_elements(F)
    V = {}
    if len(tops) == 1:
        (i0,) = tops
        V[i0] = trimmed(i0)
        for i in F:
            V[i] = DS.p(i, i0).image(V[i0])
        return V
    i0, i1 = tops
    m = L.meet(i0, i1)
    pre = {t: trimmed(t) for t in tops}
    V[m] = DS.p(m, i0).image(pre[i0]) & DS.p(m, i1).image(pre[i1])
    for t in tops:
        V[t] = pre[t] & DS.p(m, t).preimage(V[m])
    for i in F:
        if i in tops:
            continue
        images = [DS.p(i, t).image(V[t]) for t in tops if L.leq(i, t)]
        if len(images) == 2 and images[0] != images[1]:
            raise AssertionError(f"V_{i} depends on the top used")
        V[i] = images[0]
    return V


def check_box_image(DS: DiscreteSystem, X: ThreadSpace, F: ClosedSet, boxes: dict):
    """Compare the recipe with brute-force images over the enumerated threads.

    Returns a dict of named failures (empty on success).
    """
    from .oracles import box_image_bruteforce

    V = box_image(DS, F, boxes)
    A, images = box_image_bruteforce(X, F, boxes)
    failures = {}
    L = DS.index
    for i in F:
        for j in F:
            if L.leq(i, j) and V[i] != DS.p(i, j).image(V[j]):
                failures.setdefault("projections", [i, j])
    trimmed = {t for t in X.threads if all(X.value(t, i) in V[i] for i in F)}
    if trimmed != A:
        failures["trimmed_box"] = sorted(trimmed ^ A)[:3]
    for i in F:
        if V[i] != images[i]:
            failures.setdefault("images", [i, sorted(V[i]), sorted(images[i])])
    return failures


# ---------------------------------------------------------------------------
# atoms of the limit algebra versus threads


@dataclass
class BridgeReport:
    coherent: bool
    injective: bool
    onto: bool
    witnesses: list

    @property
    def bijective(self):
        return self.coherent and self.injective and self.onto

    def to_json(self):
        return {
            "verdict": "bijective" if self.bijective else "broken",
            "coherent": self.coherent,
            "injective": self.injective,
            "onto": self.onto,
            "witnesses": self.witnesses,
        }


def duality_bridge(Lm, X: ThreadSpace) -> BridgeReport:
    """Send each limit atom to the thread of atoms above it and test bijectivity onto ``X``."""
    DS = X.system
    order = X.order
    witnesses = []
    image = {}
    coherent = True
    for c in Lm.algebra.atoms:
        t = tuple(Lm.limit_embedding[i](c) for i in order)
        if not all(DS.p(i, j)(t[order.index(j)]) == t[order.index(i)] for i, j in DS.index.poset.pairs()):
            coherent = False
            witnesses.append({"incoherent": [c, list(t)]})
        image[c] = t
    injective = len(set(image.values())) == len(image)
    if not injective:
        seen = {}
        for c, t in image.items():
            if t in seen:
                witnesses.append({"collision": [seen[t], c]})
                break
            seen[t] = c
    missing = set(X.threads) - set(image.values())
    onto = not missing and set(image.values()) <= set(X.threads)
    if missing:
        witnesses.append({"missed_thread": list(sorted(missing)[0])})
    return BridgeReport(coherent, injective, onto, witnesses)
