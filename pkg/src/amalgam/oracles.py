"""Brute-force reference computations.

Each function here recomputes something from its definition, without the
shortcuts used by the fast paths, so the two can be compared.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .balg import AtomMap, BAElement, FinitePreorder
from .diagram import BASystem


# ---------------------------------------------------------------------------
# projections


def projection_by_infimum(e: AtomMap, b: BAElement) -> BAElement:
    """Meet of all elements of the smaller algebra whose embedding lies above ``b``."""
    target = e.target
    out = target.full
    for a in range(target.full + 1):
        if b.mask & ~e.embed_mask(a) == 0:
            out &= a
    return BAElement(target, out)


# ---------------------------------------------------------------------------
# regular open algebras


class OracleBudget(ValueError):
    pass


def regular_open_algebra(P: FinitePreorder, limit: int | None = None):
    """Enumerate the regular open down-sets of ``P`` under the cone topology.

    Open sets are down-sets; the closure of U is the set of p whose cone meets U,
    the interior of S the set of p whose cone lies in S.  The regular open sets
    are the fixed points of the closure operator U -> int(cl(down(U))), listed
    in lectic order.  Returns (ro_sets, atoms, dense) where ``dense[p]`` is
    int(cl(cone(p))); sets are bitmasks over element indices.  ``limit`` caps
    the number of sets enumerated.
    """
    n = len(P)
    leq = P.leq
    cones = [sum(1 << int(q) for q in np.flatnonzero(leq[:, p])) for p in range(n)]
    full = (1 << n) - 1

    def down(U):
        out = 0
        for p in range(n):
            if U >> p & 1:
                out |= cones[p]
        return out

    def cl(U):
        return sum(1 << p for p in range(n) if cones[p] & U)

    def interior(S):
        return sum(1 << p for p in range(n) if cones[p] & ~S == 0)

    def k(U):
        return interior(cl(down(U)))

    # NextClosure; element 0 is the most significant position
    ro = [k(0)]
    A = ro[0]
    while A != full:
        for i in reversed(range(n)):
            bit = 1 << i
            if A & bit:
                continue
            lo = bit - 1
            B = k((A & lo) | bit)
            if B & lo & ~A == 0:
                A = B
                break
        ro.append(A)
        if limit is not None and len(ro) > limit:
            raise OracleBudget(f"more than {limit} regular open sets")
    nonempty = [U for U in ro if U]
    atoms = sorted(U for U in nonempty if not any(V != U and V & ~U == 0 for V in nonempty))
    dense = [interior(cl(cones[p])) for p in range(n)]
    return ro, atoms, dense


def compare_completion(P: FinitePreorder, completion, limit: int | None = None) -> list:
    """Differences between a minimal-class completion and the enumerated regular-open algebra."""
    ro, atoms, dense = regular_open_algebra(P, limit)
    problems = []
    if len(atoms) != len(completion.algebra):
        problems.append(f"atom count {len(completion.algebra)} vs {len(atoms)}")
        return problems
    if len(ro) != 2 ** len(atoms):
        problems.append(f"{len(ro)} regular open sets for {len(atoms)} atoms")
    # atom of the completion for class c  <->  regular open set generated by its cone
    match = {}
    for k, cls in enumerate(completion.classes):
        rep = cls[0]
        target = dense[rep]
        if target not in atoms:
            problems.append(f"class {k} does not generate an atom")
            return problems
        match[k] = atoms.index(target)
    if len(set(match.values())) != len(atoms):
        problems.append("class-to-atom correspondence not bijective")
        return problems
    for p in range(len(P)):
        mine = {match[k] for k in range(len(completion.classes)) if completion.dense[p] >> k & 1}
        theirs = {a for a, U in enumerate(atoms) if U & ~dense[p] == 0}
        if mine != theirs:
            problems.append(f"dense image of element {p} differs")
            break
    return problems


# ---------------------------------------------------------------------------
# the condition order with every witness


def identification_classes(S: BASystem):
    """Union-find over all (index, element) pairs glued along the embeddings.

    Returns a dict (index, mask) -> class representative.
    """
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, A in S.algebras.items():
        for m in range(1, A.full + 1):
            parent[i, m] = (i, m)
    for (i, j), e in S.maps.items():
        if i == j:
            continue
        for m in range(1, S.algebras[i].full + 1):
            a, b = find((i, m)), find((j, e.embed_mask(m)))
            if a != b:
                parent[max(a, b)] = min(a, b)
    return {x: find(x) for x in parent}


def existential_order(cs) -> np.ndarray:
    """The four-case order where both conditions may use any of their witnesses.

    ``h^{i'}_{i' ^ i}(x) <= y`` is evaluated literally: embed ``x`` into its witness
    algebra, project to the meet of witnesses, embed into the other witness algebra.
    """
    S = cs.system
    idx = S.index.elements
    n_idx = len(idx)
    pos = {i: k for k, i in enumerate(idx)}
    U = len(cs.elements)
    D = len(cs)
    masks = np.array([m for _, m in cs.elements], dtype=np.int64)
    homes = [h for h, _ in cs.elements]

    # lifted[u, w]: mask of element u inside A_w (or -1 when u is not in A_w)
    lifted = np.full((U, n_idx), -1, dtype=np.int64)
    for u, h in enumerate(homes):
        for w in S.index.poset.up(h):
            lifted[u, pos[w]] = S.maps[h, w].embed_mask(int(masks[u]))

    # T[a, b][x, y]: x at witness a lies below y at witness b
    T = {}
    for a, b in product(idx, repeat=2):
        m = S.index.meet(a, b)
        xa, yb = lifted[:, pos[a]], lifted[:, pos[b]]
        ok_x, ok_y = xa >= 0, yb >= 0
        proj = S.maps[m, a].project_masks(np.where(ok_x, xa, 0))
        up = S.maps[m, b].embed_masks(proj)
        rel = (up[:, None] & ~yb[None, :]) == 0
        T[a, b] = rel & ok_x[:, None] & ok_y[None, :]

    W = np.zeros((D, n_idx, n_idx), dtype=bool)
    for d in range(D):
        for i, j in cs.witnesses(d):
            W[d, pos[i], pos[j]] = True

    P, Q = cs.P, cs.Q
    out = np.zeros((D, D), dtype=bool)
    used = [(i, j) for i in idx for j in idx if W[:, pos[i], pos[j]].any()]
    for i1, j1 in used:
        rows = W[:, pos[i1], pos[j1]]
        r = np.flatnonzero(rows)
        for i2, j2 in used:
            cols = np.flatnonzero(W[:, pos[i2], pos[j2]])
            p1, q1 = P[r][:, None], Q[r][:, None]
            p2, q2 = P[cols][None, :], Q[cols][None, :]
            pp = T[i1, i2][p1, p2]
            qq = T[j1, j2][q1, q2]
            qp = T[j1, i2][q1, p2]
            pq = T[i1, j2][p1, q2]
            block = (pp & qq) | (qp & pq) | (pp & pq) | (qp & qq)
            out[np.ix_(r, cols)] |= block
    return out


def universal_order(cs) -> np.ndarray:
    """Like ``existential_order`` but requiring the verdict for every witness pair."""
    S = cs.system
    from .amal import leq_with_witnesses

    D = len(cs)
    out = np.ones((D, D), dtype=bool)
    wit = [cs.witnesses(d) for d in range(D)]
    el = cs.elements
    for d1 in range(D):
        p1, q1 = el[cs.P[d1]], el[cs.Q[d1]]
        for d2 in range(D):
            p2, q2 = el[cs.P[d2]], el[cs.Q[d2]]
            out[d1, d2] = all(
                leq_with_witnesses(S, p1, q1, w1, p2, q2, w2) for w1 in wit[d1] for w2 in wit[d2]
            )
    return out


def transitivity_failures(M: np.ndarray):
    """Pairs (a, c) with a <= b <= c for some b but not a <= c."""
    comp = (M.astype(np.float32) @ M.astype(np.float32)) > 0
    return np.argwhere(comp & ~M)


# ---------------------------------------------------------------------------
# threads


def threads_by_filtration(DS) -> list:
    """Filter the full product of the spaces down to the coherent assignments."""
    order = DS.index.elements
    pos = {i: k for k, i in enumerate(order)}
    pairs = [(pos[i], pos[j], DS.p(i, j).table) for i, j in DS.index.poset.strict_pairs()]
    out = []
    for t in product(*(DS.spaces[i] for i in order)):
        if all(table[t[b]] == t[a] for a, b, table in pairs):
            out.append(t)
    return out


def box_image_bruteforce(X, F, boxes):
    """The box ``A`` inside the threads and its image at each index of ``F``."""
    order = X.order
    DS = X.system
    U = {i: set(boxes.get(i, DS.spaces[i])) for i in F}
    A = {t for t in X.threads if all(t[order.index(i)] in U[i] for i in F)}
    images = {i: frozenset(t[order.index(i)] for t in A) for i in F}
    return A, images
