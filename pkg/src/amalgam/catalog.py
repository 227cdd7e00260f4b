"""Exhaustive catalogues of small structures: posets up to isomorphism,
almost-lattices, set partitions, preorders."""

from __future__ import annotations

import random
from functools import lru_cache
from itertools import combinations, permutations

from .order import AlmostLattice, FinitePoset, check_almost_lattice


def _is_transitive(n, rel):
    for a, b in rel:
        for c in range(n):
            if (b, c) in rel and (a, c) not in rel:
                return False
    return True


def naturally_labelled_posets(n: int):
    """Yield every strict order on range(n) contained in the natural order.

    Every finite poset has a linear extension, so this covers all posets up to
    isomorphism (with repetitions).
    """
    slots = list(combinations(range(n), 2))
    for bits in range(1 << len(slots)):
        rel = {slots[k] for k in range(len(slots)) if bits >> k & 1}
        if _is_transitive(n, rel):
            yield frozenset(rel)


def _canonical(n, rel):
    best = None
    for perm in permutations(range(n)):
        key = tuple(sorted((perm[a], perm[b]) for a, b in rel))
        if best is None or key < best:
            best = key
    return best


def _invariant(n, rel):
    up = [0] * n
    down = [0] * n
    for a, b in rel:
        up[a] += 1
        down[b] += 1
    return tuple(sorted(zip(up, down)))


def up_to_iso(n, relations):
    """Drop isomorphic duplicates from a collection of strict orders on range(n)."""
    seen = set()
    out = []
    for rel in relations:
        key = (_invariant(n, rel), _canonical(n, rel))
        if key not in seen:
            seen.add(key)
            out.append(rel)
    return out


def to_poset(n, rel) -> FinitePoset:
    return FinitePoset([str(k) for k in range(n)], [(str(a), str(b)) for a, b in rel])


@lru_cache(maxsize=None)
def posets_up_to_iso(n: int) -> tuple:
    """All posets with exactly ``n`` elements, one per isomorphism class."""
    return tuple(to_poset(n, rel) for rel in up_to_iso(n, naturally_labelled_posets(n)))


@lru_cache(maxsize=None)
def labelled_posets(n: int) -> tuple:
    """All partial orders on the labelled set {0..n-1}."""
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    out = []
    for bits in range(1 << len(pairs)):
        rel = {pairs[k] for k in range(len(pairs)) if bits >> k & 1}
        if any((b, a) in rel for a, b in rel):
            continue
        if _is_transitive(n, rel):
            out.append(to_poset(n, rel))
    return tuple(out)


@lru_cache(maxsize=None)
def almost_lattices_up_to_iso(n: int) -> tuple:
    """All distributive almost-lattices with ``n`` elements up to isomorphism."""
    good = []
    for rel in naturally_labelled_posets(n):
        if check_almost_lattice(to_poset(n, rel)).verdict:
            good.append(rel)
    return tuple(AlmostLattice.from_poset(to_poset(n, rel)) for rel in up_to_iso(n, good))


def almost_lattice_catalogue(max_size: int) -> tuple:
    out = []
    for n in range(1, max_size + 1):
        out.extend(almost_lattices_up_to_iso(n))
    return tuple(out)


def set_partitions(items):
    """Yield all set partitions of ``items`` as tuples of tuples."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield ((first,),) + part
        for k in range(len(part)):
            yield part[:k] + ((first,) + part[k],) + part[k + 1 :]


def coarsens(coarse, fine) -> bool:
    """True if every block of ``fine`` lies inside a block of ``coarse``."""
    owner = {x: k for k, block in enumerate(coarse) for x in block}
    return all(len({owner[x] for x in block}) == 1 for block in fine)


def random_preorder(rng: random.Random, n: int, density: float = 0.35):
    """A random preorder on range(n) as a reflexive, transitive boolean matrix (list of lists)."""
    rel = [[a == b or rng.random() < density for b in range(n)] for a in range(n)]
    for k in range(n):
        for a in range(n):
            if rel[a][k]:
                row = rel[k]
                for b in range(n):
                    if row[b]:
                        rel[a][b] = True
    return rel
