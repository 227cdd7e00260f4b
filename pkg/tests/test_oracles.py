from __future__ import annotations

import random

import numpy as np
import pytest

from amalgam import oracles
from amalgam.balg import FinitePreorder, regular_open_completion
from amalgam.catalog import labelled_posets, random_preorder


def naive_regular_open(P: FinitePreorder):
    """Every subset, kept when it equals int(cl(U))."""
    n = len(P)
    cones = [{int(q) for q in np.flatnonzero(P.leq[:, p])} for p in range(n)]

    def cl(U):
        return {p for p in range(n) if cones[p] & U}

    def interior(S):
        return {p for p in range(n) if cones[p] <= S}

    out = set()
    for bits in range(1 << n):
        U = {p for p in range(n) if bits >> p & 1}
        if interior(cl(U)) == U:
            out.add(bits)
    return out


def poset_matrix(P):
    idx = {x: k for k, x in enumerate(P.elements)}
    M = np.eye(len(P), dtype=bool)
    for a, b in P.pairs():
        M[idx[a], idx[b]] = True
    return FinitePreorder(range(len(P)), M)


def test_lectic_enumeration_matches_subset_enumeration():
    rng = random.Random(3)
    for _ in range(300):
        n = rng.randint(1, 7)
        P = FinitePreorder(range(n), random_preorder(rng, n, rng.random()))
        ro, _, _ = oracles.regular_open_algebra(P)
        assert len(ro) == len(set(ro))
        assert set(ro) == naive_regular_open(P)


def test_regular_open_sets_form_boolean_algebra():
    for P in labelled_posets(3):
        ro, atoms, _ = oracles.regular_open_algebra(poset_matrix(P))
        assert len(ro) == 2 ** len(atoms)


def test_enumeration_limit():
    P = FinitePreorder(range(6), np.eye(6, dtype=bool))
    with pytest.raises(oracles.OracleBudget):
        oracles.regular_open_algebra(P, limit=10)


def test_completion_comparison_flags_perturbation():
    P = FinitePreorder(range(3), np.eye(3, dtype=bool))
    comp = regular_open_completion(P)
    assert oracles.compare_completion(P, comp) == []
    import dataclasses

    broken = dataclasses.replace(comp, dense=(comp.dense[1],) + comp.dense[1:])
    assert oracles.compare_completion(P, broken)


def test_transitivity_failures():
    M = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=bool)
    assert [tuple(x) for x in oracles.transitivity_failures(M)] == [(0, 2)]
