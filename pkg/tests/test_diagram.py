from __future__ import annotations

import random

import pytest

from amalgam.amal import amalgamated_limit, isomorphism_over
from amalgam.balg import AtomMap, FiniteBA, free_product, identity, trivial
from amalgam.diagram import (
    BASystem,
    EmbeddingSquare,
    NonCommutingSquare,
    bottom_is_intersection,
    check_correct,
    direct_limit,
    generate_coordinate_system,
    grid_coordinate_system,
    random_coordinate_system,
    random_square,
    restrict,
    squares_up_to,
    two_factor_system,
    validate_system,
)
from amalgam.order import FinitePoset, AlmostLattice, PreconditionError, chain, closure, three_element


def product_square(m, n):
    A, B = FiniteBA([f"a{k}" for k in range(m)]), FiniteBA([f"b{k}" for k in range(n)])
    T = trivial()
    P, to_a, to_b = free_product(A, B)
    return EmbeddingSquare(
        T, A, B, P,
        AtomMap(A, T, {a: "*" for a in A.atoms}),
        AtomMap(B, T, {b: "*" for b in B.atoms}),
        to_a, to_b,
    )


def test_product_square_is_correct():
    rep = check_correct(product_square(2, 3))
    assert rep.agree and rep.correct


def test_identity_square_is_correct():
    A = FiniteBA(["x", "y", "z"])
    i = identity(A)
    rep = check_correct(EmbeddingSquare(A, A, A, A, i, i, i, i))
    assert rep.agree and rep.correct


def test_non_commuting_square_rejected():
    sq = EmbeddingSquare.from_partitions(2, [[0], [1]], [[0], [1]], [[0], [1]])
    bad = EmbeddingSquare(
        sq.bottom, sq.left, sq.right, sq.top,
        AtomMap(sq.left, sq.bottom, {"l0": "b1", "l1": "b0"}),
        sq.right_to_bottom, sq.top_to_left, sq.top_to_right,
    )
    assert not bad.commutes()
    with pytest.raises(NonCommutingSquare):
        check_correct(bad)


def test_incorrect_square_with_bottom_equal_to_intersection():
    sq = EmbeddingSquare.from_partitions(3, [[0, 1], [2]], [[1], [0, 2]], [[0, 1, 2]])
    rep = check_correct(sq)
    assert rep.agree and not rep.correct
    assert bottom_is_intersection(sq)


def test_exhaustive_search_finds_incorrect_intersection_square():
    found = [sq for sq in squares_up_to(4) if bottom_is_intersection(sq) and not check_correct(sq).correct]
    assert found
    assert min(len(sq.top) for sq in found) == 3


def test_square_count_up_to_three_atoms():
    assert len(list(squares_up_to(3))) == 44


def test_conditions_agree_on_all_small_squares():
    for sq in squares_up_to(3):
        assert sq.commutes()
        assert check_correct(sq).agree


def test_conditions_agree_on_random_squares():
    rng = random.Random(11)
    correct = 0
    for _ in range(300):
        sq = random_square(rng)
        rep = check_correct(sq)
        assert rep.agree
        correct += rep.correct
    assert 0 < correct < 300


def test_correct_squares_have_intersection_bottom():
    rng = random.Random(5)
    squares = list(squares_up_to(3)) + [random_square(rng) for _ in range(200)]
    for sq in squares:
        if check_correct(sq).correct:
            assert bottom_is_intersection(sq)


# -- systems -----------------------------------------------------------------------


def test_one_point_system_valid():
    L = chain(1)
    S = BASystem(L, {"0": FiniteBA(["p", "q"])}, {})
    assert validate_system(S).valid


def test_two_factor_system_valid(two_by_two):
    assert validate_system(two_by_two).valid
    assert two_by_two.atom_counts() == {"0": 2, "1": 2, "0^1": 1}


def test_non_surjective_map_named():
    L = chain(2)
    A0, A1 = FiniteBA(["p", "q"]), FiniteBA(["r", "s"])
    S = BASystem(L, {"0": A0, "1": A1}, {("0", "1"): AtomMap(A1, A0, {"r": "p", "s": "p"})})
    report = validate_system(S)
    assert not report.valid
    v = report.violations[0]
    assert v.law == "surjectivity" and v.witness[:2] == ("0", "1")


def test_missing_map_reported():
    L = three_element()
    S = BASystem(L, {"0": FiniteBA(["x"]), "1": FiniteBA(["y"]), "0^1": trivial()}, {})
    assert validate_system(S).violations[0].law == "missing map"


def test_incorrect_join_square_reported():
    sq = EmbeddingSquare.from_partitions(3, [[0, 1], [2]], [[1], [0, 2]], [[0, 1, 2]])
    P = FinitePoset(["m", "l", "r", "t"], [("m", "l"), ("m", "r"), ("l", "t"), ("r", "t"), ("m", "t")])
    L = AlmostLattice.from_poset(P)
    S = BASystem(
        L,
        {"m": sq.bottom, "l": sq.left, "r": sq.right, "t": sq.top},
        {("m", "l"): sq.left_to_bottom, ("m", "r"): sq.right_to_bottom, ("l", "t"): sq.top_to_left, ("r", "t"): sq.top_to_right},
    )
    report = validate_system(S, fail_fast=False)
    assert [v.law for v in report.violations] == ["correctness"]


def test_system_json_round_trip(grid):
    S = BASystem.from_json(grid.to_json())
    assert S.to_json() == grid.to_json()
    assert validate_system(S).valid


def test_all_empty_coordinates_give_trivial_algebras():
    L = three_element()
    S = generate_coordinate_system(L, {i: set() for i in L.elements}, {})
    assert set(S.atom_counts().values()) == {1}


def test_bad_assignment_rejected():
    L = three_element()
    with pytest.raises(ValueError):
        generate_coordinate_system(L, {"0": {"c"}, "1": {"c"}, "0^1": set()}, {"c": 2})


def test_grid_system_shape(grid):
    assert len(grid.index) == 8
    assert validate_system(grid).valid
    assert grid.atom_counts()["(2,1)"] == 8 and grid.atom_counts()["(1,2)"] == 8


def test_generator_is_deterministic():
    a = random_coordinate_system(17).system.to_json()
    b = random_coordinate_system(17).system.to_json()
    assert a == b


def test_generator_budgets():
    for seed in range(60):
        S = random_coordinate_system(seed, max_index_size=4, max_fiber=2, product_budget=500, max_atoms=4).system
        assert len(S.index) <= 4
        assert max(S.atom_counts().values()) <= 4
        assert S.product_size() <= 500
    with pytest.raises(ValueError):
        random_coordinate_system(0, max_index_size=7)
    with pytest.raises(ValueError):
        random_coordinate_system(0, product_budget=0)


def test_generated_systems_validate(suite_systems):
    for S in suite_systems:
        assert len(S.index) <= 6
        assert validate_system(S).valid


# -- direct limits --------------------------------------------------------------------


def test_direct_limit_of_singleton_and_chain(grid):
    A, maps = direct_limit(grid, ["(1,1)"])
    assert A == grid.algebras["(1,1)"]
    A, maps = direct_limit(grid, ["(0,0)", "(1,0)", "(2,0)", "(2,1)"])
    assert A == grid.algebras["(2,1)"]
    assert maps["(1,0)"] == grid.maps["(1,0)", "(2,1)"]


def test_direct_limit_needs_directed_set(grid):
    with pytest.raises(PreconditionError):
        direct_limit(grid, ["(2,1)", "(1,2)"])


def test_direct_limit_matches_limit_of_lattice_subindex(suite_systems):
    checked = 0
    for S in suite_systems[:80]:
        for i in S.index.elements:
            K = sorted(S.index.poset.down(i))
            sub = restrict(S, K)
            A, maps = direct_limit(S, K)
            assert isomorphism_over(amalgamated_limit(sub), A, maps) is not None
            checked += 1
    assert checked > 80


def test_restrict_needs_closed_subset(grid):
    with pytest.raises(PreconditionError):
        restrict(grid, ["(2,1)", "(1,2)"])


def test_restrict_to_closure(grid):
    K = closure(grid.index, ["(2,0)", "(0,2)"])
    assert validate_system(restrict(grid, K)).valid


def test_two_factor_fixture(two_by_three):
    assert two_by_three.atom_counts() == {"0": 2, "1": 3, "0^1": 1}
    assert two_factor_system(2, 3).to_json() == two_by_three.to_json()


def test_seeded_grid_hides_structure():
    S = grid_coordinate_system(1, 1, seed=3)
    assert all(":" in a for A in S.algebras.values() for a in A.atoms)
    assert validate_system(S).valid
