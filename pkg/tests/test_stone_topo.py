from __future__ import annotations

import random

import pytest

from amalgam.amal import amalgamated_limit
from amalgam.balg import FiniteBA, trivial
from amalgam.diagram import (
    BASystem,
    EmbeddingSquare,
    check_correct,
    generate_coordinate_system,
    random_square,
    squares_up_to,
)
from amalgam.oracles import box_image_bruteforce, threads_by_filtration
from amalgam.order import AlmostLattice, FinitePoset, PreconditionError, chain, closure
from amalgam.stone_topo import (
    BudgetExceeded,
    DiscreteSystem,
    PartialThread,
    all_extensions,
    box_image,
    check_box_image,
    check_topological_correctness,
    dualize,
    duality_bridge,
    extend_partial_thread,
    full_extension,
    is_coherent,
    system_violations,
    thread_space,
    threads_by_extension,
)


def diamond() -> AlmostLattice:
    return AlmostLattice.from_poset(
        FinitePoset(["m", "l", "r", "t"], [("m", "l"), ("m", "r"), ("l", "t"), ("r", "t"), ("m", "t")])
    )


def square_system(sq: EmbeddingSquare) -> BASystem:
    return BASystem(
        diamond(),
        {"m": sq.bottom, "l": sq.left, "r": sq.right, "t": sq.top},
        {("m", "l"): sq.left_to_bottom, ("m", "r"): sq.right_to_bottom, ("l", "t"): sq.top_to_left, ("r", "t"): sq.top_to_right},
    )


def missing_lift_system() -> DiscreteSystem:
    top = {"ac": ("a", "c"), "ad": ("a", "d"), "bc": ("b", "c")}
    return DiscreteSystem(
        diamond(),
        {"m": ["*"], "l": ["a", "b"], "r": ["c", "d"], "t": list(top)},
        {
            ("m", "l"): {"a": "*", "b": "*"},
            ("m", "r"): {"c": "*", "d": "*"},
            ("l", "t"): {k: v[0] for k, v in top.items()},
            ("r", "t"): {k: v[1] for k, v in top.items()},
        },
    )


# -- duality ---------------------------------------------------------------------------


def test_trivial_algebra_dualises_to_point():
    S = BASystem(chain(1), {"0": trivial()}, {})
    DS = dualize(S)
    assert DS.spaces["0"] == ("*",)


def test_product_square_dualises_to_product(two_by_three):
    DS = dualize(two_by_three)
    X, report = thread_space(DS)
    assert report.ok
    assert len(X) == 6
    assert {(X.value(t, "0"), X.value(t, "1")) for t in X.threads} == {
        (a, b) for a in DS.spaces["0"] for b in DS.spaces["1"]
    }


def test_algebraic_and_topological_correctness_agree():
    rng = random.Random(2)
    squares = list(squares_up_to(3)) + [random_square(rng) for _ in range(200)]
    for sq in squares:
        DS = dualize(square_system(sq))
        ok, _ = check_topological_correctness(DS, "l", "r")
        assert ok == check_correct(sq).correct


def test_one_point_spaces_are_correct():
    S = generate_coordinate_system(diamond(), {i: set() for i in "mlrt"}, {})
    assert check_topological_correctness(dualize(S), "l", "r") == (True, None)


def test_two_factor_dual_is_correct(two_by_two):
    assert not system_violations(dualize(two_by_two))


def test_missing_lift_reported():
    DS = missing_lift_system()
    assert check_topological_correctness(DS, "l", "r") == (False, ("b", "d"))
    assert system_violations(DS) == [("correctness", "l", "r", "b", "d")]


def test_correctness_needs_join(two_by_two):
    DS = dualize(two_by_two)
    with pytest.raises(PreconditionError):
        check_topological_correctness(DS, "0", "1")


def test_discrete_json_round_trip(grid):
    DS = dualize(grid)
    again = DiscreteSystem.from_json(DS.to_json())
    assert again.to_json() == DS.to_json()


# -- partial threads ---------------------------------------------------------------------------


def test_partial_thread_domain_must_be_closed(grid):
    DS = dualize(grid)
    with pytest.raises(PreconditionError):
        PartialThread.of(DS.index, {"(2,1)": DS.spaces["(2,1)"][0], "(1,2)": DS.spaces["(1,2)"][0]})


def test_extend_from_empty_picks_least_point(grid):
    DS = dualize(grid)
    y = PartialThread.of(DS.index, {})
    z = extend_partial_thread(DS, y, "(1,1)")
    assert set(z.domain) == {"(1,1)"}
    assert z["(1,1)"] == DS.spaces["(1,1)"][0]


def test_extend_above_single_index_lifts(grid):
    DS = dualize(grid)
    for x in DS.spaces["(1,0)"]:
        y = PartialThread.of(DS.index, {"(1,0)": x, "(0,0)": DS.p("(0,0)", "(1,0)")(x)})
        z = extend_partial_thread(DS, y, "(2,0)")
        assert DS.p("(1,0)", "(2,0)")(z["(2,0)"]) == x
        assert is_coherent(DS, z.as_dict())


def test_extension_from_two_tops_is_coherent(grid):
    DS = dualize(grid)
    L = DS.index
    F = closure(L, ["(2,1)", "(0,2)"])
    assert set(F.tops()) == {"(2,1)", "(0,2)"}
    X = threads_by_extension(DS)
    for t in X.threads[:: max(1, len(X) // 8)]:
        y = PartialThread.of(L, {i: X.value(t, i) for i in F})
        for j in L.elements:
            if j in F:
                continue
            z = extend_partial_thread(DS, y, j)
            assert is_coherent(DS, z.as_dict())
            assert all(z[i] == y[i] for i in F)
            assert set(z.domain) == set(closure(L, set(F) | {j}))


def test_extension_is_idempotent_on_domain(two_by_two):
    DS = dualize(two_by_two)
    y = PartialThread.of(DS.index, {"0^1": "*"})
    assert extend_partial_thread(DS, y, "0^1") is y


def test_all_extensions_from_empty_enumerate_points(grid):
    DS = dualize(grid)
    y = PartialThread.of(DS.index, {})
    for j in DS.index.elements:
        assert sorted(z[j] for z in all_extensions(DS, y, j)) == list(DS.spaces[j])


def test_full_extension_is_a_thread(small_grid):
    DS = dualize(small_grid)
    X = threads_by_extension(DS)
    for i in DS.index.elements:
        for x in DS.spaces[i]:
            t = full_extension(DS, PartialThread.of(DS.index, {i: x}))
            assert t in X.threads and X.value(t, i) == x


# -- thread spaces --------------------------------------------------------------------------------


def test_one_point_index_threads():
    S = BASystem(chain(1), {"0": FiniteBA(["p", "q", "r"])}, {})
    X, report = thread_space(dualize(S))
    assert report.ok and len(X) == 3


def test_grid_threads_match_limit_atoms(grid):
    DS = dualize(grid)
    X, report = thread_space(DS)
    assert report.ok
    assert len(X) == len(amalgamated_limit(grid).algebra) == 16


def test_constructive_threads_match_filtration(suite_systems):
    for S in suite_systems[:100]:
        DS = dualize(S)
        assert set(threads_by_extension(DS).threads) == set(threads_by_filtration(DS))


def test_single_pass_extension_never_backtracks(suite_systems):
    for S in suite_systems[:100]:
        DS = dualize(S)
        threads = set(threads_by_extension(DS).threads)
        for i in DS.index.elements:
            for x in DS.spaces[i]:
                t = full_extension(DS, PartialThread.of(DS.index, {i: x}))
                assert t in threads


def test_thread_budget(grid):
    with pytest.raises(BudgetExceeded) as exc:
        thread_space(dualize(grid), budget=100)
    assert exc.value.bound == dualize(grid).product_size()


# -- box images ------------------------------------------------------------------------------------


def test_full_boxes_give_full_images(grid):
    DS = dualize(grid)
    X = threads_by_extension(DS)
    F = closure(DS.index, DS.index.elements)
    V = box_image(DS, F, {})
    assert all(V[i] == frozenset(DS.spaces[i]) for i in F)
    A, _ = box_image_bruteforce(X, F, {})
    assert A == set(X.threads)


def test_empty_box_empties_everything(grid):
    DS = dualize(grid)
    X = threads_by_extension(DS)
    F = closure(DS.index, ["(2,1)", "(1,2)"])
    boxes = {"(1,1)": []}
    V = box_image(DS, F, boxes)
    assert all(not V[i] for i in F)
    assert not box_image_bruteforce(X, F, boxes)[0]


def test_box_image_needs_closed_set(grid):
    DS = dualize(grid)
    with pytest.raises(PreconditionError):
        box_image(DS, frozenset({"(2,1)", "(1,2)"}), {})


def test_random_boxes_on_grid(grid):
    DS = dualize(grid)
    X = threads_by_extension(DS)
    rng = random.Random(9)
    els = DS.index.elements
    for _ in range(200):
        F = closure(DS.index, rng.sample(els, rng.randint(1, len(els))))
        boxes = {i: rng.sample(DS.spaces[i], rng.randint(0, len(DS.spaces[i]))) for i in F}
        assert check_box_image(DS, X, F, boxes) == {}


# -- bridge -------------------------------------------------------------------------------------------


def test_bridge_on_one_point_index():
    S = BASystem(chain(1), {"0": FiniteBA(["p", "q"])}, {})
    Lm = amalgamated_limit(S)
    X, _ = thread_space(dualize(S))
    assert duality_bridge(Lm, X).bijective


def test_bridge_on_two_factor_system(two_by_three):
    Lm = amalgamated_limit(two_by_three)
    X, _ = thread_space(dualize(two_by_three))
    report = duality_bridge(Lm, X)
    assert report.bijective and report.to_json()["verdict"] == "bijective"


def test_bridge_detects_missing_thread(two_by_three):
    Lm = amalgamated_limit(two_by_three)
    X, _ = thread_space(dualize(two_by_three))
    X.threads = X.threads + (("zz", "zz", "zz"),)
    report = duality_bridge(Lm, X)
    assert not report.onto and report.witnesses
