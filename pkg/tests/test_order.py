from __future__ import annotations

import random
from itertools import combinations, product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from amalgam.catalog import almost_lattice_catalogue, posets_up_to_iso
from amalgam.order import (
    AlmostLattice,
    ClosedSet,
    FinitePoset,
    InvalidOrder,
    PreconditionError,
    add_top,
    chain,
    check_almost_lattice,
    closure,
    grid_coordinates,
    grid_id,
    grid_index_set,
    poset_from_json,
    three_element,
    top_elements,
    validate_poset,
)


def vee() -> FinitePoset:
    return FinitePoset(["bot", "a", "b"], [("bot", "a"), ("bot", "b")])


# -- validate_poset -----------------------------------------------------------


def test_chain_is_valid():
    P = validate_poset(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])
    assert P.leq("a", "c") and P.leq("b", "b") and not P.leq("c", "a")


def test_two_cycle_reports_antisymmetry():
    with pytest.raises(InvalidOrder) as exc:
        validate_poset(["a", "b"], [("a", "b"), ("b", "a")])
    laws = {(v.law, v.witness) for v in exc.value.violations}
    assert ("antisymmetry", ("a", "b")) in laws


def test_missing_composite_reports_transitivity():
    with pytest.raises(InvalidOrder) as exc:
        validate_poset(["a", "b", "c"], [("a", "b"), ("b", "c")])
    assert [(v.law, v.witness) for v in exc.value.violations] == [("transitivity", ("a", "b", "c"))]


def test_empty_poset_rejected():
    with pytest.raises(InvalidOrder):
        validate_poset([], [])


def test_json_round_trip():
    P = grid_index_set(2, 1).poset
    assert poset_from_json(P.to_json()) == P


# -- axioms ---------------------------------------------------------------------


def test_three_element_index_is_almost_lattice():
    assert check_almost_lattice(three_element().poset).verdict


def test_antichain_fails_meet_axiom():
    report = check_almost_lattice(FinitePoset(["a", "b", "c"], []))
    assert not report.verdict
    assert not report.holds["i"]
    assert tuple(report.witnesses["i"]) == ("a", "b")


def test_grid_two_by_two_is_almost_lattice():
    assert check_almost_lattice(grid_index_set(2, 2).poset).verdict


def test_vee_is_almost_lattice():
    L = AlmostLattice.from_poset(vee())
    assert L.join("a", "b") is None
    assert L.meet("a", "b") == "bot"


def test_non_almost_lattice_raises_on_construction():
    with pytest.raises(PreconditionError):
        AlmostLattice.from_poset(FinitePoset(["a", "b", "c"], []))


@pytest.mark.parametrize("L", almost_lattice_catalogue(5), ids=lambda L: f"n{len(L)}")
def test_meet_and_join_laws(L):
    els = L.elements
    for a, b in product(els, repeat=2):
        assert L.meet(a, b) == L.meet(b, a)
        assert L.join(a, b) == L.join(b, a)
        m = L.meet(a, b)
        assert L.leq(m, a) and L.leq(m, b)
    for a in els:
        assert L.meet(a, a) == a and L.join(a, a) == a
    for a, b, c in product(els, repeat=3):
        assert L.meet(L.meet(a, b), c) == L.meet(a, L.meet(b, c))
        ab, bc = L.join(a, b), L.join(b, c)
        if ab is not None and bc is not None:
            left, right = L.join(ab, c), L.join(a, bc)
            assert left == right


# -- add_top --------------------------------------------------------------------


def test_add_top_to_three_element_gives_diamond():
    ext = add_top(three_element())
    assert len(ext.poset) == 4
    assert ext.lattice_verdict and ext.agrees and not ext.degenerate


def test_add_top_to_vee_gives_square():
    ext = add_top(vee(), top="T")
    assert ext.top == "T"
    assert ext.lattice_verdict and ext.axioms_v_vi
    assert set(ext.poset.up("bot")) == {"bot", "a", "b", "T"}


def test_add_top_flags_existing_maximum():
    assert add_top(chain(3)).degenerate


def test_add_top_needs_first_four_axioms():
    with pytest.raises(PreconditionError, match=r"axiom \(i\)"):
        add_top(FinitePoset(["a", "b", "c"], []))


def test_add_top_rejects_used_id():
    with pytest.raises(PreconditionError):
        add_top(vee(), top="a")


def _first_four_posets(max_n):
    for n in range(1, max_n + 1):
        for P in posets_up_to_iso(n):
            if check_almost_lattice(P).first_four():
                yield P


def test_failing_fifth_or_sixth_axiom_gives_no_lattice():
    failing = [P for P in _first_four_posets(5) if not add_top(P).axioms_v_vi]
    assert failing, "exhaustive search found no poset failing (v) or (vi)"
    assert all(not add_top(P).lattice_verdict for P in failing)


def test_add_top_agrees_with_last_two_axioms_exhaustively():
    checked = 0
    for P in _first_four_posets(5):
        assert add_top(P).agrees, P
        checked += 1
    assert checked > 0


# -- closure and tops -----------------------------------------------------------


def test_closure_of_empty_and_singletons():
    L = grid_index_set(2, 2)
    assert closure(L, []) == frozenset()
    for i in L.elements:
        assert closure(L, [i]) == {i}


def test_closure_of_grid_tops_contains_their_meet():
    L = grid_index_set(2, 2)
    assert "(1,1)" in closure(L, ["(2,1)", "(1,2)"])


def test_top_elements():
    L = three_element()
    assert top_elements(closure(L, ["0"])) == ("0",)
    assert set(top_elements(closure(L, L.elements))) == {"0", "1"}
    C = chain(4)
    assert top_elements(closure(C, ["0", "2"])) == ("2",)


def test_top_elements_needs_closed_set():
    with pytest.raises(PreconditionError):
        top_elements(frozenset({"0"}))


def test_non_closed_carrier_rejected():
    with pytest.raises(PreconditionError):
        ClosedSet(three_element(), {"0", "1"})


catalogue = almost_lattice_catalogue(6)


@given(st.integers(0, len(catalogue) - 1), st.data())
def test_closure_is_a_closure_operator(k, data):
    L = catalogue[k]
    els = list(L.elements)
    A = set(data.draw(st.sets(st.sampled_from(els))))
    B = A | set(data.draw(st.sets(st.sampled_from(els))))
    cA, cB = closure(L, A), closure(L, B)
    assert A <= cA
    assert cA <= cB
    assert closure(L, cA) == cA
    if cA:
        tops = top_elements(cA)
        assert len(tops) in (1, 2)
        if len(tops) == 2:
            assert not L.has_join(*tops)


def test_every_closed_set_has_at_most_two_tops():
    for L in almost_lattice_catalogue(5):
        els = L.elements
        for r in range(1, len(els) + 1):
            for F in combinations(els, r):
                if set(closure(L, F)) == set(F):
                    assert len(top_elements(ClosedSet(L, F))) <= 2


# -- grids ----------------------------------------------------------------------


def test_grid_one_by_one_is_three_element():
    L = grid_index_set(1, 1)
    assert len(L) == 3
    assert L.bottom == "(0,0)"
    assert set(L.tops()) == {"(1,0)", "(0,1)"}
    assert not L.has_join("(1,0)", "(0,1)")


def test_grid_one_by_two():
    L = grid_index_set(1, 2)
    assert set(L.elements) == {"(0,0)", "(1,0)", "(0,1)", "(1,1)", "(0,2)"}
    assert set(L.tops()) == {"(1,1)", "(0,2)"}


@pytest.mark.parametrize("beta,delta", [(b, d) for b in range(1, 5) for d in range(1, 5)])
def test_grid_sizes_and_axioms(beta, delta):
    L = grid_index_set(beta, delta)
    assert len(L) == (beta + 1) * (delta + 1) - 1
    assert check_almost_lattice(L.poset).verdict


def test_grid_rejects_empty():
    with pytest.raises(PreconditionError):
        grid_index_set(0, 0)


def test_grid_ids_round_trip():
    assert grid_coordinates(grid_id(3, 7)) == (3, 7)


def test_random_relabelling_keeps_verdict():
    rng = random.Random(4)
    for L in almost_lattice_catalogue(5):
        names = {x: f"x{rng.randrange(10**6)}_{x}" for x in L.elements}
        P = FinitePoset(names.values(), [(names[a], names[b]) for a, b in L.poset.pairs()])
        assert check_almost_lattice(P).verdict
