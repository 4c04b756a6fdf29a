import random
from fractions import Fraction
from math import gcd

import pytest
from hypothesis import given, settings, strategies as st

from caristi.codes import eval_continuous, eval_lsc
from caristi.errors import StageOutOfRange, TableExhausted, TreeTooShallow, TruncationError
from caristi.gadgets import (
    BaireGadget,
    CantorGadget,
    FiniteTree,
    InjectionTable,
    IntervalGadget,
    manifest,
    path_defect_potential,
    projection_stem,
    random_injection,
    tilde,
    valid_cantor_trees,
)
from caristi.metric import BAIRE, CANTOR, Seq, constant, dist_bounds
from caristi.solvers import verify_caristi
from conftest import half

# a binary tree cut at depth 6: the 1-side stops early, the 0-side runs to the frontier
HAND_TREE = FiniteTree(
    [(), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1), (0, 0, 0), (0, 0, 1), (1, 1, 0)]
    + [(0, 0, 0) + (0,) * k for k in range(1, 4)]
    + [(0, 0, 1, 0), (0, 0, 1, 1)]
)


# -- independent oracle for the Cantor construction


def oracle_A(nodes, sigma):
    level = [t for t in nodes if len(t) == len(sigma) + 1]
    return {i for i in range(len(sigma)) if all(t[: i + 1] != sigma[:i] + (1 - sigma[i],) for t in level)}


def oracle_V(nodes, sigma):
    return 2 - sum(Fraction(1, 4**i) for i in oracle_A(nodes, sigma))


def encode(sigma):
    out = []
    for b in sigma:
        out += [0, b]
    return out


def test_tilde():
    assert tilde((1, 0, 1)) == tuple(encode((1, 0, 1))) == (0, 1, 0, 0, 0, 1)


def test_hand_tree_leaf_potentials():
    g = CantorGadget(HAND_TREE)
    nodes = list(HAND_TREE)
    assert g.leaves == [(0, 0, 1, 0), (0, 0, 1, 1), (0, 1), (1, 0), (1, 1, 0)]
    for s in g.leaves:
        assert g.data[s].A == oracle_A(nodes, s)
        assert g.V(Seq(tilde(s), (1,))) == oracle_V(nodes, s)
        assert Fraction(2, 3) < oracle_V(nodes, s) <= 2


def test_hand_tree_caristi_on_samples():
    g = CantorGadget(HAND_TREE)
    rep = verify_caristi(g.system, 200, seed=5)
    assert rep.summary["fail"] == 0 and rep.fixed_points == 0
    for x in g.samples(200, seed=5):
        c = g.certify(x)
        assert c["caristi"] and c["moves"]
        if c["case"] == "escape":
            assert c["V_x"] == 3 and c["drop_formula"]
        else:
            assert c["distance_formula"] and c["V_range"]


def test_escape_points():
    g = CantorGadget(HAND_TREE)
    x = Seq((1,), (0,))  # an odd position holding 1: not an encoding of any node
    assert g.locate(x)[0] == "escape"
    assert g.V(x) == 3
    assert g.f(x) == constant(tilde(g.eta))
    assert all(g.in_escape_set(t) for t in g.escape_set())


def test_frontier_points_raise():
    g = CantorGadget(HAND_TREE)
    with pytest.raises(TruncationError):
        g.V(Seq(tilde((0,) * 6), (0,)))


def test_too_shallow():
    with pytest.raises(TreeTooShallow):
        CantorGadget(FiniteTree([(), (0,), (1,)]))


def test_unresolved_leaf_raises_lazily():
    g = CantorGadget(HAND_TREE)
    unresolved = [s for s in g.leaves if s not in g.resolved]
    for s in unresolved:
        with pytest.raises(TreeTooShallow):
            g.f(Seq(tilde(s), (0,)))


def test_structural_lemmas_on_random_trees():
    for t in valid_cantor_trees(10, seed=2):
        assert CantorGadget(t).structural_checks() == []


def test_cantor_codes_agree_with_evaluators():
    g = CantorGadget(HAND_TREE)
    for x in g.samples(30, seed=9):
        assert eval_lsc(g.v_code, CANTOR.point(x), 400) == g.V(x)
        y = eval_continuous(g.f_code, CANTOR.point(x), half(20))
        assert dist_bounds(CANTOR, y, CANTOR.point(g.f(x)), 21)[1] <= half(20)


# -- Baire gadget


IDENT8 = InjectionTable((m, m) for m in range(8))


def oracle_in_tree(h, sigma):
    ok = all(v == 0 or h[v - 1] == n for n, v in enumerate(sigma))
    forced = all(sigma[h[m]] == m + 1 for m in range(len(sigma)) if h[m] < len(sigma))
    return ok and forced


def test_identity_injection_at_zero():
    g = BaireGadget(IDENT8)
    x = constant((0,))
    assert g.longest_in_tree(x) == ()
    assert g.plus(()) == (1,)
    assert g.V(x) == 4 and g.f(x) == Seq((1,), (0,))
    assert g.V(g.f(x)) == 2
    c = g.certify(x)
    assert c["caristi"] and c["moves"] and c["d"] == 1


def test_identity_injection_advances():
    g = BaireGadget(IDENT8)
    x = constant((1,))
    for _ in range(4):
        fx = g.f(x)
        assert len(g.longest_in_tree(fx)) > len(g.longest_in_tree(x))
        x = fx
    with pytest.raises(TableExhausted):
        for _ in range(10):
            x = g.f(x)


@given(st.integers(0, 10_000))
@settings(max_examples=40)
def test_tree_membership_against_oracle(seed):
    rng = random.Random(seed)
    h = random_injection(rng, size=16, spread=1)
    g = BaireGadget(h)
    sigma = tuple(rng.choice([0, 0, rng.randrange(1, 17)]) for _ in range(rng.randrange(8)))
    assert g.in_tree(sigma) == oracle_in_tree(h.table, sigma)


def test_baire_cases_and_lemma():
    g = BaireGadget(random_injection(random.Random(11)))
    cases = set()
    for x in g.samples(200, seed=4):
        c = g.certify(x)
        assert c["caristi"] and c["moves"] and c["lemma"] and c["case_ok"]
        cases.add(c["case"])
    assert cases == {"extends", "disagree"}


def test_injection_validation():
    with pytest.raises(ValueError):
        InjectionTable([(0, 1), (1, 1)])
    with pytest.raises(ValueError):
        InjectionTable([(0, 1), (2, 3)])
    h = random_injection(random.Random(3))
    assert InjectionTable.from_json(h.to_json()).table == h.table
    with pytest.raises(TableExhausted):
        h(64)


def test_baire_codes_agree_with_evaluators():
    g = BaireGadget(random_injection(random.Random(11)))
    for x in g.samples(20, seed=6):
        y = eval_continuous(g.f_code, BAIRE.point(x), half(20))
        assert dist_bounds(BAIRE, y, BAIRE.point(g.f(x)), 21)[1] <= half(20)
        assert 0 <= eval_lsc(g.v_code, BAIRE.point(x), 400) <= g.V(x)


@given(st.integers(1, 30))
def test_baire_potential_is_nonnegative(n):
    # the identity injection lets every position be positive
    g = BaireGadget(InjectionTable((m, m) for m in range(40)))
    sigma = tuple(range(1, n + 1))
    assert g.in_tree(sigma)
    assert 0 < g.V_stem(sigma) <= 4


# -- interval gadget

C4 = [Fraction(1, 2), Fraction(3, 4), Fraction(7, 8), Fraction(15, 16)]


def oracle_least_code(lo, hi, bound=60):
    best = None
    for q in range(1, bound):
        for p in range(0, bound):
            if gcd(p, q) != 1 or not lo < Fraction(p, q) < hi:
                continue
            s = p + q
            code = 2 * (s * (s + 1) // 2 + q)
            if best is None or code < best[0]:
                best = (code, Fraction(p, q))
    return best[1]


def test_interval_example_quarter():
    g = IntervalGadget(C4, 2)
    assert g.f_stage(2)(Fraction(1, 4)) == 1
    assert g.V_stage(2)(Fraction(1, 4)) == 2
    assert g.f(Fraction(1, 4)) == 1


def test_right_piece_begins_at_next_c():
    g = IntervalGadget(C4, 2)
    for n in range(3):
        assert g.V_stage(n)(C4[n + 1]) == C4[n + 1]


def test_ladder_against_oracle():
    g = IntervalGadget(C4, 2)
    assert g.ladder(0) == [1, oracle_least_code(C4[0], 1), C4[0]] == [1, Fraction(2, 3), Fraction(1, 2)]
    lad = g.ladder(2)
    for i in range(1, 4):
        assert lad[i] == oracle_least_code(C4[2], lad[i - 1])


@given(st.integers(0, 1024))
def test_stages_monotone_and_stable(k):
    g = IntervalGadget(C4, 2)
    x = Fraction(k, 1024)
    vals = [g.V_stage(n)(x) for n in range(3)]
    assert vals == sorted(vals)
    n0 = g.stabilized(x)
    if n0 is not None:
        assert all(g.f_stage(n)(x) == 1 for n in range(n0, 3))
    assert (g.f_stage(2)(x) == x) == (x == g.crossing(2))


def test_limit_branch_out_of_reach():
    g = IntervalGadget(C4, 2)
    with pytest.raises(StageOutOfRange):
        g.f(Fraction(15, 16))
    with pytest.raises(StageOutOfRange):
        IntervalGadget(C4, 3)
    with pytest.raises(ValueError):
        IntervalGadget([Fraction(1, 2), Fraction(1, 4)], 0)


def test_interval_certificates():
    g = IntervalGadget(C4, 2)
    for x in g.samples(100, seed=2):
        c = g.certify(x)
        assert c["caristi"] and c["drop_is_one"] and c["stable"] and c["fixed_only_at_crossing"]


# -- path defect


def test_projection_stem():
    x = BAIRE.point(Seq(tuple(range(10)), (0,)))
    # (x)_0(n) = x(pair(0, n)) = x(n(n+1)/2 + n)
    assert projection_stem(x, 0, 3) == (0, 2, 5)
    assert projection_stem(x, 1, 2) == (1, 4)


def test_both_projections_leave_at_depth_one():
    root = FiniteTree([()])
    x = BAIRE.point(constant((0,)))
    assert path_defect_potential([root, root], x, 1) == (Fraction(3, 2), Fraction(3, 2))


def test_all_inside():
    full = FiniteTree([tuple(s) for k in range(4) for s in __import__("itertools").product((0, 1), repeat=k)])
    x = BAIRE.point(constant((0,)))
    lo, hi = path_defect_potential([full, full, full], x, 3)
    assert lo == 0 and hi == Fraction(7, 4)


def test_leave_at_depth_three():
    t = FiniteTree([(), (0,), (0, 0)])
    x = BAIRE.point(constant((0,)))
    assert path_defect_potential([t], x, 2) == (0, 1)
    assert path_defect_potential([t], x, 3) == (1, 1)
    lo, hi = path_defect_potential([t], x, 2, tail_unknown=True)
    assert lo == 0 and hi == 2  # plus the tail mass 1/2 + 1/4 + ... = 1


def test_depth_must_be_positive():
    with pytest.raises(ValueError):
        path_defect_potential([FiniteTree([()])], BAIRE.point(constant((0,))), 0)


def random_tree(rng, depth):
    nodes = {()}
    frontier = [()]
    while frontier:
        s = frontier.pop()
        if len(s) < depth:
            for b in range(3):
                if rng.random() < 0.55:
                    nodes.add(s + (b,))
                    frontier.append(s + (b,))
    return FiniteTree(nodes)


@given(st.integers(0, 10_000))
@settings(max_examples=40)
def test_path_defect_monotone_in_depth(seed):
    rng = random.Random(seed)
    ts = [random_tree(rng, 5) for _ in range(rng.randrange(1, 5))]
    x = BAIRE.point(Seq(tuple(rng.randrange(3) for _ in range(30)), (rng.randrange(3),)))
    prev = None
    for depth in range(1, 7):
        lo, hi = path_defect_potential(ts, x, depth)
        assert lo <= hi
        undecided = sum(half(i) for i, t in enumerate(ts) if all(projection_stem(x, i, k) in t for k in range(1, depth + 1)))
        assert hi - lo <= undecided
        if prev:
            assert lo >= prev[0] and hi <= prev[1]
        prev = (lo, hi)


# -- trees and manifests


def test_tree_validation_and_json():
    with pytest.raises(ValueError):
        FiniteTree([(), (0, 1)])
    with pytest.raises(ValueError):
        FiniteTree([(), (-1,)])
    t = FiniteTree.from_json({"tree": [[], [0], [1], [1, 0]]})
    assert FiniteTree.from_json(t.to_json()).nodes == t.nodes
    assert t.depth == 2 and t.is_leaf((0,)) and t.children(()) == [(0,), (1,)]


def test_valid_trees_are_deterministic():
    a = valid_cantor_trees(5, seed=3)
    b = valid_cantor_trees(5, seed=3)
    assert [t.nodes for t in a] == [t.nodes for t in b]


def test_manifests():
    assert manifest(CantorGadget(HAND_TREE))["gadget"] == "cantor"
    assert manifest(BaireGadget(IDENT8))["injection"][:2] == [[0, 0], [1, 1]]
    assert manifest(IntervalGadget(C4, 1))["gadget"] == "interval"
