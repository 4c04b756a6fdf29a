import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from caristi import catalog
from caristi.codes import (
    BaireCode,
    BorelCode,
    Cap,
    Cup,
    Enumeration,
    LscClause,
    LscCode,
    baire_from_json,
    baire_to_json,
    borel_from_json,
    borel_to_continuous,
    borel_to_json,
    check_borel_function,
    chi,
    clean_normalize,
    code_from_table,
    continuous_from_json,
    continuous_to_borel,
    continuous_to_json,
    dovetail,
    eval_baire,
    eval_borel_function,
    eval_borel_membership,
    eval_continuous,
    eval_lsc,
    identity_code,
    inter,
    interval_lsc_code,
    is_clean,
    kb_compare,
    kb_linearize,
    leaf,
    lipschitz_code,
    lsc_to_monotone_limit,
    monotone_limit_to_lsc,
    union,
)
from caristi.errors import DivergenceBudget, NotInDomain, NotMonotone, NotOpenPreimage
from caristi.metric import BAIRE, CANTOR, REAL_LINE, UNIT_INTERVAL, Ball, FiniteSpace, constant, dist_bounds
from caristi.potentials import constant_potential, step_potential
from conftest import half, naturals, unit

I = UNIT_INTERVAL
P = I.point


def close(y, value, k):
    lo, hi = dist_bounds(REAL_LINE, y, REAL_LINE.point(value), k + 1)
    return hi <= half(k)


# -- enumerations


def test_dovetail_is_fair():
    streams = (itertools.count(10 * j) for j in itertools.count())
    head = list(itertools.islice(dovetail(streams), 100))
    assert 0 in head and 10 in head and 20 in head and 1 in head


def test_enumeration_take_skips_gaps():
    e = Enumeration([None, 1, None, 2])
    assert e.take(4) == [1, 2] and e.finite


# -- continuous codes


def test_eval_continuous_examples():
    ident = identity_code(I)
    assert close(eval_continuous(ident, P(Fraction(1, 2)), half(10)), Fraction(1, 2), 10)
    halve = catalog.interval_map_code("halve")
    assert close(eval_continuous(halve, P(Fraction(1, 3)), half(10)), Fraction(1, 6), 10)
    empty = code_from_table(I, I, [])
    with pytest.raises(NotInDomain):
        eval_continuous(empty, P(Fraction(1, 2)), half(4))


@given(unit)
def test_lipschitz_code_agrees_with_formula(x):
    phi = catalog.interval_map_code("square")
    assert close(eval_continuous(phi, P(x), half(16)), x * x, 16)


def test_formula_codes_are_consistent():
    for name in catalog.INTERVAL_MAPS:
        assert catalog.interval_map_code(name).consistency_violations(300) == []


def test_forces_follows_monotonicity():
    phi = code_from_table(I, I, [(Fraction(1, 2), Fraction(1, 2), Fraction(1, 4), Fraction(1, 8))])
    assert phi.forces(Fraction(1, 2), Fraction(1, 4), Fraction(1, 4), Fraction(1, 4))
    assert not phi.forces(Fraction(1, 2), 1, Fraction(1, 4), Fraction(1, 4))


# -- lsc codes


def test_eval_lsc_step_examples():
    psi = interval_lsc_code(step_potential(), I)
    assert eval_lsc(psi, P(Fraction(1, 4)), 200) == 1
    for budget in (1, 10, 100):
        assert eval_lsc(psi, P(Fraction(3, 4)), budget) == 0


def test_eval_lsc_constant():
    psi = interval_lsc_code(constant_potential(Fraction(3, 2)), I)
    assert eval_lsc(psi, P(Fraction(1, 5)), 200) == Fraction(3, 2)


@given(unit, st.integers(1, 60), st.integers(1, 60))
def test_eval_lsc_monotone_in_budget(x, b1, b2):
    b1, b2 = sorted((b1, b2))
    psi = catalog.potential_code("vee")
    assert eval_lsc(psi, P(x), b1) <= eval_lsc(psi, P(x), b2) <= catalog.vee_potential()(x)


def test_chi_examples():
    assert chi(I, 0, Fraction(1), Fraction(1, 2), Fraction(3, 4)) == Fraction(1, 2)
    assert chi(I, 0, Fraction(1), Fraction(1, 2), Fraction(1, 4)) == 1
    assert chi(I, 0, Fraction(1, 2), Fraction(1, 2), Fraction(3, 4)) == 0


@given(unit, st.integers(1, 40))
def test_monotone_limit_stages_increase(x, n):
    psi = catalog.potential_code("step")
    s1, s2 = lsc_to_monotone_limit(psi, n), lsc_to_monotone_limit(psi, n + 5)
    assert s1.exact(x) <= s2.exact(x) <= step_potential()(x)


def test_constant_sequence_gives_clauses_below_c():
    c = Fraction(2)
    stage = lipschitz_code(lambda a: c, 0, I, REAL_LINE, exact=lambda x: c)
    psi = monotone_limit_to_lsc([stage, stage], 2)
    qs = {cl.q for cl in psi.clauses.take(20)}
    assert all(q < c for q in qs)
    assert eval_lsc(psi, P(Fraction(1, 3)), 100) >= c - half(10)


def test_decreasing_sequence_is_rejected():
    stages = [lipschitz_code(lambda a, c=c: c, 0, I, REAL_LINE, exact=lambda x, c=c: c) for c in (2, 1)]
    with pytest.raises(NotMonotone):
        monotone_limit_to_lsc(stages, 2)


def test_cylinder_codes_on_cantor():
    from caristi.codes import cylinder_lsc_code

    psi = cylinder_lsc_code(CANTOR, lambda stem: Fraction(1) if stem[:1] == (1,) else None)
    assert eval_lsc(psi, CANTOR.point(constant((1,))), 50) == 1
    assert eval_lsc(psi, CANTOR.point(constant((0, 1))), 50) == 0


# -- Borel codes

FIN = FiniteSpace(
    [
        [0, Fraction(1, 4), 1, 1],
        [Fraction(1, 4), 0, 1, 1],
        [1, 1, 0, Fraction(1, 2)],
        [1, 1, Fraction(1, 2), 0],
    ]
)


def test_borel_membership_examples():
    s = BorelCode(FIN, leaf(0, 1))
    assert eval_borel_membership(s, FIN.point(0)) == "in"
    two = BorelCode(FIN, union(leaf(0, Fraction(1, 8)), leaf(2, Fraction(1, 8))))
    assert eval_borel_membership(two, FIN.point(2)) == "in"
    assert eval_borel_membership(two, FIN.point(1)) == "out"
    edge = BorelCode(I, leaf(Fraction(1, 4), Fraction(1, 4)))
    boundary = I.point_from_oracle(lambda i: Fraction(1, 2))
    for budget in (5, 30, 60):
        assert eval_borel_membership(edge, boundary, budget) == "unknown"


def test_intersection_semantics():
    s = BorelCode(FIN, inter(leaf(0, Fraction(1, 2)), leaf(1, Fraction(1, 8))))
    assert [eval_borel_membership(s, FIN.point(p)) for p in range(4)] == ["out", "in", "out", "out"]


def test_clean_normalize_examples():
    nested = BorelCode(FIN, union(union(leaf(0, Fraction(1, 8))), leaf(2, Fraction(1, 8))))
    flat = clean_normalize(nested)
    assert is_clean(flat) and not is_clean(nested)
    assert all(isinstance(c, type(leaf(0, 1))) for c in flat.root.children)
    capped = clean_normalize(BorelCode(FIN, inter(leaf(0, 1), leaf(1, 1))))
    assert isinstance(capped.root, Cup) and isinstance(capped.root.children[0], Cap)
    clean = BorelCode(FIN, union(leaf(0, 1), inter(leaf(1, 1), leaf(2, 1))))
    assert borel_to_json(clean_normalize(clean)) == borel_to_json(clean)


def random_borel(rng, space, depth):
    if depth == 0 or rng.random() < 0.3:
        return leaf(space.random_code_point(rng), Fraction(rng.randrange(1, 5), 4))
    op = union if rng.random() < 0.5 else inter
    return op(*(random_borel(rng, space, depth - 1) for _ in range(rng.randrange(1, 4))))


@given(st.integers(0, 10_000))
@settings(max_examples=40)
def test_clean_normalize_preserves_membership(seed):
    rng = random.Random(seed)
    s = BorelCode(FIN, random_borel(rng, FIN, 4))
    n = clean_normalize(s)
    assert is_clean(n)
    for p in range(len(FIN)):
        assert eval_borel_membership(s, FIN.point(p)) == eval_borel_membership(n, FIN.point(p))


def test_tree_form_parity_and_round_trip():
    s = BorelCode(FIN, union(leaf(0, 1), inter(leaf(1, 1), leaf(2, 1))))
    tree = s.to_tree()
    assert [k for k in tree if len(k) == 1] == [(1,)]  # one root child, odd: a union
    back = BorelCode.from_tree(FIN, tree)
    again = BorelCode.from_tree(FIN, back.to_tree())
    assert again.to_tree() == back.to_tree()
    for p in range(len(FIN)):
        assert eval_borel_membership(back, FIN.point(p)) == eval_borel_membership(s, FIN.point(p))


def test_continuous_to_borel_examples():
    ident = identity_code(I)
    ups = continuous_to_borel(ident)
    pre = ups.preimage(Ball(Fraction(1, 2), Fraction(1, 4)))
    assert eval_borel_membership(pre, P(Fraction(1, 2)), 60) == "in"
    for c in itertools.islice((c for c in pre.root.children if c is not None), 30):
        # every emitted ball is formally inside the target ball
        assert abs(c.ball.center - Fraction(1, 2)) + c.ball.radius < Fraction(1, 2) or c.ball.radius < Fraction(1, 4)
    empty = continuous_to_borel(code_from_table(I, I, []))
    assert eval_borel_membership(empty.preimage(Ball(0, 1)), P(0), 40) != "in"
    halve = continuous_to_borel(catalog.interval_map_code("halve"))
    assert eval_borel_membership(halve.preimage(Ball(0, Fraction(1, 4))), P(Fraction(1, 4)), 60) == "in"


def test_borel_to_continuous_rejects_intersections():
    table = {Ball(0, 1): BorelCode(FIN, inter(leaf(0, 1), leaf(1, 1)))}
    with pytest.raises(NotOpenPreimage):
        borel_to_continuous(__import__("caristi.codes", fromlist=["BorelFunctionCode"]).BorelFunctionCode.from_table(FIN, FIN, table))


@pytest.mark.parametrize("name", ["halve", "flip"])
def test_round_trip_small_sample(name):
    phi = catalog.interval_map_code(name)
    back = borel_to_continuous(continuous_to_borel(phi))
    for x in (Fraction(0), Fraction(1, 3), Fraction(7, 8)):
        y1 = eval_continuous(phi, P(x), half(12))
        y2 = eval_continuous(back, P(x), half(12), budget=50_000)
        assert dist_bounds(REAL_LINE, y1, y2, 13)[1] <= half(12)


def test_constant_round_trip():
    c = Fraction(2, 5)
    phi = lipschitz_code(lambda a: c, 0, I, I, exact=lambda x: c)
    back = borel_to_continuous(continuous_to_borel(phi))
    y = eval_continuous(back, P(Fraction(1, 7)), half(10), budget=50_000)
    assert close(y, c, 10)


def test_eval_borel_function():
    ups = continuous_to_borel(catalog.interval_map_code("halve"))
    y = eval_borel_function(ups, P(Fraction(1, 2)), half(8))
    assert close(y, Fraction(1, 4), 6)


def test_borel_function_monotone_and_disjoint_on_samples():
    ups = continuous_to_borel(catalog.interval_map_code("halve"))
    pts = [P(Fraction(k, 16)) for k in range(17)]
    assert check_borel_function(ups, pts, max_balls=12).ok


# -- Baire codes


def _const(c):
    return lipschitz_code(lambda a: c, 0, I, REAL_LINE, exact=lambda x: c)


def test_baire_leaf_is_continuous_eval():
    xi = BaireCode(I, leaf=catalog.interval_map_code("halve"))
    assert close(eval_baire(xi, P(Fraction(1, 2)), 4, half(10)).point, Fraction(1, 4), 10)


def test_baire_limit_stabilizes():
    xi = BaireCode.limit(REAL_LINE, lambda n: BaireCode(REAL_LINE, leaf=_const(Fraction(1) - half(n + 12))))
    v = eval_baire(xi, P(0), 6, half(10))
    assert close(v.point, 1, 10) and v.stable_from == 0


def test_baire_alternating_diverges():
    xi = BaireCode.limit(REAL_LINE, lambda n: BaireCode(REAL_LINE, leaf=_const(Fraction(n % 2))))
    with pytest.raises(DivergenceBudget):
        eval_baire(xi, P(0), 5, Fraction(1, 4))


# -- KB order


def test_kb_examples():
    assert kb_compare((0,), ()) == -1
    assert kb_compare((0,), (1,)) == -1
    assert kb_linearize([(), (0,), (1,)]) == [(0,), (1,), ()]


@given(naturals, naturals, naturals)
def test_kb_total_order(a, b, c):
    assert kb_compare(a, b) == -kb_compare(b, a)
    assert (kb_compare(a, b) == 0) == (a == b)
    if kb_compare(a, b) < 0 and kb_compare(b, c) < 0:
        assert kb_compare(a, c) < 0


# -- JSON


def test_continuous_json_round_trip():
    phi = code_from_table(I, I, [(Fraction(1, 2), Fraction(1, 4), Fraction(1, 3), Fraction(1, 8))])
    doc = continuous_to_json(phi)
    assert doc == [["1/2", "1/4", "1/3", "1/8"]]
    assert continuous_to_json(continuous_from_json(doc, I, I)) == doc
    with pytest.raises(ValueError, match="clause 0"):
        continuous_from_json([["1/2", "1/4"]], I, I)


def test_borel_json_round_trip():
    s = BorelCode(CANTOR, union(leaf((0, 1), Fraction(1, 2)), inter(leaf((1,), 1), leaf((), 1))))
    doc = borel_to_json(s)
    assert doc["op"] == "union" and doc["children"][0] == {"ball": [[0, 1], "1/2"]}
    assert borel_to_json(borel_from_json(doc, CANTOR)) == doc
    with pytest.raises(ValueError, match=r"\$\.children\[0\]\.op"):
        borel_from_json({"op": "union", "children": [{"op": "xor"}]}, CANTOR)


def test_baire_json_round_trip():
    leafcode = code_from_table(I, I, [(0, 1, Fraction(1, 2), Fraction(1, 4))])
    xi = BaireCode.limit(I, [BaireCode(I, leaf=leafcode)])
    doc = baire_to_json(xi, 2)
    assert "limit" in doc and len(doc["limit"]) == 2
    assert baire_to_json(baire_from_json(doc, I, I), 2) == doc
