"""Function codes: continuous, lower semi-continuous, Borel and Baire.

Every code is an enumeration of finite clauses.  Enumerations may be infinite
and may contain ``None`` gaps (pauses of a c.e. enumeration); consumers skip
gaps but count them against their budget, so a search over a stream that
never produces anything useful still terminates.

Evaluators only ever *certify*: a clause is used at a point only when the
point's membership in the clause ball is proved from its approximations.
"""

from __future__ import annotations

import bisect
import functools
import itertools
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, NamedTuple, Sequence

from .errors import DivergenceBudget, NotInDomain, NotMonotone, NotOpenPreimage, OracleFailure
from .metric import (
    REAL_LINE,
    Ball,
    IntervalSpace,
    Point,
    Seq,
    SpaceCode,
    _SequenceSpace,
    ball_membership,
    dist_bounds,
    exact_dist,
    sample_points,
)
from .potentials import Span
from .rationals import ZERO, fmt, pow2, rat

# ---------------------------------------------------------------------------
# enumerations


class Enumeration:
    """Replayable, possibly infinite stream with an optional locator.

    ``near(x)`` yields a sub-stream of members relevant to the point ``x`` in
    a useful order; without a locator it is the whole stream.
    """

    def __init__(self, source, near: Callable[[Point], Iterable] | None = None):
        if callable(source):
            self._factory = source
            self.items = None
        else:
            self.items = tuple(source)
            self._factory = lambda: iter(self.items)
        self._near = near
        # locator streams are replayed many times per point; keep what was read
        self._memo: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()

    @property
    def finite(self) -> bool:
        return self.items is not None

    def __iter__(self) -> Iterator:
        return iter(self._factory())

    def near(self, x: Point) -> Iterator:
        if self._near is None:
            return iter(self)
        try:
            entry = self._memo.get(x)
        except TypeError:
            return iter(self._near(x))
        if entry is None:
            entry = self._memo[x] = ([], iter(self._near(x)))
        return _replay(*entry)

    def take(self, n: int) -> list:
        """First ``n`` stream entries with gaps removed."""
        return [c for c in itertools.islice(self, n) if c is not None]

    def __repr__(self) -> str:
        return f"Enumeration({len(self.items)} items)" if self.finite else "Enumeration(<infinite>)"


def _replay(seen: list, source: Iterator) -> Iterator:
    k = 0
    while True:
        if k < len(seen):
            yield seen[k]
        else:
            try:
                item = next(source)
            except StopIteration:
                return
            seen.append(item)
            yield item
        k += 1


def dovetail(streams: Iterable[Iterable]) -> Iterator:
    """Fair interleaving of a (possibly infinite) stream of streams.

    At stage ``t`` a new stream is opened and every open stream contributes
    one entry, so entry ``k`` of stream ``j`` appears after finitely many steps.
    """
    outer = iter(streams)
    active: list[Iterator] = []
    outer_done = False
    while True:
        if not outer_done:
            try:
                active.append(iter(next(outer)))
            except StopIteration:
                outer_done = True
        if outer_done and not active:
            return
        alive = []
        for it in active:
            try:
                yield next(it)
            except StopIteration:
                continue
            alive.append(it)
        active = alive


def _scan(stream: Iterable, budget: int) -> Iterator:
    """Non-gap entries among the first ``budget`` entries of ``stream``."""
    for item in itertools.islice(stream, budget):
        if item is not None:
            yield item


# ---------------------------------------------------------------------------
# certified membership


def _bits(r: Fraction) -> int:
    """Roughly ``log2(1/r)``, at least 0."""
    if r >= 1:
        return 0
    return (r.denominator // r.numerator).bit_length()


def certainly_inside(space: SpaceCode, x: Point, center, radius: Fraction) -> bool:
    """Certified ``d(x, center) < radius``."""
    if x.exact is not None:
        return space.exact_d(x.exact, space.describe(center)) < radius
    return ball_membership(space, x, Ball(center, radius), prec=_bits(radius) + 12) == "in"


# ---------------------------------------------------------------------------
# continuous codes


class Clause(NamedTuple):
    """``B_r(a) ⊩ B̄_q(b)``: the map sends the open ball into the closed one."""

    a: Any
    r: Fraction
    b: Any
    q: Fraction


@dataclass(frozen=True, eq=False)
class ContinuousCode:
    domain: SpaceCode
    codomain: SpaceCode
    clauses: Enumeration
    # exact evaluator on finite descriptions, when the code comes from a formula
    exact: Callable | None = None

    def candidates(self, x: Point) -> Iterator:
        return self.clauses.near(x)

    def forces(self, a, r, b, q, budget: int = 1000) -> bool:
        """Does ``B_r(a) ⊩ B̄_q(b)`` follow from an enumerated clause by monotonicity?"""
        inner, outer = Ball(a, rat(r)), Ball(b, rat(q), closed=True)
        for c in _scan(self.clauses, budget):
            same_in = self.domain.d(a, c.a) == 0 and inner.radius == c.r
            if not (same_in or self.domain.d(a, c.a) + inner.radius < c.r):
                continue
            same_out = self.codomain.d(b, c.b) == 0 and outer.radius == c.q
            if same_out or self.codomain.d(b, c.b) + c.q < outer.radius:
                return True
        return False

    def consistency_violations(self, budget: int = 200) -> list:
        """Pairs of clauses on the same input ball whose output balls are too far apart."""
        items = self.clauses.take(budget)
        bad = []
        for c1, c2 in itertools.combinations(items, 2):
            if c1.r == c2.r and self.domain.d(c1.a, c2.a) == 0:
                if self.codomain.d(c1.b, c2.b) > c1.q + c2.q:
                    bad.append((c1, c2))
        return bad


def _find_clause(phi: ContinuousCode, x: Point, ok: Callable[[Fraction], bool], budget: int):
    for c in _scan(phi.candidates(x), budget):
        if ok(c.q) and certainly_inside(phi.domain, x, c.a, c.r):
            return c
    return None


def eval_continuous(phi: ContinuousCode, x: Point, eps, budget: int = 10_000) -> Point:
    """Codomain point ``f(x)``; its ``i``-th approximation comes from a clause with ``q <= 2**-(i+1)``."""
    eps = rat(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if _find_clause(phi, x, lambda q: q < eps, budget) is None:
        raise NotInDomain(budget)

    @functools.lru_cache(maxsize=None)
    def oracle(i: int):
        c = _find_clause(phi, x, lambda q: q <= pow2(i + 1), budget)
        if c is None:
            raise OracleFailure(f"no clause of radius <= 2^-{i + 1} within budget {budget}")
        return c.b

    return Point(oracle)


# -- grids of cells used to build codes from formulas


def _interval_width(space: IntervalSpace) -> Fraction:
    if space.lo is None or space.hi is None:
        raise ValueError("formula-generated codes need a bounded interval domain")
    return space.hi - space.lo


def _cells(space: SpaceCode, level: int) -> Iterator[tuple]:
    """Finitely many (center, radius) pairs; every point is well inside one of them."""
    if isinstance(space, IntervalSpace):
        w = _interval_width(space)
        r = w * pow2(level)
        for k in range((1 << level) + 1):
            yield space.lo + r * k, r
    elif isinstance(space, _SequenceSpace):
        if space.alphabet is not None:
            for stem in itertools.product(range(space.alphabet), repeat=level):
                yield stem, pow2(level - 1)
        else:
            for length in range(level + 1):
                for stem in itertools.product(range(level + 1), repeat=length):
                    yield stem, pow2(length - 1)
    else:
        raise TypeError(f"no cell structure for {space!r}")


def _hint(x: Point, prec: int):
    return x.exact if x.exact is not None else x.approx(prec)


def _cells_near(space: SpaceCode, x: Point, level: int) -> list[tuple]:
    if isinstance(space, IntervalSpace):
        w = _interval_width(space)
        r = w * pow2(level)
        h = _hint(x, level + 3)
        if isinstance(h, Seq):
            raise TypeError("interval point expected")
        k0 = int((h - space.lo) / r)
        ks = sorted({min(max(k, 0), 1 << level) for k in (k0, k0 + 1, k0 - 1)}, key=lambda k: abs(space.lo + r * k - h))
        return [(space.lo + r * k, r) for k in ks]
    if isinstance(space, _SequenceSpace):
        h = _hint(x, level)
        stem = h.prefix(level) if isinstance(h, Seq) else tuple(h)[:level]
        stem = stem + (0,) * (level - len(stem))
        return [(stem, pow2(level - 1))]
    raise TypeError(f"no cell structure for {space!r}")


def _start_level(lipschitz: Fraction, space: SpaceCode) -> int:
    scale = lipschitz * (_interval_width(space) if isinstance(space, IntervalSpace) else 2)
    if scale <= 1:
        return 0
    return (scale.numerator // scale.denominator + 1).bit_length()


def lipschitz_code(fn: Callable, lipschitz, domain: SpaceCode, codomain: SpaceCode = REAL_LINE, exact: Callable | None = None) -> ContinuousCode:
    """Continuous code of an ``L``-Lipschitz ``fn`` given on code points.

    Level ``n`` contributes one clause per cell: ``B_r(a) ⊩ B̄_{L r}(fn(a))``
    (radius ``r`` when ``L = 0``).
    """
    L = rat(lipschitz)

    def clause(a, r):
        return Clause(a, r, fn(a), L * r if L > 0 else r)

    def full():
        for level in itertools.count():
            for a, r in _cells(domain, level):
                yield clause(a, r)

    start = _start_level(L, domain)

    def near(x):
        for level in itertools.count(start):
            for a, r in _cells_near(domain, x, level):
                yield clause(a, r)

    return ContinuousCode(domain, codomain, Enumeration(full, near), exact=exact)


def identity_code(domain: SpaceCode) -> ContinuousCode:
    return lipschitz_code(lambda a: a, 1, domain, domain, exact=lambda x: x)


def code_from_table(domain: SpaceCode, codomain: SpaceCode, rows: Iterable[tuple]) -> ContinuousCode:
    return ContinuousCode(domain, codomain, Enumeration(Clause(a, rat(r), b, rat(q)) for a, r, b, q in rows))


# ---------------------------------------------------------------------------
# lsc codes


class LscClause(NamedTuple):
    """``B_r(a) ⊩ q``: the function is at least ``q`` on the open ball."""

    a: Any
    r: Fraction
    q: Fraction


@dataclass(frozen=True, eq=False)
class LscCode:
    domain: SpaceCode
    clauses: Enumeration
    potential: bool = True
    exact: Callable | None = None

    def candidates(self, x: Point) -> Iterator:
        return self.clauses.near(x)


def eval_lsc(psi: LscCode, x: Point, budget: int = 200) -> Fraction | None:
    """Best certified lower bound among the first ``budget`` candidate clauses.

    Potentials start from 0; a non-potential code with no applicable clause
    gives ``None``.
    """
    best = ZERO if psi.potential else None
    for c in _scan(psi.candidates(x), budget):
        if (best is None or c.q > best) and certainly_inside(psi.domain, x, c.a, c.r):
            best = c.q
    return best


def _span(space: IntervalSpace, a: Fraction, r: Fraction) -> Span:
    left, right = a - r, a + r
    lc = rc = False
    if space.lo is not None and left < space.lo:
        left, lc = space.lo, True
    if space.hi is not None and right > space.hi:
        right, rc = space.hi, True
    return Span(left, right, lc, rc)


def interval_lsc_code(potential, domain: IntervalSpace | None = None) -> LscCode:
    """Lsc code of an interval potential exposing ``inf_on(span)`` and exact ``__call__``.

    Each dyadic cell ball carries the exact infimum of the potential over it.
    """
    if domain is None:
        domain = IntervalSpace(potential.lo, potential.hi)

    def clause(a, r):
        return LscClause(a, r, potential.inf_on(_span(domain, a, r)))

    def full():
        for level in itertools.count():
            for a, r in _cells(domain, level):
                yield clause(a, r)

    def near(x):
        for level in itertools.count():
            for a, r in _cells_near(domain, x, level):
                yield clause(a, r)

    return LscCode(domain, Enumeration(full, near), potential=True, exact=potential)


def cylinder_lsc_code(space: _SequenceSpace, value: Callable[[tuple], Fraction | None], exact: Callable | None = None) -> LscCode:
    """Lsc code on a sequence space from a lower bound per cylinder.

    ``value(stem)`` is a lower bound for the function on all extensions of
    ``stem`` (``None`` for no information).
    """

    def clause(stem):
        q = value(stem)
        return None if q is None else LscClause(stem, pow2(len(stem) - 1), q)

    def full():
        for level in itertools.count():
            for stem, _ in _cells(space, level):
                yield clause(stem)

    def near(x):
        for level in itertools.count():
            for stem, _ in _cells_near(space, x, level):
                yield clause(stem)

    return LscCode(space, Enumeration(full, near), potential=True, exact=exact)


def chi(space: SpaceCode, a, r: Fraction, eps: Fraction, x_desc) -> Fraction:
    """Ramp that is 1 on ``B_{r(1-eps)}(a)``, 0 off ``B_r(a)``, linear in ``d`` between."""
    d = space.exact_d(x_desc, space.describe(a))
    if d < r * (1 - eps):
        return Fraction(1)
    if d >= r:
        return ZERO
    return 1 / eps - d / (eps * r)


class StageFunction:
    """``max(0, max_i q_i * chi_eps(B_i))`` over finitely many clauses."""

    def __init__(self, space: SpaceCode, clauses: Sequence[LscClause], eps: Fraction):
        self.space = space
        self.eps = eps
        # clauses with q <= 0 never beat the floor
        self.clauses = tuple(c for c in clauses if c.q > 0)
        self._centers = [space.describe(c.a) for c in self.clauses]
        self._inner = [c.r * (1 - eps) for c in self.clauses]
        self._interval = isinstance(space, IntervalSpace)
        # on intervals: per radius, clauses sorted by center, so a query only visits balls around x
        self._by_radius: dict = {}
        if self._interval:
            for k, c in enumerate(self.clauses):
                self._by_radius.setdefault(c.r, []).append((self._centers[k], k))
            for group in self._by_radius.values():
                group.sort()
            self._keys = {r: [a for a, _ in g] for r, g in self._by_radius.items()}

    def _nearby(self, x_desc):
        if not self._interval:
            return range(len(self.clauses))
        out = []
        for r, group in self._by_radius.items():
            keys = self._keys[r]
            lo, hi = bisect.bisect_right(keys, x_desc - r), bisect.bisect_left(keys, x_desc + r)
            out.extend(k for _, k in group[lo:hi])
        return out

    def __call__(self, x_desc) -> Fraction:
        best = ZERO
        for k in self._nearby(x_desc):
            c, a, inner = self.clauses[k], self._centers[k], self._inner[k]
            if c.q <= best:
                continue
            d = abs(x_desc - a) if self._interval else self.space.exact_d(x_desc, a)
            if d >= c.r:
                continue
            best = c.q if d < inner else max(best, c.q * (1 / self.eps - d / (self.eps * c.r)))
        return best

    @property
    def lipschitz(self) -> Fraction:
        return max((c.q / (self.eps * c.r) for c in self.clauses), default=ZERO)


def lsc_to_monotone_limit(psi: LscCode, n: int, count: int | None = None) -> ContinuousCode:
    """Stage ``n`` continuous approximation built from the first ``count`` clauses (default ``n``).

    Stages increase pointwise as long as ``count`` does not decrease with ``n``.
    """
    if n < 0:
        raise ValueError("stage must be nonnegative")
    items = tuple(psi.clauses.take(n if count is None else count))
    stage = StageFunction(psi.domain, items, pow2(n + 1))
    space = psi.domain
    return lipschitz_code(lambda a: stage(space.describe(a)), stage.lipschitz, space, REAL_LINE, exact=stage)


def monotone_limit_to_lsc(vs, stages: int, check_points: Sequence[Point] | None = None, seed: int = 0) -> LscCode:
    """Lsc code of the pointwise limit of an increasing sequence of continuous codes.

    Every stage clause ``B_r(a) ⊩ B̄_s(b)`` yields ``B_r(a) ⊩ b - s``.  Since
    the stages increase, the locator only reads the latest stage, which
    dominates the others.  Monotonicity is checked at sample points with the
    stages' exact evaluators when available.
    """
    codes = [vs(k) for k in range(stages)] if callable(vs) else list(vs)[:stages]
    if not codes:
        raise ValueError("need at least one stage")
    domain = codes[0].domain
    if check_points is None:
        check_points = sample_points(domain, 8, seed)
    _check_monotone(codes, check_points)

    def lower(c):
        return None if c is None else LscClause(c.a, c.r, c.b - c.q)

    def full():
        return (lower(c) for c in dovetail(iter(code.clauses) for code in codes))

    def near(x):
        return (lower(c) for c in codes[-1].candidates(x))

    exact = codes[-1].exact
    return LscCode(domain, Enumeration(full, near), potential=True, exact=exact)


def _check_monotone(codes: Sequence[ContinuousCode], points: Sequence[Point]) -> None:
    for x in points:
        prev = None
        for k, code in enumerate(codes):
            if code.exact is not None and x.exact is not None:
                lo = hi = code.exact(x.exact)
            else:
                try:
                    y = eval_continuous(code, x, pow2(30), budget=2000)
                    v = y.approx(32)
                except (NotInDomain, OracleFailure):
                    prev = None
                    continue
                lo, hi = v - pow2(31), v + pow2(31)
            if prev is not None and hi < prev:
                raise NotMonotone(f"stage {k} drops below stage {k - 1} at {x!r}")
            prev = lo


# ---------------------------------------------------------------------------
# Borel codes


@dataclass(frozen=True)
class BallLeaf:
    ball: Ball


@dataclass(frozen=True, eq=False)
class Cup:
    """Union node (odd label in the sequence-tree form)."""

    children: Any = ()


@dataclass(frozen=True, eq=False)
class Cap:
    """Intersection node (even label in the sequence-tree form)."""

    children: Any = ()


def _kids(node) -> Enumeration:
    ch = node.children
    return ch if isinstance(ch, Enumeration) else Enumeration(ch)


@dataclass(frozen=True, eq=False)
class BorelCode:
    space: SpaceCode
    root: Any

    @property
    def finite(self) -> bool:
        def fin(node):
            if isinstance(node, BallLeaf):
                return True
            kids = _kids(node)
            return kids.finite and all(fin(c) for c in kids.items)

        return fin(self.root)

    def to_tree(self) -> dict:
        """Prefix-closed sequence form: node sequence -> ``"union"``/``"inter"``/Ball."""
        out: dict[tuple, Any] = {(): "root"}

        def walk(node, sigma: tuple, k: int):
            if isinstance(node, BallLeaf):
                out[sigma + (node.ball,)] = node.ball
                return
            label = 2 * k + 1 if isinstance(node, Cup) else 2 * k
            here = sigma + (label,)
            out[here] = "union" if isinstance(node, Cup) else "inter"
            for j, child in enumerate(_kids(node).items):
                walk(child, here, j)

        if not self.finite:
            raise ValueError("only finite codes have a finite tree form")
        walk(self.root, (), 0)
        return out

    @classmethod
    def from_tree(cls, space: SpaceCode, tree: dict) -> "BorelCode":
        def children_of(sigma):
            return sorted((s for s in tree if len(s) == len(sigma) + 1 and s[: len(sigma)] == sigma), key=_kb_entry_key_seq)

        def build(sigma):
            last = sigma[-1]
            if isinstance(last, Ball):
                return BallLeaf(last)
            kids = tuple(build(s) for s in children_of(sigma))
            return Cup(kids) if last % 2 == 1 else Cap(kids)

        top = children_of(())
        if len(top) != 1:
            raise ValueError("the root must have exactly one child")
        return cls(space, build(top[0]))


def leaf(center, radius, closed: bool = False) -> BallLeaf:
    return BallLeaf(Ball(center, rat(radius), closed))


def union(*children) -> Cup:
    return Cup(tuple(children))


def inter(*children) -> Cap:
    return Cap(tuple(children))


def eval_borel_membership(s: BorelCode, x: Point, budget: int = 40) -> str:
    """Kleene three-valued membership: ``"in"``, ``"out"`` or ``"unknown"``.

    ``budget`` is both the precision index for ball tests and the number of
    entries read from each lazy child stream.
    """

    def ev(node) -> str:
        if isinstance(node, BallLeaf):
            return ball_membership(s.space, x, node.ball, prec=budget)
        kids = _kids(node)
        stream = kids.items if kids.finite else _scan(kids.near(x), budget)
        want, other = ("in", "out") if isinstance(node, Cup) else ("out", "in")
        verdicts = []
        for child in stream:
            v = ev(child)
            if v == want:
                return want
            verdicts.append(v)
        if kids.finite and all(v == other for v in verdicts):
            return other
        return "unknown"

    return ev(s.root)


def clean_normalize(s: BorelCode) -> BorelCode:
    """Alternating union/intersection levels with a union root.

    Runs of the same operation are merged and an intersection root is wrapped
    in a one-child union.  A lone leaf is left as is.
    """
    if not s.finite:
        raise ValueError("clean_normalize needs a finite code")

    def flat(node):
        if isinstance(node, BallLeaf):
            return node
        merged = []
        for child in _kids(node).items:
            child = flat(child)
            if type(child) is type(node):
                merged.extend(child.children)
            else:
                merged.append(child)
        return type(node)(tuple(merged))

    root = flat(s.root)
    if isinstance(root, Cap):
        root = Cup((root,))
    return BorelCode(s.space, root)


def is_clean(s: BorelCode) -> bool:
    if isinstance(s.root, BallLeaf):
        return True
    if not isinstance(s.root, Cup):
        return False

    def alt(node) -> bool:
        for child in _kids(node).items:
            if isinstance(child, BallLeaf):
                continue
            if type(child) is type(node) or not alt(child):
                return False
        return True

    return alt(s.root)


# -- Borel function codes


@dataclass(frozen=True, eq=False)
class BorelFunctionCode:
    """Preimage map from codomain balls to Borel codes.

    ``balls`` enumerates the codomain balls whose preimages are meaningful;
    ``locate(x)`` optionally yields balls likely to contain ``f(x)``.
    """

    domain: SpaceCode
    codomain: SpaceCode
    preimage: Callable[[Ball], BorelCode]
    balls: Enumeration
    locate: Callable[[Point], Iterable] | None = None

    @classmethod
    def from_table(cls, domain: SpaceCode, codomain: SpaceCode, table: dict) -> "BorelFunctionCode":
        empty = BorelCode(domain, Cup(()))
        return cls(domain, codomain, lambda b: table.get(b, empty), Enumeration(table.keys()))

    def candidate_balls(self, x: Point) -> Iterator:
        return iter(self.locate(x)) if self.locate is not None else iter(self.balls)


def continuous_to_borel(phi: ContinuousCode) -> BorelFunctionCode:
    """Preimage of ``B_s(b)``: union of clause balls ``B_r(a)`` with ``d(b, b') + s' < s``."""
    cod = phi.codomain

    def preimage(ball: Ball) -> BorelCode:
        def pick(c):
            if c is None or c.q >= ball.radius or cod.d(ball.center, c.b) + c.q >= ball.radius:
                return None
            return BallLeaf(Ball(c.a, c.r))

        kids = Enumeration(
            lambda: (pick(c) for c in phi.clauses),
            near=lambda x: (pick(c) for c in phi.candidates(x)),
        )
        return BorelCode(phi.domain, Cup(kids))

    def out_ball(c):
        return None if c is None else Ball(c.b, 2 * c.q)

    balls = Enumeration(lambda: (out_ball(c) for c in phi.clauses))
    return BorelFunctionCode(phi.domain, cod, preimage, balls, locate=lambda x: (out_ball(c) for c in phi.candidates(x)))


def _open_leaves(code: BorelCode, stream: Iterable) -> Iterator:
    for child in stream:
        if child is None:
            yield None
        elif isinstance(child, BallLeaf):
            yield child.ball
        else:
            raise NotOpenPreimage("preimage code contains a nested operation node")


def _flat_union(code: BorelCode, x: Point | None = None) -> Iterator:
    root = code.root
    if isinstance(root, BallLeaf):
        return iter([root.ball])
    if not isinstance(root, Cup):
        raise NotOpenPreimage("preimage code has an intersection at the root")
    kids = _kids(root)
    return _open_leaves(code, iter(kids) if x is None else kids.near(x))


def borel_to_continuous(ups: BorelFunctionCode) -> ContinuousCode:
    """Clauses ``B_{r_i}(a_i) ⊩ B_s(b)`` for each ball of the union coding ``f^{-1}[B_s(b)]``."""
    if ups.balls.finite:
        for ball in ups.balls.items:
            code = ups.preimage(ball)
            if code.finite:
                list(_flat_union(code))

    def clauses_for(ball, x=None):
        if ball is None:
            return iter([None])
        return (None if a is None else Clause(a.center, a.radius, ball.center, ball.radius) for a in _flat_union(ups.preimage(ball), x))

    def full():
        return dovetail(clauses_for(b) for b in ups.balls)

    def near(x):
        return dovetail(clauses_for(b, x) for b in ups.candidate_balls(x))

    return ContinuousCode(ups.domain, ups.codomain, Enumeration(full, near))


def eval_borel_function(ups: BorelFunctionCode, x: Point, eps, budget: int = 2000) -> Point:
    """Codomain point whose ``i``-th approximation is the center of a certified ball of radius ``<= 2**-(i+1)``."""
    eps = rat(eps)

    def find(limit: Fraction):
        for ball in _scan(ups.candidate_balls(x), budget):
            if ball.radius <= limit and eval_borel_membership(ups.preimage(ball), x, budget) == "in":
                return ball
        return None

    if find(eps) is None:
        raise NotInDomain(budget)

    @functools.lru_cache(maxsize=None)
    def oracle(i: int):
        ball = find(pow2(i + 1))
        if ball is None:
            raise OracleFailure(f"no certified ball of radius <= 2^-{i + 1}")
        return ball.center

    return Point(oracle)


@dataclass
class BorelFunctionReport:
    checked_pairs: int = 0
    monotone_violations: list = field(default_factory=list)
    disjoint_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.monotone_violations or self.disjoint_violations)


def check_borel_function(ups: BorelFunctionCode, points: Sequence[Point], max_balls: int = 30, budget: int = 40) -> BorelFunctionReport:
    """Sampled check of preimage monotonicity and disjointness."""
    from .metric import ball_subsetpluseq, balls_disjoint

    balls = ups.balls.take(max_balls)
    verdict = {}
    for j, ball in enumerate(balls):
        code = ups.preimage(ball)
        verdict[j] = [eval_borel_membership(code, x, budget) for x in points]
    rep = BorelFunctionReport()
    for i, j in itertools.permutations(range(len(balls)), 2):
        b1, b2 = balls[i], balls[j]
        rep.checked_pairs += 1
        if ball_subsetpluseq(ups.codomain, b1, b2):
            for k, (v1, v2) in enumerate(zip(verdict[i], verdict[j])):
                if v1 == "in" and v2 == "out":
                    rep.monotone_violations.append((b1, b2, k))
        if i < j and balls_disjoint(ups.codomain, b1, b2):
            for k, (v1, v2) in enumerate(zip(verdict[i], verdict[j])):
                if v1 == "in" and v2 == "in":
                    rep.disjoint_violations.append((b1, b2, k))
    return rep


# ---------------------------------------------------------------------------
# Baire codes


@dataclass(frozen=True, eq=False)
class BaireCode:
    """Either a continuous leaf or a limit node with children ``0, 1, 2, ...``."""

    codomain: SpaceCode
    leaf: ContinuousCode | None = None
    children: Callable[[int], "BaireCode"] | None = None

    def __post_init__(self):
        if (self.leaf is None) == (self.children is None):
            raise ValueError("a Baire node is either a leaf or a limit")

    @classmethod
    def limit(cls, codomain: SpaceCode, children) -> "BaireCode":
        if callable(children):
            return cls(codomain, children=children)
        kids = list(children)
        if not kids:
            raise ValueError("a limit node needs children")
        return cls(codomain, children=lambda n: kids[min(n, len(kids) - 1)])

    @property
    def depth(self) -> int:
        return 0 if self.leaf is not None else 1 + self.children(0).depth


@dataclass(frozen=True)
class BaireValue:
    point: Point
    tolerance: Fraction
    stable_from: int


def eval_baire(xi: BaireCode, x: Point, width: int, eps, budget: int = 10_000) -> BaireValue:
    """Value at child ``width - 1`` once consecutive children agree within ``eps``.

    ``tolerance`` is the largest certified gap between consecutive children
    from ``stable_from`` on.
    """
    eps = rat(eps)
    if width < 2:
        raise ValueError("width must be at least 2")
    if xi.leaf is not None:
        return BaireValue(eval_continuous(xi.leaf, x, eps, budget), ZERO, 0)
    vals = [eval_baire(xi.children(n), x, width, eps, budget) for n in range(width)]
    p = _bits(eps) + 4
    gaps = []
    for v, w in zip(vals, vals[1:]):
        e = exact_dist(xi.codomain, v.point, w.point)
        gaps.append(e if e is not None else dist_bounds(xi.codomain, v.point, w.point, p)[1])
    k = len(gaps)
    while k > 0 and gaps[k - 1] + vals[k - 1].tolerance + vals[k].tolerance <= eps:
        k -= 1
    if k > width - 2:
        raise DivergenceBudget(f"children {width - 2} and {width - 1} differ by more than {eps}")
    tol = max(gaps[k:]) + max(v.tolerance for v in vals[k:])
    return BaireValue(vals[-1].point, tol, k)


# ---------------------------------------------------------------------------
# Kleene-Brouwer order


def _kb_entry_key(v):
    return (0, v, "") if isinstance(v, int) else (1, 0, repr(v))


def _kb_entry_key_seq(sigma):
    return tuple(_kb_entry_key(v) for v in sigma)


def kb_compare(sigma: Sequence, tau: Sequence) -> int:
    """-1, 0 or 1: proper extensions come first, else the first disagreement decides."""
    sigma, tau = tuple(sigma), tuple(tau)
    for u, v in zip(sigma, tau):
        if u != v:
            return -1 if _kb_entry_key(u) < _kb_entry_key(v) else 1
    if len(sigma) == len(tau):
        return 0
    return -1 if len(sigma) > len(tau) else 1


def kb_linearize(nodes: Iterable[Sequence]) -> list[tuple]:
    return sorted((tuple(n) for n in nodes), key=functools.cmp_to_key(kb_compare))


# ---------------------------------------------------------------------------
# JSON


def encode_point(space: SpaceCode, a):
    if isinstance(space, IntervalSpace):
        return fmt(a)
    if isinstance(space, _SequenceSpace):
        return list(a)
    if hasattr(space, "factors"):
        return [encode_point(f, v) for f, v in zip(space.factors, a)]
    return a


def decode_point(space: SpaceCode, v):
    if isinstance(space, IntervalSpace):
        return rat(v)
    if isinstance(space, _SequenceSpace):
        if not isinstance(v, list) or not all(isinstance(t, int) and t >= 0 for t in v):
            raise ValueError(f"expected a stem (list of naturals), got {v!r}")
        return tuple(v)
    if hasattr(space, "factors"):
        return tuple(decode_point(f, t) for f, t in zip(space.factors, v))
    if not isinstance(v, int):
        raise ValueError(f"expected a point index, got {v!r}")
    return v


def continuous_to_json(phi: ContinuousCode, limit: int | None = None) -> list:
    items = phi.clauses.items if phi.clauses.finite else phi.clauses.take(limit or 64)
    return [[encode_point(phi.domain, c.a), fmt(c.r), encode_point(phi.codomain, c.b), fmt(c.q)] for c in items]


def continuous_from_json(doc, domain: SpaceCode, codomain: SpaceCode) -> ContinuousCode:
    if not isinstance(doc, list):
        raise ValueError("continuous code: expected a clause array")
    rows = []
    for k, row in enumerate(doc):
        if not isinstance(row, list) or len(row) != 4:
            raise ValueError(f"continuous code clause {k}: expected [a, r, b, q]")
        a, r, b, q = row
        rows.append((decode_point(domain, a), rat(r), decode_point(codomain, b), rat(q)))
    return code_from_table(domain, codomain, rows)


def borel_to_json(s: BorelCode) -> dict:
    def enc(node):
        if isinstance(node, BallLeaf):
            return {"ball": [encode_point(s.space, node.ball.center), fmt(node.ball.radius)]}
        op = "union" if isinstance(node, Cup) else "inter"
        return {"op": op, "children": [enc(c) for c in _kids(node).items]}

    if not s.finite:
        raise ValueError("only finite codes serialize")
    return enc(s.root)


def borel_from_json(doc, space: SpaceCode) -> BorelCode:
    def dec(node, path):
        if not isinstance(node, dict):
            raise ValueError(f"borel code at {path}: expected an object")
        if "ball" in node:
            a, r = node["ball"]
            return BallLeaf(Ball(decode_point(space, a), rat(r)))
        op = node.get("op")
        if op not in ("union", "inter"):
            raise ValueError(f"borel code at {path}.op: expected 'union' or 'inter'")
        kids = tuple(dec(c, f"{path}.children[{k}]") for k, c in enumerate(node.get("children", [])))
        return Cup(kids) if op == "union" else Cap(kids)

    return BorelCode(space, dec(doc, "$"))


def baire_to_json(xi: BaireCode, width: int = 4) -> dict:
    if xi.leaf is not None:
        return {"leaf": continuous_to_json(xi.leaf)}
    return {"limit": [baire_to_json(xi.children(n), width) for n in range(width)]}


def baire_from_json(doc, domain: SpaceCode, codomain: SpaceCode) -> BaireCode:
    if not isinstance(doc, dict):
        raise ValueError("baire code: expected an object")
    if "leaf" in doc:
        return BaireCode(codomain, leaf=continuous_from_json(doc["leaf"], domain, codomain))
    if "limit" in doc:
        return BaireCode.limit(codomain, [baire_from_json(c, domain, codomain) for c in doc["limit"]])
    raise ValueError("baire code: expected 'leaf' or 'limit'")
