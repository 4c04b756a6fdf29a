"""Coded complete separable metric spaces, points, and rational balls.

A space is a countable set of *code points* with an exact rational distance.
Its completion is reached through :class:`Point`, a precision-indexed oracle
``i -> x_i`` with ``d(x_i, x_j) <= 2**-i`` for ``i <= j``.  Points that admit
a finite description (a rational, a code-point index, or an eventually
periodic sequence) carry it in ``Point.exact`` so that distances between them
can be computed exactly instead of approximated.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Any, Callable, Iterable, Sequence

from .errors import NotUltrametric, OracleFailure
from .rationals import ZERO, fmt, pow2, rat, unpair

# ---------------------------------------------------------------------------
# eventually periodic sequences


def _primitive(tail: tuple) -> tuple:
    n = len(tail)
    for p in range(1, n + 1):
        if n % p == 0 and tail == tail[:p] * (n // p):
            return tail[:p]
    return tail


@dataclass(frozen=True)
class Seq:
    """An eventually periodic sequence ``stem ⌢ tail ⌢ tail ⌢ ...``.

    Stored in normal form (shortest stem, primitive period), so structural
    equality is equality of the infinite sequences.
    """

    stem: tuple = ()
    tail: tuple = (0,)

    def __post_init__(self):
        stem, tail = tuple(self.stem), tuple(self.tail)
        if not tail:
            raise ValueError("tail must be nonempty")
        tail = _primitive(tail)
        while stem and stem[-1] == tail[-1]:
            tail = (stem[-1],) + tail[:-1]
            stem = stem[:-1]
        object.__setattr__(self, "stem", stem)
        object.__setattr__(self, "tail", tail)

    def __getitem__(self, n: int):
        if n < len(self.stem):
            return self.stem[n]
        return self.tail[(n - len(self.stem)) % len(self.tail)]

    def prefix(self, n: int) -> tuple:
        if n <= len(self.stem):
            return self.stem[:n]
        return self.stem + tuple(self[k] for k in range(len(self.stem), n))

    def first_difference(self, other: "Seq") -> int | None:
        if self == other:
            return None
        horizon = max(len(self.stem), len(other.stem)) + lcm(len(self.tail), len(other.tail))
        for n in range(horizon):
            if self[n] != other[n]:
                return n
        raise AssertionError("normal forms differ but sequences agree")  # pragma: no cover

    def extends(self, stem: Sequence) -> bool:
        return self.prefix(len(stem)) == tuple(stem)

    def __str__(self) -> str:
        tail = "".join(map(str, self.tail)) if len(self.tail) == 1 else "(" + ",".join(map(str, self.tail)) + ")"
        return "".join(map(str, self.stem)) + tail + "^ω" if all(
            isinstance(v, int) and 0 <= v < 10 for v in self.stem + self.tail
        ) else f"{self.stem}⌢{self.tail}^ω"


def concat(stem: Sequence, seq: Seq) -> Seq:
    return Seq(tuple(stem) + seq.stem, seq.tail)


def constant(stem: Sequence = (), symbol: int = 0) -> Seq:
    """``stem ⌢ symbol^ω``."""
    return Seq(tuple(stem), (symbol,))


# ---------------------------------------------------------------------------
# points and balls


@dataclass(frozen=True, eq=False)
class Point:
    """A point of the completion: ``oracle(i)`` is a code point ``x_i``."""

    oracle: Callable[[int], Any]
    exact: Any = None

    def approx(self, i: int):
        if i < 0:
            raise ValueError("precision index must be nonnegative")
        return self.oracle(i)

    def __repr__(self) -> str:
        return f"Point({self.exact!s})" if self.exact is not None else "Point(<oracle>)"


@dataclass(frozen=True)
class Ball:
    """Rational ball ``<center, radius>``; open unless ``closed`` is set."""

    center: Any
    radius: Fraction
    closed: bool = False

    def __post_init__(self):
        r = rat(self.radius)
        object.__setattr__(self, "radius", r)
        if r < 0 or (r == 0 and not self.closed):
            raise ValueError(f"ball radius must be positive, got {r}")


# ---------------------------------------------------------------------------
# spaces


class SpaceCode:
    """Base class: subclasses fix the code points and their distance."""

    kind: str = "abstract"
    ultrametric: bool = False
    compact: bool = False

    def d(self, a, b) -> Fraction:
        raise NotImplementedError

    def code_point(self, i: int):
        """The ``i``-th code point of a fixed enumeration of the dense set."""
        raise NotImplementedError

    def describe(self, a):
        """Exact description of the point determined by code point ``a``."""
        return a

    def as_code_point(self, desc):
        """Code point equal to ``desc``, or ``None`` if it is not one."""
        return desc

    def exact_d(self, u, v) -> Fraction:
        return self.d(u, v)

    def point(self, desc) -> Point:
        return Point(lambda i, _c=desc: _c, desc)

    def random_code_point(self, rng: random.Random):
        raise NotImplementedError

    def random_description(self, rng: random.Random):
        return self.describe(self.random_code_point(rng))

    @property
    def flags(self) -> dict:
        return {"ultrametric": self.ultrametric, "compact": self.compact}

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class _SequenceSpace(SpaceCode):
    """Shared machinery for Cantor and Baire space.

    Code points are finite stems read as ``stem ⌢ 0^ω``.
    """

    ultrametric = True
    alphabet: int | None = None

    def d(self, a, b) -> Fraction:
        a, b = tuple(a), tuple(b)
        n = max(len(a), len(b))
        a = a + (0,) * (n - len(a))
        b = b + (0,) * (n - len(b))
        for k in range(n):
            if a[k] != b[k]:
                return pow2(k)
        return ZERO

    def describe(self, a) -> Seq:
        return constant(a)

    def as_code_point(self, desc):
        if isinstance(desc, Seq):
            return desc.stem if desc.tail == (0,) else None
        return tuple(desc)

    def exact_d(self, u: Seq, v: Seq) -> Fraction:
        n = u.first_difference(v)
        return ZERO if n is None else pow2(n)

    def point(self, desc) -> Point:
        if not isinstance(desc, Seq):
            desc = constant(desc)
        return Point(desc.prefix, desc)

    def point_from_function(self, fn: Callable[[int], int]) -> Point:
        """Point given by an arbitrary coordinate function (no finite description)."""
        return Point(lambda i: tuple(fn(k) for k in range(i)))

    def _symbol(self, rng: random.Random) -> int:
        return rng.randrange(self.alphabet or 6)

    def random_code_point(self, rng: random.Random):
        return tuple(self._symbol(rng) for _ in range(rng.randrange(10)))

    def random_description(self, rng: random.Random) -> Seq:
        stem = self.random_code_point(rng)
        tail = tuple(self._symbol(rng) for _ in range(rng.randrange(1, 3)))
        return Seq(stem, tail)


class CantorSpace(_SequenceSpace):
    kind = "cantor"
    compact = True
    alphabet = 2

    def code_point(self, i: int) -> tuple:
        # shortlex order on binary stems
        return tuple(int(ch) for ch in bin(i + 1)[3:])


class BaireSpace(_SequenceSpace):
    kind = "baire"
    compact = False
    alphabet = None

    def code_point(self, i: int) -> tuple:
        if i == 0:
            return ()
        length, rest = unpair(i - 1)
        out = []
        for _ in range(length):
            head, rest = unpair(rest)
            out.append(head)
        out.append(rest)
        return tuple(out)


class IntervalSpace(SpaceCode):
    """``[lo, hi] ∩ Q`` with ``|a - b|``; ``None`` bounds give the real line."""

    kind = "interval"

    def __init__(self, lo=0, hi=1):
        self.lo = None if lo is None else rat(lo)
        self.hi = None if hi is None else rat(hi)
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise ValueError("empty interval")
        self.compact = self.lo is not None and self.hi is not None

    def contains(self, q) -> bool:
        return (self.lo is None or q >= self.lo) and (self.hi is None or q <= self.hi)

    def clamp(self, q: Fraction) -> Fraction:
        if self.lo is not None and q < self.lo:
            return self.lo
        if self.hi is not None and q > self.hi:
            return self.hi
        return q

    def d(self, a, b) -> Fraction:
        return abs(Fraction(a) - Fraction(b))

    def code_point(self, i: int) -> Fraction:
        from .rationals import rational_from_code

        seen, code = -1, 0
        while True:
            q = rational_from_code(code)
            if q is not None and self.contains(q):
                seen += 1
                if seen == i:
                    return q
            code += 1

    def point(self, desc) -> Point:
        q = rat(desc)
        return Point(lambda i, _q=q: _q, q)

    def point_from_oracle(self, fn: Callable[[int], Fraction]) -> Point:
        return Point(lambda i: rat(fn(i)))

    def random_code_point(self, rng: random.Random) -> Fraction:
        lo = self.lo if self.lo is not None else Fraction(-4)
        hi = self.hi if self.hi is not None else Fraction(4)
        den = rng.randrange(1, 65)
        return lo + (hi - lo) * Fraction(rng.randrange(den + 1), den)

    def __repr__(self) -> str:
        return f"IntervalSpace({self.lo}, {self.hi})"


class FiniteSpace(SpaceCode):
    """Finitely many labelled points with an explicit distance table."""

    kind = "finite_ultrametric"
    compact = True

    def __init__(self, table: Sequence[Sequence[Any]], labels: Sequence[str] | None = None, ultrametric: bool = True):
        self.table = tuple(tuple(rat(v) for v in row) for row in table)
        n = len(self.table)
        if n == 0 or any(len(row) != n for row in self.table):
            raise ValueError("distance table must be a nonempty square matrix")
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
        if len(self.labels) != n:
            raise ValueError("labels and distance table disagree in size")
        self.ultrametric = ultrametric
        if not ultrametric:
            self.kind = "finite"

    def __len__(self) -> int:
        return len(self.table)

    def d(self, a, b) -> Fraction:
        return self.table[a][b]

    def code_point(self, i: int) -> int:
        return i % len(self.table)

    def random_code_point(self, rng: random.Random) -> int:
        return rng.randrange(len(self.table))


class ProductSpace(SpaceCode):
    """Finite product with the max metric."""

    kind = "product"

    def __init__(self, factors: Sequence[SpaceCode]):
        self.factors = tuple(factors)
        if not self.factors:
            raise ValueError("empty product")
        self.ultrametric = all(f.ultrametric for f in self.factors)
        self.compact = all(f.compact for f in self.factors)

    def d(self, a, b) -> Fraction:
        return max(f.d(x, y) for f, x, y in zip(self.factors, a, b))

    def exact_d(self, u, v) -> Fraction:
        return max(f.exact_d(x, y) for f, x, y in zip(self.factors, u, v))

    def describe(self, a):
        return tuple(f.describe(x) for f, x in zip(self.factors, a))

    def as_code_point(self, desc):
        parts = tuple(f.as_code_point(x) for f, x in zip(self.factors, desc))
        return None if any(p is None for p in parts) else parts

    def code_point(self, i: int) -> tuple:
        out, rest = [], i
        for f in self.factors[:-1]:
            head, rest = unpair(rest)
            out.append(f.code_point(head))
        out.append(self.factors[-1].code_point(rest))
        return tuple(out)

    def point(self, desc) -> Point:
        pts = [f.point(x) for f, x in zip(self.factors, desc)]
        return Point(lambda i: tuple(p.approx(i) for p in pts), tuple(desc))

    def random_code_point(self, rng: random.Random):
        return tuple(f.random_code_point(rng) for f in self.factors)

    def random_description(self, rng: random.Random):
        return tuple(f.random_description(rng) for f in self.factors)


CANTOR = CantorSpace()
BAIRE = BaireSpace()
UNIT_INTERVAL = IntervalSpace(0, 1)
REAL_LINE = IntervalSpace(None, None)


# ---------------------------------------------------------------------------
# operations


def dist(space: SpaceCode, x: Point, y: Point, i: int) -> Fraction:
    """``d(x_{i+2}, y_{i+2})``, which lies within ``2**-i`` of ``d(x, y)``."""
    if i < 0:
        raise ValueError("precision index must be nonnegative")
    try:
        a, b = x.approx(i + 2), y.approx(i + 2)
    except OracleFailure:
        raise
    except Exception as exc:  # oracle bugs surface uniformly
        raise OracleFailure(f"point oracle failed at index {i + 2}: {exc}") from exc
    return space.d(a, b)


def exact_dist(space: SpaceCode, x: Point, y: Point) -> Fraction | None:
    if x.exact is None or y.exact is None:
        return None
    return space.exact_d(x.exact, y.exact)


def dist_bounds(space: SpaceCode, x: Point, y: Point, i: int) -> tuple[Fraction, Fraction]:
    """Certified enclosure ``lo <= d(x, y) <= hi``; tight when both are exact."""
    e = exact_dist(space, x, y)
    if e is not None:
        return e, e
    approx = dist(space, x, y, i)
    slack = pow2(i)
    return max(ZERO, approx - slack), approx + slack


def ball_membership(space: SpaceCode, x: Point, ball: Ball, prec: int = 40) -> str:
    """Three-valued membership: ``"in"``, ``"out"`` or ``"unknown"``.

    ``"out"`` requires ``d(x, center) > radius`` to be certified, so points on
    the boundary of an open ball stay ``"unknown"`` at every precision.
    """
    lo, hi = dist_bounds(space, x, space.point(space.describe(ball.center)), prec)
    if hi < ball.radius or (ball.closed and hi <= ball.radius):
        return "in"
    if lo > ball.radius:
        return "out"
    return "unknown"


def ball_subsetplus(space: SpaceCode, b1: Ball, b2: Ball) -> bool:
    """Formal inclusion ``b1 ⋐ b2``: ``d(a, b) + r < q``.

    For two closed balls the non-strict variant is used.
    """
    lhs = space.d(b1.center, b2.center) + b1.radius
    if b1.closed and b2.closed:
        return lhs <= b2.radius
    return lhs < b2.radius


def ball_subsetpluseq(space: SpaceCode, b1: Ball, b2: Ball) -> bool:
    return space.d(b1.center, b2.center) + b1.radius <= b2.radius


def closed_ball_nested(space: SpaceCode, inner: Ball, outer: Ball) -> bool:
    """Ultrametric closed-ball inclusion ``max{d(x, y), rho} <= delta``."""
    if not space.ultrametric:
        raise NotUltrametric(f"{space!r} is not flagged ultrametric")
    return max(space.d(inner.center, outer.center), inner.radius) <= outer.radius


def balls_disjoint(space: SpaceCode, b1: Ball, b2: Ball) -> bool:
    """Syntactic disjointness certificate ``d(b, b') >= q + q'`` (sufficient only)."""
    return space.d(b1.center, b2.center) >= b1.radius + b2.radius


@dataclass
class MetricReport:
    checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_metric_axioms(space: SpaceCode, sample_size: int = 100, seed: int = 0) -> MetricReport:
    """Check the metric (and, if flagged, ultrametric) axioms on seeded triples."""
    rng = random.Random(seed)
    report = MetricReport(checked=sample_size)
    for _ in range(sample_size):
        a, b, c = (space.random_code_point(rng) for _ in range(3))
        d = space.d
        for p in (a, b, c):
            if d(p, p) != 0:
                report.violations.append(("identity", (p,)))
        for p, q in ((a, b), (b, c), (a, c)):
            if d(p, q) != d(q, p):
                report.violations.append(("symmetry", (p, q)))
            if d(p, q) < 0:
                report.violations.append(("nonnegativity", (p, q)))
        for p, q, r in itertools.permutations((a, b, c)):
            if d(p, q) + d(q, r) < d(p, r):
                report.violations.append(("triangle", (p, q, r)))
            if space.ultrametric and d(p, r) > max(d(p, q), d(q, r)):
                report.violations.append(("ultrametric", (p, q, r)))
    # dedupe while keeping first-seen order
    seen, unique = set(), []
    for v in report.violations:
        key = repr(v)
        if key not in seen:
            seen.add(key)
            unique.append(v)
    report.violations = unique
    return report


# ---------------------------------------------------------------------------
# JSON


def space_from_json(doc: dict) -> SpaceCode:
    """Build a space from its JSON description; raises ``ValueError`` naming the bad field."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("space: missing field 'kind'")
    kind = doc["kind"]
    if kind == "cantor":
        return CANTOR
    if kind == "baire":
        return BAIRE
    if kind == "interval":
        lo, hi = doc.get("lo", "0/1"), doc.get("hi", "1/1")
        return IntervalSpace(None if lo is None else rat(lo), None if hi is None else rat(hi))
    if kind in ("finite_ultrametric", "finite"):
        if "dist" not in doc:
            raise ValueError("space: missing field 'dist'")
        try:
            table = [[rat(v) for v in row] for row in doc["dist"]]
        except (TypeError, ValueError) as exc:
            raise ValueError(f"space.dist: {exc}") from exc
        labels = doc.get("points")
        return FiniteSpace(table, labels, ultrametric=(kind == "finite_ultrametric"))
    raise ValueError(f"space.kind: unknown kind {kind!r}")


def space_to_json(space: SpaceCode) -> dict:
    if isinstance(space, FiniteSpace):
        return {
            "kind": space.kind,
            "points": list(space.labels),
            "dist": [[fmt(v) for v in row] for row in space.table],
        }
    if isinstance(space, IntervalSpace):
        return {
            "kind": "interval",
            "lo": None if space.lo is None else fmt(space.lo),
            "hi": None if space.hi is None else fmt(space.hi),
        }
    return {"kind": space.kind}


def load_space(path) -> SpaceCode:
    with open(path) as fh:
        return space_from_json(json.load(fh))


def sample_points(space: SpaceCode, n: int, seed: int = 0) -> list[Point]:
    rng = random.Random(seed)
    return [space.point(space.random_description(rng)) for _ in range(n)]


def grid(lo, hi, k: int) -> list[Fraction]:
    """``2**k + 1`` equally spaced rationals from ``lo`` to ``hi``."""
    lo, hi = rat(lo), rat(hi)
    n = 1 << k
    return [lo + (hi - lo) * Fraction(j, n) for j in range(n + 1)]


def as_points(space: SpaceCode, descs: Iterable) -> list[Point]:
    return [space.point(x) for x in descs]
