"""Finite-sample alpha-envelopes and certified descent to delta-critical points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .codes import LscCode, eval_lsc
from .errors import BudgetExhausted, EmptySample
from .metric import Point, SpaceCode, dist_bounds, exact_dist
from .rationals import ZERO, fmt, rat


def _distance_hi(space: SpaceCode, x: Point, y: Point, prec: int = 40) -> Fraction:
    e = exact_dist(space, x, y)
    return e if e is not None else dist_bounds(space, x, y, prec)[1]


def _distance_lo(space: SpaceCode, x: Point, y: Point, prec: int = 40) -> Fraction:
    e = exact_dist(space, x, y)
    return e if e is not None else dist_bounds(space, x, y, prec)[0]


@dataclass(frozen=True, eq=False)
class EnvelopeApprox:
    """``x -> min over y in D of (V(y) + alpha * d(x, y))`` for a finite sample ``D``."""

    space: SpaceCode
    alpha: Fraction
    sample: tuple
    lower: tuple  # cached lower values of V on the sample

    def __call__(self, x: Point, prec: int = 40) -> Fraction:
        return min(v + self.alpha * _distance_hi(self.space, x, y, prec) for y, v in zip(self.sample, self.lower))

    def at(self, desc) -> Fraction:
        return self(self.space.point(desc))

    def argmin(self, x: Point) -> int:
        vals = [v + self.alpha * _distance_hi(self.space, x, y) for y, v in zip(self.sample, self.lower)]
        return vals.index(min(vals))


def _lower_value(v: LscCode, y: Point, budget: int) -> Fraction | None:
    if v.exact is not None and y.exact is not None:
        return rat(v.exact(y.exact))
    return eval_lsc(v, y, budget)


def envelope(v: LscCode, alpha, sample: Sequence[Point], budget: int = 200) -> EnvelopeApprox:
    alpha = rat(alpha)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    sample = tuple(sample)
    if not sample:
        raise EmptySample("the envelope needs at least one sample point")
    lower = tuple(_lower_value(v, y, budget) for y in sample)
    if any(q is None for q in lower):
        raise ValueError("the code gives no lower bound at some sample point")
    return EnvelopeApprox(v.domain, alpha, sample, lower)


# ---------------------------------------------------------------------------
# descent


@dataclass(frozen=True)
class PotentialView:
    """Lower and upper estimates of a potential at points."""

    space: SpaceCode
    lower: Callable[[Point], Fraction]
    upper: Callable[[Point], Fraction]


def potential_view(v, space: SpaceCode | None = None, budget: int = 200) -> PotentialView:
    """Wrap an lsc code, an envelope, or an exact function on descriptions.

    When an exact evaluator is available it is used for both estimates;
    otherwise the certified lower value stands in for the upper one.
    """
    if isinstance(v, EnvelopeApprox):
        return PotentialView(v.space, v, v)
    if isinstance(v, LscCode):
        space = space or v.domain

        def lower(x: Point) -> Fraction:
            if v.exact is not None and x.exact is not None:
                return v.exact(x.exact)
            return eval_lsc(v, x, budget)

        return PotentialView(space, lower, lower)
    if callable(v):
        if space is None:
            raise ValueError("a bare function needs its space")

        def exact(x: Point) -> Fraction:
            if x.exact is None:
                raise BudgetExhausted("exact potential needs a described point")
            return rat(v(x.exact))

        return PotentialView(space, exact, exact)
    raise TypeError(f"cannot use {v!r} as a potential")


@dataclass
class DescentResult:
    point: Point
    value: Fraction
    steps: int
    bound: int
    trace: list = field(default_factory=list)


def step_bound(v0: Fraction, delta: Fraction) -> int:
    """``ceil(V(x0) / delta) + 1``."""
    return math.ceil(v0 / delta) + 1


def ekeland_descent(
    v,
    space: SpaceCode | None,
    x0: Point,
    delta,
    sampler: Iterable[Point] | Callable[[], Iterable[Point]],
    budget: int = 200,
    encode: Callable | None = None,
) -> DescentResult:
    """Descend until no candidate drops the potential by ``max(d, delta)``.

    A candidate ``y`` is accepted when ``V(x) - V(y) >= max(d(x, y), delta)``
    with ``V(x)`` estimated from below and ``V(y)`` from above.  Among the
    accepted candidates the one of least ``V`` wins, ties going to the first
    generated.  Each step lowers ``V`` by at least ``delta``.
    """
    view = potential_view(v, space, budget)
    space = view.space
    delta = rat(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    candidates = list(sampler() if callable(sampler) else sampler)
    enc = encode or (lambda p: _encode_desc(p))
    x = x0
    vx = view.lower(x)
    bound = step_bound(max(vx, ZERO), delta)
    trace = [{"x": enc(x), "V_lower": fmt(vx), "step": fmt(ZERO)}]
    uppers = [view.upper(y) for y in candidates]
    steps = 0
    while True:
        best = None
        for y, vy in zip(candidates, uppers):
            gap = vx - vy
            if gap < delta:
                continue
            d = _distance_hi(space, x, y)
            if gap >= d and (best is None or vy < best[1]):
                best = (y, vy, d)
        if best is None:
            return DescentResult(x, vx, steps, bound, trace)
        steps += 1
        if steps > bound:
            raise BudgetExhausted(f"descent exceeded {bound} steps")
        x, _, d = best
        vx = view.lower(x)
        trace.append({"x": enc(x), "V_lower": fmt(vx), "step": fmt(d)})


def _encode_desc(p: Point):
    e = p.exact
    if isinstance(e, Fraction):
        return fmt(e)
    if e is None:
        return None
    return str(e)


def delta_critical_violations(v, space: SpaceCode | None, xstar: Point, delta, probes: Iterable[Point], budget: int = 200) -> list:
    """Probes ``y`` with ``d(x*, y) <= V(x*) - V(y) - delta`` (should be empty)."""
    view = potential_view(v, space, budget)
    delta = rat(delta)
    vx = view.lower(xstar)
    bad = []
    for y in probes:
        # err toward reporting: use the smallest distance consistent with the data
        if _distance_lo(view.space, xstar, y) <= vx - view.upper(y) - delta:
            bad.append(y)
    return bad


def critical_transfer_check(v: LscCode, alpha, xstar: Point, tol, budget: int = 200, sample: Sequence[Point] = ()) -> bool:
    """Does the sampled alpha-envelope agree with ``V`` at ``x*`` within ``tol``?"""
    alpha = rat(alpha)
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    env = envelope(v, alpha, sample, budget)
    vx = potential_view(v, budget=budget).lower(xstar)
    return abs(env(xstar) - vx) <= rat(tol)
