"""Exact piecewise potentials on rational intervals.

These are the concrete functions behind the interval codes: each can be
evaluated exactly at a rational and can report its infimum over a (possibly
half-open) subinterval, which is what an lsc clause needs.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .rationals import rat


@dataclass(frozen=True)
class Span:
    """Interval with per-end openness; ``left <= right``."""

    left: Fraction
    right: Fraction
    left_closed: bool = False
    right_closed: bool = False

    def contains(self, x: Fraction) -> bool:
        above = x > self.left or (self.left_closed and x == self.left)
        below = x < self.right or (self.right_closed and x == self.right)
        return above and below

    @property
    def empty(self) -> bool:
        return self.left > self.right or (self.left == self.right and not (self.left_closed and self.right_closed))


class PiecewiseLinear:
    """Continuous piecewise-linear function through the given knots."""

    def __init__(self, knots: Sequence[tuple]):
        pts = sorted((rat(x), rat(y)) for x, y in knots)
        if len(pts) < 2:
            raise ValueError("need at least two knots")
        xs = [x for x, _ in pts]
        if len(set(xs)) != len(xs):
            raise ValueError("knot abscissae must be distinct")
        self.xs = xs
        self.ys = [y for _, y in pts]

    @property
    def lo(self) -> Fraction:
        return self.xs[0]

    @property
    def hi(self) -> Fraction:
        return self.xs[-1]

    def __call__(self, x) -> Fraction:
        x = rat(x)
        if x < self.xs[0] or x > self.xs[-1]:
            raise ValueError(f"{x} outside [{self.xs[0]}, {self.xs[-1]}]")
        j = bisect.bisect_right(self.xs, x)
        if j >= len(self.xs):
            return self.ys[-1]
        if j == 0:
            return self.ys[0]
        x0, x1, y0, y1 = self.xs[j - 1], self.xs[j], self.ys[j - 1], self.ys[j]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    def inf_on(self, span: Span) -> Fraction:
        # continuity makes the openness of the ends irrelevant
        left, right = max(span.left, self.lo), min(span.right, self.hi)
        cands = [self(left), self(right)]
        cands += [y for x, y in zip(self.xs, self.ys) if left < x < right]
        return min(cands)

    @property
    def lipschitz(self) -> Fraction:
        return max(abs((y1 - y0) / (x1 - x0)) for x0, x1, y0, y1 in zip(self.xs, self.xs[1:], self.ys, self.ys[1:]))


class StepFunction:
    """Lower semi-continuous step function.

    ``values[j]`` holds on the open piece between consecutive breaks; at a
    break the value is the smaller neighbour, which makes the function lsc.
    """

    def __init__(self, lo, hi, breaks: Sequence, values: Sequence):
        self.lo, self.hi = rat(lo), rat(hi)
        self.breaks = [rat(b) for b in breaks]
        self.values = [rat(v) for v in values]
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("need one more value than breaks")
        edges = [self.lo] + self.breaks + [self.hi]
        if any(a >= b for a, b in zip(edges, edges[1:])):
            raise ValueError("breaks must be strictly inside and increasing")

    def __call__(self, x) -> Fraction:
        x = rat(x)
        if x < self.lo or x > self.hi:
            raise ValueError(f"{x} outside [{self.lo}, {self.hi}]")
        j = bisect.bisect_left(self.breaks, x)
        if j < len(self.breaks) and self.breaks[j] == x:
            return min(self.values[j], self.values[j + 1])
        return self.values[j]

    def inf_on(self, span: Span) -> Fraction:
        edges = [self.lo] + self.breaks + [self.hi]
        cands = []
        for j, v in enumerate(self.values):
            a, b = edges[j], edges[j + 1]
            if a < span.right and span.left < b:
                cands.append(v)
        for j, b in enumerate(self.breaks):
            if span.contains(b):
                cands.append(min(self.values[j], self.values[j + 1]))
        for end in (self.lo, self.hi):
            if span.contains(end):
                cands.append(self(end))
        return min(cands)


def step_potential() -> StepFunction:
    """1 on [0, 1/2), 0 on [1/2, 1]."""
    return StepFunction(0, 1, [Fraction(1, 2)], [1, 0])


def constant_potential(c, lo=0, hi=1) -> PiecewiseLinear:
    c = rat(c)
    return PiecewiseLinear([(lo, c), (hi, c)])


def random_piecewise(rng: random.Random, pieces: int = 4, kind: str | None = None):
    """Seeded random nonnegative potential on [0, 1] with dyadic breakpoints."""
    kind = kind or rng.choice(["linear", "step"])
    cuts = sorted(rng.sample(range(1, 64), pieces - 1))
    breaks = [Fraction(c, 64) for c in cuts]
    if kind == "linear":
        xs = [Fraction(0)] + breaks + [Fraction(1)]
        return PiecewiseLinear([(x, Fraction(rng.randrange(0, 17), 8)) for x in xs])
    return StepFunction(0, 1, breaks, [Fraction(rng.randrange(0, 17), 8) for _ in range(pieces)])
