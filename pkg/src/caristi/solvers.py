"""Fixed-point search: ultrametric descent, Caristi iteration, and system verification."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .codes import BaireCode, ContinuousCode, LscCode, eval_baire, eval_continuous, eval_lsc
from .errors import BudgetError, BudgetExhausted, CaristiViolation, NestingViolation, NoProgress, NotUltrametric
from .metric import (
    Ball,
    FiniteSpace,
    Point,
    Seq,
    SpaceCode,
    _SequenceSpace,
    closed_ball_nested,
    concat,
    dist,
    dist_bounds,
)
from .rationals import ZERO, fmt, pow2, unpair

# ---------------------------------------------------------------------------
# ultrametric problems


@dataclass(frozen=True, eq=False)
class UltrametricProblem:
    """A map on an ultrametric space, given exactly on finite descriptions.

    ``enumeration(i)`` is the ``i``-th candidate (a description); the default
    lists every code point infinitely often.
    """

    space: SpaceCode
    f: Callable[[Any], Any]
    enumeration: Callable[[int], Any] | None = None
    name: str = ""

    def __post_init__(self):
        if not self.space.ultrametric:
            raise NotUltrametric(f"{self.space!r} is not flagged ultrametric")

    def a(self, i: int):
        if self.enumeration is not None:
            return self.enumeration(i)
        return self.space.describe(self.space.code_point(unpair(i)[0]))

    def rho(self, x) -> Fraction:
        return self.space.exact_d(x, self.f(x))

    def rho_approx(self, x, z: int) -> Fraction:
        """``rho(x)`` to within ``2**-z``, read off the approximations only."""
        sp = self.space
        return dist(sp, sp.point(x), sp.point(self.f(x)), z)

    def realize(self, balls: Sequence[Ball]):
        """A point in the intersection of nested closed balls."""
        if not balls:
            raise ValueError("no balls to intersect")
        if isinstance(self.space, FiniteSpace):
            for p in range(len(self.space)):
                if all(self.space.d(p, b.center) <= b.radius for b in balls):
                    return p
            raise NestingViolation("closed balls have empty intersection")
        # nested ultrametric balls: the innermost center lies in all of them
        return balls[-1].center


def orbit_enumeration(problem: UltrametricProblem, start, interleave: bool = True) -> Callable[[int], Any]:
    """Candidates from the orbit ``start, f(start), ...``, optionally interleaved with the default list."""
    orbit = [start]

    def f_iter(k: int):
        while len(orbit) <= k:
            orbit.append(problem.f(orbit[-1]))
        return orbit[k]

    def enum(i: int):
        if not interleave:
            return f_iter(i)
        k, odd = divmod(i, 2)
        if odd:
            sp = problem.space
            return sp.describe(sp.code_point(unpair(k)[0]))
        return f_iter(k)

    return enum


def with_orbit(problem: UltrametricProblem, start, interleave: bool = True) -> UltrametricProblem:
    return UltrametricProblem(problem.space, problem.f, orbit_enumeration(problem, start, interleave), problem.name)


def rho_witness(problem: UltrametricProblem, a, b, below: int) -> int | None:
    """Least ``z < below`` whose approximations separate ``rho(a) < rho(b)`` by more than ``2 * 2**-z``."""
    for z in range(below):
        if problem.rho_approx(b, z) - problem.rho_approx(a, z) > 2 * pow2(z):
            return z
    return None


def _descent(problem: UltrametricProblem):
    """Yield ``(i, b_i, rho(b_i))`` forever."""
    b = problem.a(0)
    yield 0, b, problem.rho(b)
    for i in itertools.count():
        cand = problem.a(i + 1)
        if rho_witness(problem, cand, b, i) is not None:
            b = cand
        yield i + 1, b, problem.rho(b)


def build_descent_sequence(problem: UltrametricProblem, n: int) -> list:
    """``b_0 .. b_n``: a candidate replaces the current point once a witness proves it better."""
    return [b for _, b, _ in itertools.islice(_descent(problem), n + 1)]


@dataclass
class SolveResult:
    point: Any
    residual: Fraction
    iterations: int
    trace: list
    ball_trace: list
    unique_check: bool | None = None


def priess_crampe_solve(problem: UltrametricProblem, k: int, n_max: int = 1000, check_unique: bool = True) -> SolveResult:
    """Approximate fixed point with ``d(x*, f(x*)) <= 2**-k``.

    Runs the descent, checks exact nesting of the closed balls
    ``B̄_{rho(b_i)}(b_i)`` at every step and hands them to the completeness
    realizer once the radius is small enough.
    """
    target = pow2(k)
    sp = problem.space
    balls: list[Ball] = []
    trace = []
    for i, b, r in _descent(problem):
        ball_desc = Ball(b, r, closed=True)
        if balls:
            prev = balls[-1]
            if r > prev.radius:
                raise NestingViolation(f"rho increased at step {i}: {prev.radius} -> {r}")
            if not _nested(sp, ball_desc, prev):
                raise NestingViolation(f"ball {i} is not inside ball {i - 1}")
        balls.append(ball_desc)
        trace.append(r)
        if r <= target:
            break
        if i >= n_max:
            raise NoProgress(n_max, r)
    x = problem.realize(balls)
    residual = problem.rho(x)
    if residual > target:  # pragma: no cover - guarded by the nesting checks
        raise NestingViolation("realized point misses the target residual")
    unique = None
    if check_unique:
        unique = _unique_spot_check(problem, x, k, n_max)
    ball_trace = [{"center": encode_desc(sp, bl.center), "radius": fmt(bl.radius)} for bl in balls]
    return SolveResult(x, residual, len(balls) - 1, trace, ball_trace, unique)


def _nested(space: SpaceCode, inner: Ball, outer: Ball) -> bool:
    if isinstance(space, FiniteSpace):
        return closed_ball_nested(space, inner, outer)
    # descriptions rather than code points: use the exact distance
    return max(space.exact_d(inner.center, outer.center), inner.radius) <= outer.radius


def _unique_spot_check(problem: UltrametricProblem, x, k: int, n_max: int) -> bool | None:
    """Solve again from a shifted enumeration and compare."""
    shifted = UltrametricProblem(problem.space, problem.f, lambda i: problem.a(i + 7), problem.name)
    try:
        other = priess_crampe_solve(shifted, k, n_max, check_unique=False)
    except BudgetError:
        return None
    return problem.space.exact_d(x, other.point) <= pow2(k)


@dataclass
class ContractionReport:
    checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_strictly_contracting(problem: UltrametricProblem, samples: int = 100, seed: int = 0) -> ContractionReport:
    rng = random.Random(seed)
    sp = problem.space
    rep = ContractionReport(0)
    for _ in range(samples):
        x, y = sp.random_description(rng), sp.random_description(rng)
        d = sp.exact_d(x, y)
        if d == 0:
            continue
        rep.checked += 1
        if not sp.exact_d(problem.f(x), problem.f(y)) < d:
            rep.violations.append((x, y))
    return rep


# named maps on sequence spaces


def shift0(x: Seq) -> Seq:
    return concat((0,), x)


def shift1(x: Seq) -> Seq:
    return concat((1,), x)


def head_dup(x: Seq) -> Seq:
    return concat((x[0],), x)


SEQUENCE_MAPS = {"shift0": shift0, "shift1": shift1, "headdup": head_dup}


def encode_desc(space: SpaceCode, desc):
    """JSON form of a finite description."""
    if isinstance(desc, Seq):
        return {"stem": list(desc.stem), "tail": list(desc.tail)}
    if isinstance(desc, Fraction):
        return fmt(desc)
    if isinstance(space, FiniteSpace):
        return space.labels[desc]
    return desc


def run_length(values: Sequence[int]) -> str:
    """``(0,0,0,1)`` -> ``"0^3 1"``."""
    out = []
    for v, grp in itertools.groupby(values):
        n = len(list(grp))
        out.append(f"{v}^{n}" if n > 1 else str(v))
    return " ".join(out)


# ---------------------------------------------------------------------------
# Caristi systems


@dataclass(frozen=True, eq=False)
class CaristiSystem:
    """Space, map and potential; exact evaluators are used whenever present."""

    space: SpaceCode
    f_exact: Callable | None = None
    v_exact: Callable | None = None
    f_code: Any = None
    v_code: LscCode | None = None
    sampler: Callable[[random.Random], Any] | None = None
    name: str = ""

    def sample(self, rng: random.Random):
        return self.sampler(rng) if self.sampler is not None else self.space.random_description(rng)


@dataclass
class IterationResult:
    point: Any
    iterations: int
    certificates: list
    limit_bound: Fraction


def banach_caristi_iterate(sys: CaristiSystem, x0, eps, n_max: int = 100) -> IterationResult:
    """Iterate ``x_{n+1} = f(x_n)`` with exact Caristi certificates.

    Stops at the first ``n`` with ``d(x_n, x_{n+1}) <= eps`` and returns
    ``x_{n+1}``, the later of the two close iterates.
    """
    if sys.f_exact is None or sys.v_exact is None:
        raise ValueError("iteration needs exact evaluators for f and V")
    sp = sys.space
    eps = Fraction(eps)
    x = x0
    vx = sys.v_exact(x)
    v0 = vx
    total = ZERO
    certs = []
    for n in range(n_max):
        y = sys.f_exact(x)
        vy = sys.v_exact(y)
        d = sp.exact_d(x, y)
        if d > vx - vy:
            raise CaristiViolation(f"step {n}: d = {d} exceeds V drop {vx - vy}")
        total += d
        if total > v0 - vy:  # pragma: no cover - implied by the per-step check
            raise CaristiViolation(f"step {n}: path length exceeds total V drop")
        certs.append({"n": n, "x": encode_desc(sp, x), "d": fmt(d), "V": fmt(vx), "V_next": fmt(vy), "path": fmt(total)})
        x, vx = y, vy
        if d <= eps:
            return IterationResult(x, n + 1, certs, vx)
    raise BudgetExhausted(f"no step of size <= {eps} within {n_max} iterations")


@dataclass
class CaristiReport:
    entries: list = field(default_factory=list)

    def count(self, verdict: str) -> int:
        return sum(1 for e in self.entries if e["verdict"] == verdict)

    @property
    def summary(self) -> dict:
        return {"pass": self.count("pass"), "fail": self.count("fail"), "indeterminate": self.count("indeterminate")}

    @property
    def fixed_points(self) -> int:
        return sum(1 for e in self.entries if e["fixed_point"])


def check_point(sys: CaristiSystem, x, budget: int = 200) -> dict:
    """Verdict of the Caristi inequality at one described point."""
    sp = sys.space
    entry: dict = {"x": encode_desc(sp, x)}
    try:
        if sys.f_exact is not None:
            fx = sys.f_exact(x)
            d_lo = d_hi = sp.exact_d(x, fx)
        else:
            fx = None
            fp = _approx_image(sys, sp.point(x), budget)
            d_lo, d_hi = dist_bounds(sp, sp.point(x), fp, min(budget, 60))
    except BudgetError as exc:
        entry.update(verdict="indeterminate", reason=str(exc), fixed_point=False)
        return entry
    entry["d"] = fmt(d_hi) if d_lo == d_hi else [fmt(d_lo), fmt(d_hi)]
    entry["fixed_point"] = d_hi == 0
    if sys.v_exact is not None and fx is not None:
        vx, vfx = sys.v_exact(x), sys.v_exact(fx)
        entry["V_x"], entry["V_fx"] = fmt(vx), fmt(vfx)
        entry["verdict"] = "pass" if d_hi <= vx - vfx else "fail"
        return entry
    # without an upper estimate of V(f(x)) only a lower value of V(x) is known
    if sys.v_code is not None:
        entry["V_x_lower"] = fmt(eval_lsc(sys.v_code, sp.point(x), budget))
    entry["verdict"] = "indeterminate"
    return entry


def _approx_image(sys: CaristiSystem, x: Point, budget: int) -> Point:
    code = sys.f_code
    if isinstance(code, ContinuousCode):
        return eval_continuous(code, x, pow2(20), budget)
    if isinstance(code, BaireCode):
        return eval_baire(code, x, 8, pow2(20), budget).point
    raise BudgetExhausted("no evaluable map")


def verify_caristi(sys: CaristiSystem, samples: int = 200, seed: int = 0, budget: int = 200, points: Sequence | None = None) -> CaristiReport:
    rng = random.Random(seed)
    xs = list(points) if points is not None else [sys.sample(rng) for _ in range(samples)]
    rep = CaristiReport()
    for k, x in enumerate(xs):
        entry = check_point(sys, x, budget)
        entry["index"] = k
        rep.entries.append(entry)
    return rep
