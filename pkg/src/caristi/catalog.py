"""Named maps, potentials and Caristi systems shared by the CLI, tests and scripts."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable

from .codes import ContinuousCode, LscCode, interval_lsc_code, lipschitz_code
from .metric import UNIT_INTERVAL
from .potentials import PiecewiseLinear, random_piecewise, step_potential
from .solvers import CaristiSystem

HALF = Fraction(1, 2)

# name -> (map on [0, 1], Lipschitz constant)
INTERVAL_MAPS: dict[str, tuple[Callable, Fraction]] = {
    "halve": (lambda x: x / 2, HALF),
    "halve-to-one": (lambda x: (x + 1) / 2, HALF),
    "square": (lambda x: x * x, Fraction(2)),
    "fold": (lambda x: abs(x - HALF), Fraction(1)),
    "flip": (lambda x: 1 - x, Fraction(1)),
}


def interval_map_code(name: str) -> ContinuousCode:
    if name not in INTERVAL_MAPS:
        raise KeyError(f"unknown map {name!r}; choose from {sorted(INTERVAL_MAPS)}")
    fn, L = INTERVAL_MAPS[name]
    return lipschitz_code(fn, L, UNIT_INTERVAL, UNIT_INTERVAL, exact=fn)


def vee_potential() -> PiecewiseLinear:
    """``|x - 1/2|`` on [0, 1]: a kink at the minimum."""
    return PiecewiseLinear([(0, HALF), (HALF, 0), (1, HALF)])


def named_potential(name: str, rng: random.Random | None = None):
    if name == "step":
        return step_potential()
    if name == "vee":
        return vee_potential()
    if name == "random":
        return random_piecewise(rng or random.Random(0))
    raise KeyError(f"unknown potential {name!r}; choose from ['random', 'step', 'vee']")


def potential_code(name: str, rng: random.Random | None = None) -> LscCode:
    return interval_lsc_code(named_potential(name, rng), UNIT_INTERVAL)


def halving_system(toward=0) -> CaristiSystem:
    """``f(x) = (x + t) / 2`` with ``V(x) = 2 |x - t|`` on [0, 1]; fixed point ``t``."""
    t = Fraction(toward)
    f = lambda x: (Fraction(x) + t) / 2
    v = lambda x: 2 * abs(Fraction(x) - t)
    name = "halve" if t == 0 else "halve-to-one" if t == 1 else f"halve-to-{t}"
    return CaristiSystem(
        UNIT_INTERVAL,
        f,
        v,
        lipschitz_code(f, HALF, UNIT_INTERVAL, UNIT_INTERVAL, exact=f),
        interval_lsc_code(PiecewiseLinear([(0, 2 * t), (t, 0), (1, 2 * (1 - t))]) if 0 < t < 1 else PiecewiseLinear([(0, 2 * t), (1, 2 * (1 - t))]), UNIT_INTERVAL),
        None,
        name,
    )


SYSTEMS: dict[str, Callable[[], CaristiSystem]] = {
    "halve": lambda: halving_system(0),
    "halve-to-one": lambda: halving_system(1),
}
