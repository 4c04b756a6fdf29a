"""Descend on a potential over a dyadic grid, then compare the envelope with V at the result."""

import argparse
import random

from caristi import catalog
from caristi.envelope import critical_transfer_check, delta_critical_violations, ekeland_descent, envelope
from caristi.metric import UNIT_INTERVAL, as_points, grid
from caristi.rationals import fmt, pow2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--potential", default="step", choices=["step", "vee", "random"])
    ap.add_argument("--grid", type=int, default=8)
    ap.add_argument("--alpha", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    code = catalog.potential_code(args.potential, rng)
    pts = as_points(UNIT_INTERVAL, grid(0, 1, args.grid))
    delta = pow2(args.grid)

    res = ekeland_descent(code, None, pts[0], delta, pts)
    print(f"descent on V: {res.steps} steps (bound {res.bound})")
    for row in res.trace:
        print(f"  x = {row['x']:>9s}  V >= {row['V_lower']:>7s}  step {row['step']}")
    bad = delta_critical_violations(code, None, res.point, delta, pts)
    print(f"delta-critical against the grid: {'yes' if not bad else f'no ({len(bad)} violations)'}")

    env = envelope(code, args.alpha, pts)
    on_env = ekeland_descent(env, None, pts[0], delta, pts)
    x = on_env.point
    ok = critical_transfer_check(code, args.alpha, x, pow2(6), sample=pts)
    print(f"descent on the {args.alpha}-envelope ends at {fmt(x.exact)}: envelope {fmt(env(x))}, V {fmt(code.exact(x.exact))}, agree within 2^-6: {ok}")


if __name__ == "__main__":
    main()
