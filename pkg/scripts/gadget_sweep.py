"""Verify the fixed-point-free gadgets over many seeded instances and print a summary table."""

import argparse
import random
import time
from collections import Counter

from caristi.gadgets import BaireGadget, CantorGadget, IntervalGadget, random_injection, valid_cantor_trees
from caristi.rationals import pow2
from caristi.solvers import verify_caristi


def sweep_cantor(count, samples, seed):
    tally = Counter()
    for t in valid_cantor_trees(count, seed=seed):
        g = CantorGadget(t)
        tally["lemma failures"] += len(g.structural_checks())
        rep = verify_caristi(g.system, samples, seed=seed)
        tally.update(rep.summary)
        tally["fixed points"] += rep.fixed_points
        for x in g.samples(samples, seed=seed):
            tally[g.certify(x)["case"] + " case"] += 1
    return tally


def sweep_baire(count, samples, seed):
    tally = Counter()
    for k in range(count):
        g = BaireGadget(random_injection(random.Random(seed + k)))
        rep = verify_caristi(g.system, samples, seed=seed + k)
        tally.update(rep.summary)
        tally["fixed points"] += rep.fixed_points
        for x in g.samples(samples, seed=seed + k):
            c = g.certify(x)
            tally[c["case"] + " case"] += 1
            tally["lemma failures"] += not c["lemma"]
    return tally


def sweep_interval(stages, samples, seed):
    c = [1 - pow2(n) for n in range(stages + 2)]
    tally = Counter()
    for stage in range(1, stages + 1):
        g = IntervalGadget(c, stage)
        rep = verify_caristi(g.system, samples, seed=seed)
        tally.update(rep.summary)
        tally["fixed points"] += rep.fixed_points
    return tally


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=10, help="trees or injections per gadget")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    runs = [
        ("cantor", lambda: sweep_cantor(args.count, args.samples, args.seed)),
        ("baire", lambda: sweep_baire(args.count, args.samples, args.seed)),
        ("interval", lambda: sweep_interval(6, args.samples, args.seed)),
    ]
    for name, fn in runs:
        t0 = time.perf_counter()
        tally = fn()
        cells = ", ".join(f"{k} {v}" for k, v in sorted(tally.items()))
        print(f"{name:9s} {time.perf_counter() - t0:6.1f}s  {cells}")


if __name__ == "__main__":
    main()
