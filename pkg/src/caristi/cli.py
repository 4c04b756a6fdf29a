"""Command-line front end: load inputs, run solvers and verifiers, print exact JSON reports.

Exit status: 0 when no entry fails, 1 when some entry fails (or, with
``--strict``, when some entry is indeterminate), 2 on unreadable input.
"""

from __future__ import annotations

import argparse
import itertools
import json
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from . import catalog
from .codes import (
    borel_to_continuous,
    continuous_to_borel,
    eval_continuous,
    eval_lsc,
    interval_lsc_code,
    kb_compare,
    kb_linearize,
    lsc_to_monotone_limit,
    monotone_limit_to_lsc,
)
from .envelope import (
    critical_transfer_check,
    delta_critical_violations,
    ekeland_descent,
    envelope,
)
from .errors import BudgetError, CaristiError
from .gadgets import (
    BaireGadget,
    CantorGadget,
    FiniteTree,
    InjectionTable,
    IntervalGadget,
    manifest,
)
from .metric import BAIRE, CANTOR, UNIT_INTERVAL, FiniteSpace, Seq, constant, dist_bounds, grid, space_from_json
from .rationals import ZERO, fmt, pow2, rat
from .solvers import (
    SEQUENCE_MAPS,
    UltrametricProblem,
    banach_caristi_iterate,
    check_point,
    encode_desc,
    priess_crampe_solve,
    run_length,
    verify_caristi,
    with_orbit,
)


class InputError(Exception):
    """Unreadable or schema-violating input; reported with exit status 2."""


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _parse(path: str, loader):
    doc = load_json(path)
    try:
        return loader(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _rat_arg(text: str, name: str) -> Fraction:
    try:
        return rat(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"--{name}: cannot read {text!r} as a rational") from exc


def _jsonable(v):
    if isinstance(v, Fraction):
        return fmt(v)
    if isinstance(v, Seq):
        return {"stem": list(v.stem), "tail": list(v.tail)}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {k: _jsonable(u) for k, u in v.items()}
    return v


@dataclass
class Report:
    command: dict
    body: dict = field(default_factory=dict)
    entries: list = field(default_factory=list)

    def add(self, verdict: str, **info) -> None:
        self.entries.append({"index": len(self.entries), "verdict": verdict, **info})

    @property
    def summary(self) -> dict:
        out = {"pass": 0, "fail": 0, "indeterminate": 0}
        for e in self.entries:
            out[e["verdict"]] += 1
        return out

    def to_json(self) -> dict:
        return {"command": self.command, **_jsonable(self.body), "entries": _jsonable(self.entries), "summary": self.summary}


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args, rng, rep: Report) -> None:
    k = args.precision
    if args.space in ("cantor", "baire"):
        space = CANTOR if args.space == "cantor" else BAIRE
        if args.map not in SEQUENCE_MAPS:
            raise InputError(f"--map: unknown map {args.map!r}; choose from {sorted(SEQUENCE_MAPS)}")
        problem = UltrametricProblem(space, SEQUENCE_MAPS[args.map], name=args.map)
        if args.map == "headdup":
            # not strictly contracting: follow a single orbit so the balls stay nested
            problem = with_orbit(problem, constant((1,)), interleave=False)
    else:
        space = _parse(args.space, space_from_json)
        if not isinstance(space, FiniteSpace):
            raise InputError(f"{args.space}: solve-ultrametric needs cantor, baire, or a finite space")
        if args.map is None:
            raise InputError("--map: a finite space needs a map file")
        idx = {lab: i for i, lab in enumerate(space.labels)}

        def load_map(doc):
            table = doc["map"] if isinstance(doc, dict) else None
            if not isinstance(table, dict):
                raise ValueError("missing field 'map' (an object from label to label)")
            for a, b in table.items():
                if a not in idx or b not in idx:
                    raise ValueError(f"map: unknown label in {a!r} -> {b!r}")
            if set(table) != set(idx):
                raise ValueError("map: every point needs an image")
            return {idx[a]: idx[b] for a, b in table.items()}

        mapping = _parse(args.map, load_map)
        problem = UltrametricProblem(space, mapping.__getitem__, name="table")
    try:
        res = priess_crampe_solve(problem, k, n_max=args.budget)
    except BudgetError as exc:
        rep.add("indeterminate", reason=str(exc))
        return
    if isinstance(res.point, Seq):
        rep.body["fixed_point_stem"] = run_length(res.point.prefix(k))
    else:
        rep.body["fixed_point"] = space.labels[res.point]
    rep.body["residual"] = f"≤ {fmt(pow2(k))}"
    rep.body["residual_exact"] = fmt(res.residual)
    rep.body["iterations"] = res.iterations
    rep.body["ball_trace"] = res.ball_trace
    rep.body["unique_check"] = res.unique_check
    monotone = all(a >= b for a, b in zip(res.trace, res.trace[1:]))
    rep.add("pass" if res.residual <= pow2(k) and monotone else "fail", check="residual and monotone descent")


def _system(name: str):
    if name not in catalog.SYSTEMS:
        raise InputError(f"--map: unknown system {name!r}; choose from {sorted(catalog.SYSTEMS)}")
    return catalog.SYSTEMS[name]()


def cmd_iterate(args, rng, rep: Report) -> None:
    sys_ = _system(args.map)
    fixed = Fraction(0) if args.map == "halve" else Fraction(1)
    x0 = _rat_arg(args.x0, "x0") if args.x0 is not None else 1 - fixed
    eps = pow2(args.precision)
    try:
        res = banach_caristi_iterate(sys_, x0, eps, n_max=args.budget)
    except BudgetError as exc:
        rep.add("indeterminate", reason=str(exc))
        return
    except CaristiError as exc:
        rep.add("fail", reason=str(exc))
        return
    rep.body.update(point=res.point, iterations=res.iterations, certificates=res.certificates)
    for c in res.certificates:
        ok = rat(c["V_next"]) <= rat(c["V"]) and rat(c["path"]) <= rat(res.certificates[0]["V"]) - rat(c["V_next"])
        rep.add("pass" if ok else "fail", step=c["n"], check="V nonincreasing and path length within V drop")
    close = abs(res.point - fixed) <= eps
    rep.add("pass" if close else "fail", check="distance to fixed point", distance=abs(res.point - fixed))


def _interval_sampler(k: int):
    if not 0 <= k <= 16:
        raise InputError("--grid: expected an exponent between 0 and 16")
    return [UNIT_INTERVAL.point(q) for q in grid(0, 1, k)]


def _fresh(rng: random.Random, n: int, bits: int = 12) -> list:
    return [UNIT_INTERVAL.point(Fraction(rng.randrange((1 << bits) + 1), 1 << bits)) for _ in range(n)]


def cmd_descent(args, rng, rep: Report) -> None:
    code = catalog.potential_code(args.potential, rng)
    delta = _rat_arg(args.delta, "delta")
    x0 = UNIT_INTERVAL.point(_rat_arg(args.x0 or "0", "x0"))
    sample = _interval_sampler(args.grid)
    try:
        res = ekeland_descent(code, UNIT_INTERVAL, x0, delta, sample, budget=args.budget)
    except BudgetError as exc:
        rep.add("indeterminate", reason=str(exc))
        return
    rep.body.update(trace=res.trace, point=res.point.exact, value=res.value, steps=res.steps, bound=res.bound)
    rep.add("pass" if res.steps <= res.bound else "fail", check="step bound")
    probes = _fresh(rng, args.samples)
    for y in probes:
        bad = delta_critical_violations(code, UNIT_INTERVAL, res.point, delta, [y], budget=args.budget)
        rep.add("fail" if bad else "pass", check="delta-critical", y=y.exact)


def cmd_envelope(args, rng, rep: Report) -> None:
    code = catalog.potential_code(args.potential, rng)
    alpha = _rat_arg(args.alpha, "alpha")
    pts = _interval_sampler(args.grid)
    env = envelope(code, alpha, pts, budget=args.budget)
    vals = [env(p) for p in pts]
    exact = code.exact
    dominated = all(v <= exact(p.exact) for v, p in zip(vals, pts))
    rep.add("pass" if dominated else "fail", check="envelope below V on the grid")
    lip = all(abs(a - b) <= alpha * abs(p.exact - q.exact) for (a, p), (b, q) in itertools.combinations(zip(vals, pts), 2))
    rep.add("pass" if lip else "fail", check="alpha-Lipschitz on all grid pairs")
    envs = [envelope(code, a, pts, budget=args.budget) for a in (0, 1, 2, 4)]
    mono = all(e1(p) <= e2(p) for e1, e2 in zip(envs, envs[1:]) for p in pts)
    rep.add("pass" if mono else "fail", check="monotone in alpha over 0, 1, 2, 4")
    if alpha > 1:
        res = ekeland_descent(env, UNIT_INTERVAL, pts[0], pow2(args.grid), pts, budget=args.budget)
        ok = critical_transfer_check(code, alpha, res.point, pow2(6), budget=args.budget, sample=pts)
        rep.add("pass" if ok else "fail", check="envelope meets V at the descent output", point=res.point.exact)
    step = max(1, len(pts) // 16)
    rep.body["values"] = [[p.exact, v] for p, v in list(zip(pts, vals))[::step]]


def _gadget(args, rng):
    kind = args.kind
    if kind == "cantor":
        if not args.tree:
            raise InputError("--tree: the cantor gadget needs a tree file")
        t = _parse(args.tree, FiniteTree.from_json)
        return CantorGadget(t)
    if kind == "baire":
        if not args.injection:
            raise InputError("--injection: the baire gadget needs an injection file")
        return BaireGadget(_parse(args.injection, InjectionTable.from_json))
    if kind == "interval":
        if not args.c:
            raise InputError("--c: the interval gadget needs a rational list file")

        def load_c(doc):
            c = doc["c"] if isinstance(doc, dict) and "c" in doc else None
            if not isinstance(c, list):
                raise ValueError("missing field 'c' (a list of \"p/q\" strings)")
            return [rat(v) for v in c]

        c = _parse(args.c, load_c)
        stage = args.stage if args.stage is not None else len(c) - 2
        try:
            return IntervalGadget(c, stage)
        except ValueError as exc:
            raise InputError(f"{args.c}: {exc}") from exc
    raise InputError(f"unknown gadget {kind!r}")


def cmd_gadget(args, rng, rep: Report) -> None:
    g = _gadget(args, rng)
    rep.body["manifest"] = manifest(g)
    if not args.verify:
        return
    system = g.system
    points = [g.sample(rng) for _ in range(args.samples)]
    fixed = 0
    for x in points:
        e = check_point(system, x, args.budget)
        fixed += bool(e.get("fixed_point"))
        info = {k: e[k] for k in ("x", "d", "V_x", "V_fx") if k in e}
        verdict = e["verdict"]
        if verdict == "pass":
            try:
                cert = g.certify(x)
            except BudgetError as exc:
                rep.add("indeterminate", reason=str(exc), **info)
                continue
            failed = sorted(k for k, v in cert.items() if isinstance(v, bool) and not v)
            if "case" in cert:
                info["case"] = cert["case"]
            if failed:
                verdict = "fail"
                info["failed_checks"] = failed
        elif "reason" in e:
            info["reason"] = e["reason"]
        rep.add(verdict, **info)
    rep.body["fixed_points"] = fixed
    if isinstance(g, CantorGadget):
        bad = g.structural_checks()
        rep.add("fail" if bad else "pass", check="structural lemmas on every resolved leaf", problems=bad)
    if isinstance(g, IntervalGadget):
        xs = grid(0, 1, 7)[:100]
        mono = all(g.V_stage(s)(x) <= g.V_stage(s + 1)(x) for s in range(len(g.c) - 2) for x in xs)
        rep.add("pass" if mono else "fail", check="stages nondecreasing on 100 grid points")
        ends = all(g.ladder(n)[0] == 1 and g.ladder(n)[n + 2] == g.c[n] for n in range(len(g.c) - 1))
        rep.add("pass" if ends else "fail", check="ladder endpoints")


def cmd_verify(args, rng, rep: Report) -> None:
    system = _system(args.map)
    res = verify_caristi(system, samples=args.samples, seed=rng.randrange(1 << 30), budget=args.budget)
    for e in res.entries:
        e = dict(e)
        verdict = e.pop("verdict")
        e.pop("index")
        rep.add(verdict, **e)
    rep.body["fixed_points"] = res.fixed_points


# the converted code enumerates clauses of all balls; reaching 2**-24 needs a deep scan
ROUND_TRIP_BUDGET = 50_000


def cmd_convert(args, rng, rep: Report) -> None:
    eps = pow2(args.precision)
    if args.potential:
        code = catalog.potential_code(args.potential, rng)
        if not 4 <= args.stages <= 16:
            raise InputError("--stages: expected a count between 4 and 16")
        # stage k reads 2**(k+1) clauses: dyadic cells down to about 2**-k
        tol = pow2(args.stages - 3)
        back = monotone_limit_to_lsc(lambda k: lsc_to_monotone_limit(code, k, 2 ** (k + 1)), args.stages)
        rep.body["tolerance"] = tol
        for p in _fresh(rng, args.samples, 8):
            v, w = code.exact(p.exact), eval_lsc(back, p)
            ok = w is not None and w <= v and v - w <= tol
            rep.add("pass" if ok else "fail", x=p.exact, V=v, round_trip=w)
        return
    if args.map is None:
        raise InputError("--map or --potential is required")
    try:
        phi = catalog.interval_map_code(args.map)
    except KeyError as exc:
        raise InputError(f"--map: {exc.args[0]}") from exc
    back = borel_to_continuous(continuous_to_borel(phi))
    for p in _fresh(rng, args.samples, 10):
        try:
            y1 = eval_continuous(phi, p, eps / 4)
            y2 = eval_continuous(back, p, eps / 4, budget=ROUND_TRIP_BUDGET)
        except BudgetError as exc:
            rep.add("indeterminate", x=p.exact, reason=str(exc))
            continue
        hi = dist_bounds(UNIT_INTERVAL, y1, y2, args.precision + 1)[1]
        rep.add("pass" if hi <= eps else "fail", x=p.exact, distance_bound=hi)


def cmd_kb(args, rng, rep: Report) -> None:
    t = _parse(args.tree, FiniteTree.from_json)
    nodes = sorted(t.nodes)
    order = kb_linearize(nodes)
    rep.body["linearization"] = [list(n) for n in order]
    total = all(
        kb_compare(a, b) == -kb_compare(b, a) and (kb_compare(a, b) == 0) == (a == b) for a in nodes for b in nodes
    )
    rep.add("pass" if total else "fail", check="antisymmetric and total")
    trans = all(
        not (kb_compare(a, b) < 0 and kb_compare(b, c) < 0) or kb_compare(a, c) < 0
        for a in nodes
        for b in nodes
        for c in nodes
    )
    rep.add("pass" if trans else "fail", check="transitive")
    sorted_ok = all(kb_compare(a, b) < 0 for a, b in zip(order, order[1:]))
    rep.add("pass" if sorted_ok else "fail", check="linearization increasing")


COMMANDS = {
    "solve-ultrametric": cmd_solve,
    "iterate": cmd_iterate,
    "descent": cmd_descent,
    "envelope": cmd_envelope,
    "gadget": cmd_gadget,
    "verify": cmd_verify,
    "convert": cmd_convert,
    "kb": cmd_kb,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed of the single random generator")
    common.add_argument("--budget", type=int, default=200, help="search budget")
    common.add_argument("--precision", type=int, default=20, help="target precision exponent k (2**-k)")
    common.add_argument("--samples", type=int, default=200, help="number of sampled points")
    common.add_argument("--strict", action="store_true", help="treat indeterminate entries as failures")
    common.add_argument("--out", help="write the report here instead of standard output")

    p = argparse.ArgumentParser(prog="caristi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve-ultrametric", parents=[common], help="approximate fixed point of a map on an ultrametric space")
    s.add_argument("--space", default="cantor", help="cantor, baire, or a finite space JSON file")
    s.add_argument("--map", default="shift0", help="shift0, shift1, headdup, or a JSON label map for finite spaces")
    s = sub.add_parser("iterate", parents=[common], help="Banach-style iteration with Caristi certificates")
    s.add_argument("--map", default="halve", help=f"one of {sorted(catalog.SYSTEMS)}")
    s.add_argument("--x0", help="starting rational")
    s = sub.add_parser("descent", parents=[common], help="certified descent to a delta-critical point")
    s.add_argument("--potential", default="step", choices=["step", "vee", "random"])
    s.add_argument("--delta", default="1/64")
    s.add_argument("--x0", help="starting rational")
    s.add_argument("--grid", type=int, default=8, help="candidates on the dyadic grid of step 2**-GRID")
    s = sub.add_parser("envelope", parents=[common], help="alpha-envelope checks on a dyadic grid")
    s.add_argument("--potential", default="step", choices=["step", "vee", "random"])
    s.add_argument("--alpha", default="2")
    s.add_argument("--grid", type=int, default=8, help="sample on the dyadic grid of step 2**-GRID")
    s = sub.add_parser("gadget", parents=[common], help="build and verify a fixed-point-free Caristi system")
    s.add_argument("kind", choices=["cantor", "baire", "interval"])
    s.add_argument("--tree")
    s.add_argument("--injection")
    s.add_argument("--c")
    s.add_argument("--stage", type=int)
    s.add_argument("--verify", action="store_true")
    s = sub.add_parser("verify", parents=[common], help="sampled Caristi verification of a named system")
    s.add_argument("--map", default="halve", help=f"one of {sorted(catalog.SYSTEMS)}")
    s = sub.add_parser("convert", parents=[common], help="code conversion round trips")
    s.add_argument("--map", help=f"one of {sorted(catalog.INTERVAL_MAPS)}")
    s.add_argument("--potential", choices=["step", "vee", "random"])
    s.add_argument("--stages", type=int, default=13, help="lsc round trip stages; agreement is checked within 2**-(STAGES-3)")
    s = sub.add_parser("kb", parents=[common], help="Kleene-Brouwer linearization of a finite tree")
    s.add_argument("--tree", required=True)
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.precision < 1 or args.budget < 1 or args.samples < 1:
        print("error: --precision, --budget and --samples must be at least 1", file=sys.stderr)
        return 2
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    rep = Report(echo)
    rng = random.Random(args.seed)
    try:
        COMMANDS[args.command](args, rng, rep)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        rep.add("indeterminate", reason=str(exc))
    text = json.dumps(rep.to_json(), indent=2, ensure_ascii=False) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    s = rep.summary
    if s["fail"] or (args.strict and s["indeterminate"]):
        return 1
    return 0


def main() -> None:
    sys.exit(run())
