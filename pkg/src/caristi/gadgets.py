"""Fixed-point-free Caristi systems built from finite combinatorial data.

Each gadget takes a finite input (a binary tree, an injection table, a list of
rationals), builds exact evaluators for the map and the potential, codes for
both, a sampler that reaches every case of the inequality, and a per-point
certificate that re-checks the case analysis with exact rationals.

Finite inputs are truncations of infinite objects; wherever an evaluation
would need data past the truncation a ``TruncationError`` subclass is raised
instead of guessing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Sequence

from .codes import (
    BaireCode,
    Clause,
    ContinuousCode,
    Enumeration,
    LscCode,
    cylinder_lsc_code,
    lipschitz_code,
    monotone_limit_to_lsc,
)
from .errors import StageOutOfRange, TableExhausted, TreeTooShallow, TruncationError
from .metric import (
    BAIRE,
    CANTOR,
    REAL_LINE,
    UNIT_INTERVAL,
    IntervalSpace,
    Point,
    Seq,
    _SequenceSpace,
    constant,
)
from .potentials import PiecewiseLinear
from .rationals import ZERO, fmt, least_code_rational, pair, pow2, rat
from .solvers import CaristiSystem

# ---------------------------------------------------------------------------
# finite trees


class FiniteTree:
    """Prefix-closed finite set of finite sequences of naturals."""

    def __init__(self, nodes: Iterable[Sequence[int]]):
        self.nodes = frozenset(tuple(n) for n in nodes) | {()}
        for n in self.nodes:
            if n and n[:-1] not in self.nodes:
                raise ValueError(f"tree is not prefix-closed: {n} present without {n[:-1]}")
            if any((not isinstance(v, int)) or v < 0 for v in n):
                raise ValueError(f"tree node {n} is not a sequence of naturals")

    def __contains__(self, node) -> bool:
        return tuple(node) in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(sorted(self.nodes, key=lambda s: (len(s), s)))

    @property
    def depth(self) -> int:
        return max(len(n) for n in self.nodes)

    def children(self, node) -> list[tuple]:
        node = tuple(node)
        return sorted(n for n in self.nodes if len(n) == len(node) + 1 and n[:-1] == node)

    def is_leaf(self, node) -> bool:
        return not self.children(node)

    def at_level(self, n: int) -> list[tuple]:
        return sorted(s for s in self.nodes if len(s) == n)

    def to_json(self) -> dict:
        return {"tree": [list(n) for n in self]}

    @classmethod
    def from_json(cls, doc) -> "FiniteTree":
        if isinstance(doc, dict):
            if "tree" not in doc:
                raise ValueError("tree: missing field 'tree'")
            doc = doc["tree"]
        if not isinstance(doc, list):
            raise ValueError("tree: expected a list of nodes")
        for k, n in enumerate(doc):
            if not isinstance(n, list):
                raise ValueError(f"tree[{k}]: expected a list of naturals")
        return cls(doc)


def random_binary_tree(rng: random.Random, depth: int, branch: float = 0.45, stop: float = 0.25) -> FiniteTree:
    """Random binary tree of the given depth: each node splits, continues, or stops."""
    nodes = {()}
    frontier = [()]
    while frontier:
        node = frontier.pop()
        if len(node) >= depth:
            continue
        u = rng.random()
        if u < stop and node:
            continue
        kids = [(0,), (1,)] if u < stop + branch else [(rng.randrange(2),)]
        for k in kids:
            child = node + k
            nodes.add(child)
            frontier.append(child)
    return FiniteTree(nodes)


def valid_cantor_trees(count: int, seed: int = 0, max_depth: int = 8) -> list[FiniteTree]:
    """Seeded random binary trees on which the Cantor gadget can be built (rejection sampling)."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        t = random_binary_tree(rng, rng.randrange(4, max_depth + 1))
        try:
            CantorGadget(t)
        except (TruncationError, ValueError):
            continue
        out.append(t)
    return out


# ---------------------------------------------------------------------------
# common shape


class Gadget:
    """Shared interface: exact evaluators, codes, sampler and certificates."""

    space: Any
    name: str = "gadget"

    def V(self, x) -> Fraction:
        raise NotImplementedError

    def f(self, x):
        raise NotImplementedError

    def sample(self, rng: random.Random):
        raise NotImplementedError

    def certify(self, x) -> dict:
        raise NotImplementedError

    @property
    def v_code(self) -> LscCode | None:
        return None

    @property
    def f_code(self):
        return None

    @cached_property
    def system(self) -> CaristiSystem:
        return CaristiSystem(self.space, self.f, self.V, self.f_code, self.v_code, self.sample, self.name)

    def samples(self, n: int, seed: int = 0) -> list:
        rng = random.Random(seed)
        return [self.sample(rng) for _ in range(n)]


def _locally_constant_code(space: _SequenceSpace, value) -> ContinuousCode:
    """Continuous code of a map that is constant on the cylinders where ``value(stem)`` is defined."""
    from .codes import _cells, _cells_near
    import itertools

    def clause(stem):
        try:
            b = value(stem)
        except TruncationError:
            return None
        if b is None:
            return None
        return Clause(stem, pow2(len(stem) - 1), b, pow2(len(stem)))

    def full():
        for level in itertools.count():
            for stem, _ in _cells(space, level):
                yield clause(stem)

    def near(x):
        for level in itertools.count():
            for stem, _ in _cells_near(space, x, level):
                yield clause(stem)

    return ContinuousCode(space, space, Enumeration(full, near))


def _padded(stem: tuple, n: int) -> tuple:
    return stem + (0,) * max(0, n - len(stem))


# ---------------------------------------------------------------------------
# Cantor space gadget


def tilde(sigma: Sequence[int]) -> tuple:
    """Interleave with zeros: positions ``2i`` hold 0 and ``2i+1`` hold ``sigma(i)``."""
    out = []
    for v in sigma:
        out.extend((0, v))
    return tuple(out)


@dataclass(frozen=True)
class LeafData:
    sigma: tuple
    A: frozenset
    i: int
    plus: tuple | None  # None when the successor leaf lies past the truncation


class CantorGadget(Gadget):
    """Continuous fixed-point-free Caristi system on Cantor space from a binary tree.

    Nodes at the maximal depth ``D`` are the truncation frontier; the leaves
    used by the construction are the leaves of depth below ``D``.  A leaf is
    resolved when its successor leaf is inside the tree; the map is only
    evaluated on resolved leaves and on the escape set.
    """

    space = CANTOR
    name = "cantor"

    def __init__(self, tree: FiniteTree, tail_depth: int = 6):
        if any(v not in (0, 1) for n in tree.nodes for v in n):
            raise ValueError("the Cantor gadget needs a binary tree")
        self.tree = tree
        self.tail_depth = tail_depth
        self.D = tree.depth
        self.leaves = sorted(s for s in tree.nodes if len(s) < self.D and tree.is_leaf(s))
        if not self.leaves:
            raise TreeTooShallow(())
        self._prefixes = {tilde(s)[:k] for s in tree.nodes for k in range(2 * len(s) + 1)}
        self._leaf_enc = {tilde(s): s for s in self.leaves}
        self._frontier_enc = {tilde(s) for s in tree.nodes if len(s) == self.D}
        self.data: dict[tuple, LeafData] = {}
        for s in self.leaves:
            A = self.A(s)
            # a node of length |s| + 1 exists and does not extend the leaf s
            i = max(i for i in range(len(s)) if i not in A)
            self.data[s] = LeafData(s, A, i, self._plus(s, i))
        self.resolved = [s for s in self.leaves if self.data[s].plus is not None]
        if not self.resolved:
            raise TreeTooShallow(self.leaves[-1])
        self.eta = self.leaves[0]

    def A(self, sigma: tuple) -> frozenset:
        """Positions ``i`` whose flipped branch has no node of length ``|sigma| + 1``."""
        level = self.tree.at_level(len(sigma) + 1)
        out = set()
        for i in range(len(sigma)):
            branch = sigma[:i] + (1 - sigma[i],)
            if not any(t[: i + 1] == branch for t in level):
                out.add(i)
        return frozenset(out)

    def _plus(self, sigma: tuple, i: int) -> tuple:
        branch = sigma[:i] + (1 - sigma[i],)
        cands = [s for s in self.leaves if len(s) > len(sigma) and s[: i + 1] == branch]
        return min(cands) if cands else None

    # -- classification of points

    def locate(self, x: Seq) -> tuple[str, tuple]:
        """``("leaf", sigma)`` if ``x`` extends an encoded leaf, ``("escape", tau)`` for ``tau`` in the escape set."""
        for n in range(2 * self.D + 2):
            p = x.prefix(n)
            if p in self._leaf_enc:
                return "leaf", self._leaf_enc[p]
            if p in self._frontier_enc:
                raise TruncationError(f"point follows the tree past depth {self.D}")
            if p not in self._prefixes:
                return "escape", p
        raise AssertionError("unreachable")  # pragma: no cover

    def in_escape_set(self, tau: tuple) -> bool:
        tau = tuple(tau)
        if not tau:
            return False
        nodes = self.tree.nodes
        if any(len(s) <= len(tau) and tilde(s)[: len(tau)] == tau and len(tilde(s)) >= len(tau) for s in nodes):
            return False
        parent = tau[:-1]
        return any(len(s) <= len(tau) and len(tilde(s)) > len(parent) and tilde(s)[: len(parent)] == parent for s in nodes)

    def escape_set(self) -> list[tuple]:
        out = []
        for p in sorted(self._prefixes, key=lambda s: (len(s), s)):
            if p in self._leaf_enc or p in self._frontier_enc:
                continue
            for b in (0, 1):
                q = p + (b,)
                if q not in self._prefixes:
                    out.append(q)
        return out

    # -- exact evaluators

    def V_leaf(self, sigma: tuple) -> Fraction:
        return 2 - sum((pow2(2 * i) for i in self.data[sigma].A), ZERO)

    def V(self, x: Seq) -> Fraction:
        kind, s = self.locate(x)
        return self.V_leaf(s) if kind == "leaf" else Fraction(3)

    def successor(self, kind: str, s: tuple) -> tuple:
        if kind != "leaf":
            return self.eta
        plus = self.data[s].plus
        if plus is None:
            raise TreeTooShallow(s)
        return plus

    def f(self, x: Seq) -> Seq:
        return constant(tilde(self.successor(*self.locate(x))))

    # -- codes

    def _stem_value(self, stem: tuple):
        try:
            kind, s = self.locate(Seq(stem, (0,)))
        except TruncationError:
            return None
        # the classification must already be decided by the stem itself
        decided = len(tilde(s)) if kind == "leaf" else len(s)
        return (kind, s) if decided <= len(stem) else None

    @cached_property
    def v_code(self) -> LscCode:
        def value(stem):
            hit = self._stem_value(stem)
            if hit is None:
                return None
            kind, s = hit
            return self.V_leaf(s) if kind == "leaf" else Fraction(3)

        return cylinder_lsc_code(CANTOR, value, exact=self.V)

    @cached_property
    def f_code(self) -> ContinuousCode:
        def value(stem):
            hit = self._stem_value(stem)
            if hit is None:
                return None
            return tilde(self.successor(*hit))

        return _locally_constant_code(CANTOR, value)

    # -- sampling and certificates

    def sample(self, rng: random.Random) -> Seq:
        while True:
            u = rng.random()
            if u < 0.4:
                stem = tilde(rng.choice(self.resolved))
            elif u < 0.7:
                stem = rng.choice(self.escape_set())
            elif u < 0.85:
                stem = tilde(self.data[rng.choice(self.resolved)].plus)
            else:
                stem = tuple(rng.randrange(2) for _ in range(rng.randrange(2 * self.D + 1)))
            tail = tuple(rng.randrange(2) for _ in range(rng.randrange(self.tail_depth + 1)))
            x = Seq(stem + tail, (rng.randrange(2),))
            try:
                self.f(x)
            except TruncationError:
                continue
            return x

    def structural_checks(self) -> list[str]:
        """Exact checks of the two lemmas relating ``A_sigma`` and ``A_{sigma+}``."""
        bad = []
        for s, dat in self.data.items():
            if dat.plus is None:
                continue
            A_plus = self.data[dat.plus].A
            if not (dat.i in A_plus and dat.i not in dat.A):
                bad.append(f"{s}: i_sigma not in A_plus minus A_sigma")
            for i in dat.A:
                if i < dat.i and i not in A_plus:
                    bad.append(f"{s}: {i} in A_sigma below i_sigma but not in A_plus")
        return bad

    def certify(self, x: Seq) -> dict:
        kind, s = self.locate(x)
        fx = self.f(x)
        d = CANTOR.exact_d(x, fx)
        vx, vfx = self.V(x), self.V(fx)
        out = {"case": kind, "d": d, "V_x": vx, "V_fx": vfx, "caristi": d <= vx - vfx, "moves": d > 0}
        if kind == "leaf":
            dat = self.data[s]
            out["expected_d"] = pow2(2 * dat.i + 1)
            out["distance_formula"] = d == out["expected_d"]
            out["V_range"] = Fraction(2, 3) < vx <= 2
        else:
            out["drop_formula"] = vx - vfx == 1 + sum((pow2(2 * i) for i in self.data[self.eta].A), ZERO)
        return out


# ---------------------------------------------------------------------------
# Baire space gadget


class InjectionTable:
    """Finite part ``m -> h(m)`` for ``m < bound`` of an injection of the naturals."""

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        table = {}
        for m, hm in pairs:
            if not (isinstance(m, int) and isinstance(hm, int)) or m < 0 or hm < 0:
                raise ValueError(f"injection pair ({m}, {hm}) is not a pair of naturals")
            if m in table:
                raise ValueError(f"injection lists m = {m} twice")
            table[m] = hm
        if len(set(table.values())) != len(table):
            raise ValueError("injection table is not injective")
        self.bound = 0
        while self.bound in table:
            self.bound += 1
        if self.bound != len(table):
            raise ValueError("injection table must cover an initial segment 0..N-1")
        self.table = table
        self.inverse = {v: m for m, v in table.items()}

    def __call__(self, m: int) -> int:
        if m not in self.table:
            raise TableExhausted(m)
        return self.table[m]

    def preimage(self, n: int, up_to: int) -> int | None:
        """``m <= up_to`` with ``h(m) = n``, if any (needs the table through ``up_to``)."""
        if up_to >= self.bound:
            raise TableExhausted(up_to)
        m = self.inverse.get(n)
        return m if m is not None and m <= up_to else None

    def to_json(self) -> dict:
        return {"injection": [[m, self.table[m]] for m in range(self.bound)]}

    @classmethod
    def from_json(cls, doc) -> "InjectionTable":
        if isinstance(doc, dict):
            if "injection" not in doc:
                raise ValueError("injection: missing field 'injection'")
            doc = doc["injection"]
        if not isinstance(doc, list) or not all(isinstance(p, list) and len(p) == 2 for p in doc):
            raise ValueError("injection: expected a list of [m, h(m)] pairs")
        return cls((p[0], p[1]) for p in doc)


def random_injection(rng: random.Random, size: int = 64, spread: int = 2) -> InjectionTable:
    values = rng.sample(range(size * spread), size)
    return InjectionTable(enumerate(values))


class BaireGadget(Gadget):
    """Continuous fixed-point-free Caristi system on Baire space from an injection."""

    space = BAIRE
    name = "baire"

    def __init__(self, h: InjectionTable, stem_bound: int = 12):
        self.h = h
        self.stem_bound = stem_bound

    def in_tree(self, sigma: Sequence[int]) -> bool:
        L = len(sigma)
        for m in range(L):
            hm = self.h(m)
            if hm < L and sigma[hm] != m + 1:
                return False
        for n, v in enumerate(sigma):
            if v > 0:
                if v - 1 < L:
                    # already forced by the first condition when h(v-1) < L
                    if self.h(v - 1) != n:
                        return False
                elif self.h(v - 1) != n:
                    return False
        return True

    def longest_in_tree(self, x: Seq) -> tuple:
        n = 0
        while self.in_tree(x.prefix(n + 1)):
            n += 1
        return x.prefix(n)

    def k(self, sigma: tuple) -> int:
        return max([len(sigma)] + list(sigma))

    def plus(self, sigma: tuple) -> tuple:
        k = self.k(sigma)
        out = []
        for n in range(k + 1):
            m = self.h.preimage(n, k)
            out.append(0 if m is None else m + 1)
        return tuple(out)

    @staticmethod
    def V_stem(sigma: tuple) -> Fraction:
        # ``2 + 2**(1 - |sigma|) - sum`` stays positive: the sum is below ``2 - 2**(1 - |sigma|)``
        return 2 + pow2(len(sigma) - 1) - sum((pow2(n) for n, v in enumerate(sigma) if v > 0), ZERO)

    def V(self, x: Seq) -> Fraction:
        return self.V_stem(self.longest_in_tree(x))

    def f(self, x: Seq) -> Seq:
        return constant(self.plus(self.longest_in_tree(x)))

    # -- codes

    def _decided(self, stem: tuple):
        """Longest in-tree prefix when ``stem`` itself leaves the tree, else ``None``."""
        try:
            if self.in_tree(stem):
                return None
            return self.longest_in_tree(Seq(stem, (0,)))
        except TableExhausted:
            return None

    @cached_property
    def v_code(self) -> LscCode:
        def value(stem):
            sigma = self._decided(stem)
            if sigma is not None:
                return self.V_stem(sigma)
            # any extension inside the tree loses at most the tail mass
            pos = sum((pow2(n) for n, v in enumerate(stem) if v > 0), ZERO)
            low = 2 - pos - pow2(len(stem) - 1)
            return low if low > 0 else None

        return cylinder_lsc_code(BAIRE, value, exact=self.V)

    @cached_property
    def f_code(self) -> ContinuousCode:
        def value(stem):
            sigma = self._decided(stem)
            return None if sigma is None else self.plus(sigma)

        return _locally_constant_code(BAIRE, value)

    # -- sampling and certificates

    def random_tree_node(self, rng: random.Random, length: int) -> tuple:
        """Random member of the tree of the given length, grown one entry at a time."""
        sigma: tuple = ()
        for _ in range(length):
            opts = [v for v in range(self.h.bound + 1) if v == 0 or self.h.table.get(v - 1) == len(sigma)]
            choice = rng.choice(opts) if rng.random() < 0.5 else 0
            cand = sigma + (choice,)
            if not self.in_tree(cand):
                cand = sigma + (0,)
                if not self.in_tree(cand):
                    break
            sigma = cand
        return sigma

    def sample(self, rng: random.Random) -> Seq:
        for _ in range(1000):
            u = rng.random()
            try:
                if u < 0.6:
                    stem = self.random_tree_node(rng, rng.randrange(self.stem_bound))
                elif u < 0.8:
                    stem = self.plus(self.random_tree_node(rng, rng.randrange(self.stem_bound)))
                else:
                    stem = ()
                tail = tuple(rng.randrange(4) for _ in range(rng.randrange(4)))
                x = Seq(stem + tail, (rng.randrange(3),))
                # reject points whose evaluation needs more of the table
                self.certify(x)
                return x
            except TableExhausted:
                continue
        raise TableExhausted(self.h.bound)

    def certify(self, x: Seq) -> dict:
        sigma = self.longest_in_tree(x)
        plus = self.plus(sigma)
        fx = constant(plus)
        d = BAIRE.exact_d(x, fx)
        vx, vfx = self.V(x), self.V(fx)
        out = {"sigma": sigma, "plus": plus, "d": d, "V_x": vx, "V_fx": vfx, "caristi": d <= vx - vfx}
        out["plus_in_tree"] = self.in_tree(plus)
        out["moves"] = out["plus_in_tree"] and not self.in_tree(x.prefix(len(plus)))
        out["lemma"] = all(plus[n] == v for n, v in enumerate(sigma) if v > 0)
        pos = lambda s: sum((pow2(n) for n, v in enumerate(s) if v > 0), ZERO)
        slack = pos(plus) - pos(sigma)
        if plus[: len(sigma)] == sigma:
            out["case"] = "extends"
            out["case_ok"] = d == pow2(len(sigma)) and d <= pow2(len(sigma)) + slack
        else:
            j = next(n for n in range(len(sigma)) if sigma[n] != plus[n])
            out["case"] = "disagree"
            out["j"] = j
            out["case_ok"] = sigma[j] == 0 and plus[j] > 0 and d == pow2(j) and pow2(j) <= slack
        return out


# ---------------------------------------------------------------------------
# interval gadget


class IntervalGadget(Gadget):
    """Baire class 1 map on ``[0, 1]`` as a limit of piecewise-linear stages.

    ``stage`` selects the stage used for the exact map; the limit map is
    evaluated only where it has provably stabilized (``x < c_n`` for some
    ``n <= stage``).
    """

    space = UNIT_INTERVAL
    name = "interval"

    def __init__(self, c: Sequence, stage: int):
        self.c = [rat(v) for v in c]
        if any(not (0 <= v <= 1) for v in self.c):
            raise ValueError("c must lie in [0, 1]")
        if any(a >= b for a, b in zip(self.c, self.c[1:])):
            raise ValueError("c must be strictly increasing")
        if not 0 <= stage <= len(self.c) - 2:
            raise StageOutOfRange(f"stage {stage} outside 0..{len(self.c) - 2}")
        self.stage = stage

    def _check(self, n: int):
        if not 0 <= n <= len(self.c) - 2:
            raise StageOutOfRange(f"stage {n} outside 0..{len(self.c) - 2}")

    def V_stage(self, n: int) -> PiecewiseLinear:
        self._check(n)
        cn, cn1 = self.c[n], self.c[n + 1]
        knots = {Fraction(0): Fraction(2), cn: Fraction(2), cn1: cn1, Fraction(1): Fraction(1)}
        return PiecewiseLinear(sorted(knots.items()))

    def ladder(self, n: int) -> list[Fraction]:
        """``q_0 = 1``, then least-code rationals in ``(c_n, q_i)``, ending with ``c_n``."""
        self._check(n)
        q = [Fraction(1)]
        for _ in range(n + 1):
            q.append(least_code_rational(self.c[n], q[-1]))
        q.append(self.c[n])
        return q

    def f_stage(self, n: int) -> PiecewiseLinear:
        q = self.ladder(n)
        knots = {q[i]: q[i + 1] for i in range(n + 2)}
        knots[q[n + 2]] = Fraction(1)
        knots.setdefault(Fraction(0), Fraction(1))
        return PiecewiseLinear(sorted(knots.items()))

    def crossing(self, n: int) -> Fraction:
        """The unique fixed point of stage ``n``, inside ``(c_n, q_{n+1})``."""
        q = self.ladder(n)
        lo, hi = q[n + 2], q[n + 1]
        # f(lo) = 1 and f(hi) = lo on this piece
        slope = (lo - 1) / (hi - lo)
        return (1 - slope * lo) / (1 - slope)

    def stabilized(self, x: Fraction) -> int | None:
        """Least ``n <= stage`` with ``x < c_n``."""
        for n in range(self.stage + 1):
            if x < self.c[n]:
                return n
        return None

    def V_limit(self, x: Fraction) -> Fraction:
        """Limit potential: 2 below some ``c_n`` of the list, else ``x``."""
        return Fraction(2) if any(x < cn for cn in self.c) else x

    def V(self, x) -> Fraction:
        return self.V_limit(rat(x))

    def f(self, x) -> Fraction:
        x = rat(x)
        if self.stabilized(x) is None:
            raise StageOutOfRange(f"the limit map at {x} is not reached by stage {self.stage}")
        return Fraction(1)

    @cached_property
    def stage_codes(self) -> list[ContinuousCode]:
        out = []
        for n in range(len(self.c) - 1):
            Vn = self.V_stage(n)
            out.append(lipschitz_code(Vn, Vn.lipschitz, UNIT_INTERVAL, REAL_LINE, exact=Vn))
        return out

    @cached_property
    def v_code(self) -> LscCode:
        return monotone_limit_to_lsc(self.stage_codes, len(self.stage_codes))

    @cached_property
    def f_code(self) -> BaireCode:
        def child(n: int) -> BaireCode:
            fn = self.f_stage(min(n, len(self.c) - 2))
            return BaireCode(UNIT_INTERVAL, leaf=lipschitz_code(fn, fn.lipschitz, UNIT_INTERVAL, UNIT_INTERVAL, exact=fn))

        return BaireCode.limit(UNIT_INTERVAL, child)

    def sample(self, rng: random.Random) -> Fraction:
        top = self.c[self.stage]
        if top <= 0:
            raise StageOutOfRange("no stabilized region at this stage")
        return top * Fraction(rng.randrange(0, 1024), 1024)

    def certify(self, x) -> dict:
        x = rat(x)
        n0 = self.stabilized(x)
        fs = self.f_stage(self.stage)
        out = {"x": x, "n0": n0, "f_stage": fs(x)}
        if n0 is not None:
            fx = self.f(x)
            d = abs(x - fx)
            vx, vfx = self.V(x), self.V(fx)
            out.update(d=d, V_x=vx, V_fx=vfx, caristi=d <= vx - vfx, drop_is_one=vx - vfx == 1)
            out["stable"] = all(self.f_stage(n)(x) == 1 for n in range(n0, self.stage + 1))
        out["fixed_only_at_crossing"] = (fs(x) == x) == (x == self.crossing(self.stage))
        return out


# ---------------------------------------------------------------------------
# path-defect potential


def projection_stem(x: Point, i: int, depth: int) -> tuple:
    """``((x)_i(0), ..., (x)_i(depth-1))`` where ``(x)_i(n) = x(pair(i, n))``."""
    if depth <= 0:
        return ()
    need = pair(i, depth - 1) + 1
    seq = x.exact.prefix(need) if isinstance(x.exact, Seq) else tuple(x.approx(need))
    return tuple(seq[pair(i, n)] for n in range(depth))


def path_defect_potential(ts: Sequence[FiniteTree], x: Point, depth: int, tail_unknown: bool = False) -> tuple[Fraction, Fraction]:
    """Interval ``[lo, hi]`` for ``sum of 2**-i over i whose projection leaves T_i``.

    A projection that has left its tree by ``depth`` counts in both bounds; one
    still inside counts only in ``hi``.  With ``tail_unknown`` the indices past
    the list are treated as undecided and add their geometric mass to ``hi``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    lo = hi = ZERO
    for i, t in enumerate(ts):
        stem = projection_stem(x, i, depth)
        left = any(stem[:k] not in t for k in range(1, depth + 1))
        hi += pow2(i)
        if left:
            lo += pow2(i)
    if tail_unknown:
        hi += pow2(len(ts) - 1)
    return lo, hi


# ---------------------------------------------------------------------------
# JSON manifest


def manifest(g: Gadget) -> dict:
    """Exact-evaluator manifest: what each evaluator computes, with its inputs."""
    if isinstance(g, CantorGadget):
        return {
            "gadget": "cantor",
            "tree": [list(n) for n in g.tree],
            "leaves": [
                {"sigma": list(s), "A": sorted(d.A), "i_sigma": d.i, "sigma_plus": None if d.plus is None else list(d.plus), "V": fmt(g.V_leaf(s))}
                for s, d in sorted(g.data.items())
            ],
            "eta": list(g.eta),
        }
    if isinstance(g, BaireGadget):
        return {"gadget": "baire", "injection": [[m, g.h.table[m]] for m in range(g.h.bound)]}
    if isinstance(g, IntervalGadget):
        return {
            "gadget": "interval",
            "c": [fmt(v) for v in g.c],
            "stage": g.stage,
            "ladder": [fmt(q) for q in g.ladder(g.stage)],
            "V_stage_knots": [[fmt(a), fmt(b)] for a, b in zip(g.V_stage(g.stage).xs, g.V_stage(g.stage).ys)],
            "f_stage_knots": [[fmt(a), fmt(b)] for a, b in zip(g.f_stage(g.stage).xs, g.f_stage(g.stage).ys)],
            "crossing": fmt(g.crossing(g.stage)),
        }
    raise TypeError(f"unknown gadget {g!r}")
