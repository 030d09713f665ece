"""Lagrangian of the shattering hypergraph ``H(k, d)`` and its maximisation.

Vertices are binary column patterns of length ``k`` (bit ``i`` = row ``i``);
``d`` patterns form an edge when the ``k x d`` matrix they make is shattered.
Edges are only ever computed for the vertex set actually in play.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bounds import BoundValue, c_d_formula, c_exact_d2
from .errors import InputError, ResourceError
from .matrix import AlphabetMatrix, BitColumns, brute_force_f, shattered_mask

#: cap on the number of d-subsets of the vertex set inspected for edges
DEFAULT_EDGE_BUDGET = 20_000_000
_CHUNK = 1 << 18


def pattern_string(p: int, k: int) -> str:
    """Row 0 first, e.g. ``pattern_string(0b1100, 4) == '0011'``."""
    return "".join(str(p >> i & 1) for i in range(k))


def parse_pattern(s: str) -> int:
    if not s or set(s) - {"0", "1"}:
        raise InputError(f"bad pattern string {s!r}")
    return sum(1 << i for i, ch in enumerate(s) if ch == "1")


@dataclass(frozen=True)
class VertexSet:
    k: int
    patterns: tuple[int, ...]
    restriction: str

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InputError("k must be >= 1")
        if len(set(self.patterns)) != len(self.patterns):
            raise InputError("vertex patterns must be distinct")
        if any(p < 0 or p >> self.k for p in self.patterns):
            raise InputError(f"patterns must be < 2**{self.k}")
        if self.restriction not in ("all", "balanced", "custom"):
            raise InputError(f"unknown restriction {self.restriction!r}")

    @classmethod
    def all_patterns(cls, k: int) -> VertexSet:
        return cls(k, tuple(range(1 << k)), "all")

    @classmethod
    def balanced(cls, k: int) -> VertexSet:
        """Patterns with ``floor(k/2)`` or ``ceil(k/2)`` ones."""
        sizes = {k // 2, (k + 1) // 2}
        return cls(k, tuple(p for p in range(1 << k) if p.bit_count() in sizes), "balanced")

    @classmethod
    def custom(cls, k: int, patterns: Sequence[int]) -> VertexSet:
        return cls(k, tuple(sorted(int(p) for p in patterns)), "custom")


@dataclass(frozen=True)
class WeightVector:
    """A point of the simplex, listed by its support."""

    support: tuple[tuple[int, Fraction | float], ...]

    def __post_init__(self) -> None:
        pats = [p for p, _ in self.support]
        if len(set(pats)) != len(pats):
            raise InputError("support patterns must be distinct")
        if any(w <= 0 for _, w in self.support):
            raise InputError("support weights must be positive")
        total = sum(w for _, w in self.support)
        if all(isinstance(w, Fraction) for _, w in self.support):
            if total != 1:
                raise InputError(f"weights sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise InputError(f"weights sum to {float(total)!r}, not 1")

    @property
    def patterns(self) -> list[int]:
        return [p for p, _ in self.support]

    @property
    def weights(self) -> list[Fraction | float]:
        return [w for _, w in self.support]

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) for _, w in self.support)

    @classmethod
    def uniform(cls, patterns: Sequence[int]) -> WeightVector:
        w = Fraction(1, len(patterns))
        return cls(tuple((int(p), w) for p in patterns))

    @classmethod
    def from_arrays(cls, patterns: Sequence[int], weights: Sequence[float]) -> WeightVector:
        pairs = [(int(p), float(w)) for p, w in zip(patterns, weights) if w > 0]
        total = sum(w for _, w in pairs)
        return cls(tuple((p, w / total) for p, w in pairs))

    def as_dict(self, k: int) -> dict[str, str]:
        out = {}
        for p, w in sorted(self.support):
            out[pattern_string(p, k)] = f"{w.numerator}/{w.denominator}" if isinstance(w, Fraction) else f"{w:.12g}"
        return out


def _pattern_matrix(patterns: Sequence[int], k: int) -> AlphabetMatrix:
    cols = [[p >> i & 1 for i in range(k)] for p in patterns]
    return AlphabetMatrix(np.array(cols, dtype=np.int64).T.reshape(k, len(cols)), 2)


def hyperedges(patterns: Sequence[int], k: int, d: int, *, budget: int = DEFAULT_EDGE_BUDGET) -> np.ndarray:
    """Index triples (or d-tuples, ascending) of ``patterns`` that form edges of ``H(k, d)``."""
    s = len(patterns)
    if d < 1:
        raise InputError("d must be >= 1")
    total = math.comb(s, d)
    if total > budget:
        raise ResourceError(f"{total} vertex {d}-subsets exceeds edge budget {budget}")
    if s < d or k < 1 << d:
        return np.zeros((0, d), dtype=np.int64)
    m = _pattern_matrix(patterns, k)
    bits = BitColumns.from_matrix(m)
    it = itertools.combinations(range(s), d)
    found = []
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            break
        combos = np.array(block, dtype=np.int64)
        found.append(combos[shattered_mask(m, combos, bits=bits)])
    return np.concatenate(found) if found else np.zeros((0, d), dtype=np.int64)


def lagrangian_value(w: WeightVector, k: int, d: int, *, budget: int = DEFAULT_EDGE_BUDGET) -> Fraction | float:
    """Sum over shattered d-subsets of the support of the product of their weights.

    Exact (a :class:`Fraction`) when every weight is a Fraction.
    """
    if any(p >> k for p in w.patterns):
        raise InputError(f"support pattern does not fit in k={k} rows")
    edges = hyperedges(w.patterns, k, d, budget=budget)
    if w.exact:
        ws = w.weights
        return sum((math.prod(ws[i] for i in e) for e in edges.tolist()), Fraction(0))
    x = np.array(w.weights, dtype=float)
    if edges.shape[0] == 0:
        return 0.0
    return float(np.prod(x[edges], axis=1).sum())


# -- optimisation -------------------------------------------------------------
@dataclass
class LagrangianConfig:
    restarts: int = 16
    iterations: int = 4000
    seed: int = 0
    restriction: str | None = None
    round_denominator: int | None = None
    eta: float = 1.0
    floor: float = 1e-12
    tol: float = 1e-15
    workers: int = 1
    edge_budget: int = DEFAULT_EDGE_BUDGET

    def validate(self) -> None:
        if self.restarts < 1 or self.iterations < 1:
            raise InputError("restarts and iterations must be >= 1")
        if self.seed is None or self.seed < 0:
            raise InputError("a non-negative seed is required")
        if self.restriction not in (None, "all", "balanced"):
            raise InputError(f"unknown vertex restriction {self.restriction!r}")
        if self.round_denominator is not None and self.round_denominator < 1:
            raise InputError("round denominator must be >= 1")
        if not self.eta > 0 or not 0 <= self.floor < 1:
            raise InputError("eta must be positive and floor in [0, 1)")


@dataclass
class LagrangianResult:
    k: int
    d: int
    value: float
    weights: WeightVector
    rounded: Fraction | None
    rounded_weights: WeightVector | None
    denominator: int | None
    iterations: int
    restarts: int
    seed: int
    restriction: str
    restart_values: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "k": self.k,
            "d": self.d,
            "value": f"{self.value:.12f}",
            "support": self.weights.as_dict(self.k),
            "config": {
                "restarts": self.restarts,
                "iterations": self.iterations,
                "seed": self.seed,
                "restriction": self.restriction,
                "round_denominator": self.denominator,
            },
        }
        if self.rounded is not None:
            out["certificate"] = f"{self.rounded.numerator}/{self.rounded.denominator}"
            out["certificate_support"] = self.rounded_weights.as_dict(self.k)
        return out


class _Objective:
    """Lagrangian polynomial restricted to an edge list over vertex indices."""

    def __init__(self, edges: np.ndarray, size: int, d: int) -> None:
        self.edges = edges
        self.size = size
        self.d = d

    def restrict(self, active: np.ndarray) -> _Objective:
        keep = np.all(active[self.edges], axis=1) if self.edges.size else np.zeros(0, dtype=bool)
        return _Objective(self.edges[keep], self.size, self.d)

    def value(self, x: np.ndarray) -> float:
        if self.edges.shape[0] == 0:
            return 0.0
        return float(np.prod(x[self.edges], axis=1).sum())

    def grad(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.size)
        if self.edges.shape[0] == 0:
            return g
        vals = x[self.edges]
        for j in range(self.d):
            others = np.prod(np.delete(vals, j, axis=1), axis=1)
            g += np.bincount(self.edges[:, j], weights=others, minlength=self.size)
        return g

    def mixed(self, x: np.ndarray, support: np.ndarray) -> np.ndarray:
        """Second mixed partials between support vertices, as a dense matrix over ``support``."""
        pos = -np.ones(self.size, dtype=np.int64)
        pos[support] = np.arange(support.size)
        out = np.zeros((support.size, support.size))
        if self.edges.shape[0] == 0 or self.d < 2:
            return out
        vals = x[self.edges]
        for a, b in itertools.combinations(range(self.d), 2):
            rest = [j for j in range(self.d) if j not in (a, b)]
            coef = np.prod(vals[:, rest], axis=1) if rest else np.ones(self.edges.shape[0])
            pa, pb = pos[self.edges[:, a]], pos[self.edges[:, b]]
            ok = (pa >= 0) & (pb >= 0)
            np.add.at(out, (pa[ok], pb[ok]), coef[ok])
            np.add.at(out, (pb[ok], pa[ok]), coef[ok])
        return out


def _support_reduce(obj: _Objective, x: np.ndarray, keys: list[str]) -> tuple[np.ndarray, int]:
    """Collapse support pairs whose mixed partial vanishes at ``x``.

    With every other weight fixed, such a pair enters the polynomial
    linearly, so moving all weight onto the endpoint with the larger partial
    derivative never lowers the value and shrinks the support.
    """
    moves = 0
    while True:
        support = np.flatnonzero(x > 0)
        if support.size < 2:
            return x, moves
        mixed = obj.mixed(x, support)
        g = obj.grad(x)
        pair = None
        for i, j in itertools.combinations(range(support.size), 2):
            if mixed[i, j] == 0.0:
                pair = (support[i], support[j])
                break
        if pair is None:
            return x, moves
        u, w = pair
        if g[u] != g[w]:
            drop, keep = (u, w) if g[u] < g[w] else (w, u)
        else:
            drop, keep = (u, w) if keys[u] > keys[w] else (w, u)
        x = x.copy()
        x[keep] += x[drop]
        x[drop] = 0.0
        moves += 1


def _ascend(obj: _Objective, x: np.ndarray, cfg: LagrangianConfig, keys: list[str]) -> tuple[np.ndarray, float, int]:
    """Multiplicative ascent interleaved with support reduction; returns ``(x, P(x), steps)``."""
    steps = 0
    value = obj.value(x)
    current = obj
    while steps < cfg.iterations:
        active = x > 0
        current = obj.restrict(active)
        stalled = 0
        while steps < cfg.iterations:
            g = current.grad(x)
            y = x * g**cfg.eta
            total = y.sum()
            if not total > 0:
                break
            y /= total
            y[y < cfg.floor] = 0.0
            y /= y.sum()
            new = current.value(y)
            steps += 1
            if new < value:
                break
            gain = new - value
            shrank = np.count_nonzero(y) < np.count_nonzero(x)
            x, value = y, new
            if shrank:
                current = obj.restrict(x > 0)
            stalled = stalled + 1 if gain <= cfg.tol * max(value, 1e-300) else 0
            if stalled >= 20:
                break
        x2, moves = _support_reduce(current, x, keys)
        new = obj.value(x2)
        # pair shifts are exactly objective-neutral or better; allow float noise
        if moves == 0 or new < value * (1 - 1e-12):
            break
        x, value = x2, new
    return x, value, steps


def round_weights(patterns: Sequence[int], weights: Sequence[float], denominator: int, keys: Sequence[str]) -> WeightVector:
    """Snap weights to multiples of ``1/denominator`` by largest-remainder apportionment."""
    scaled = [w * denominator for w in weights]
    base = [math.floor(s) for s in scaled]
    short = denominator - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(scaled[i] - base[i]), keys[i]))
    for i in order[:short]:
        base[i] += 1
    pairs = tuple((int(patterns[i]), Fraction(b, denominator)) for i, b in enumerate(base) if b > 0)
    return WeightVector(pairs)


def _default_restriction(k: int, d: int) -> str:
    return "balanced" if k == 1 << d else "all"


def maximize_lagrangian(k: int, d: int, config: LagrangianConfig | None = None) -> LagrangianResult:
    """Best local maximum of the Lagrangian of ``H(k, d)`` over seeded restarts.

    Restart 0 starts at the uniform point; the others draw a Dirichlet point,
    odd ones on a random sub-support of size about ``2**(d+1)``. The best
    restart wins (ties go to the lower restart index), so the result depends
    only on ``(k, d, config)`` and not on ``config.workers``.
    """
    cfg = config or LagrangianConfig()
    cfg.validate()
    if k < 1 or d < 1:
        raise InputError("k and d must be >= 1")
    restriction = cfg.restriction or _default_restriction(k, d)
    vs = VertexSet.balanced(k) if restriction == "balanced" else VertexSet.all_patterns(k)
    pats = np.array(vs.patterns, dtype=np.int64)
    keys = [pattern_string(int(p), k) for p in pats]
    edges = hyperedges(vs.patterns, k, d, budget=cfg.edge_budget)
    obj = _Objective(edges, len(pats), d)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    s = len(pats)

    def run(i: int) -> tuple[float, np.ndarray, int]:
        rng = np.random.default_rng(seeds[i])
        if i == 0:
            x = np.full(s, 1.0 / s)
        elif i % 2 == 1:
            size = min(s, max(d, rng.integers(1 << d, (1 << (d + 1)) + 1)))
            idx = rng.choice(s, size=size, replace=False)
            x = np.zeros(s)
            x[idx] = rng.dirichlet(np.ones(size))
        else:
            x = rng.dirichlet(np.ones(s))
        x, value, steps = _ascend(obj, x, cfg, keys)
        return value, x, steps

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(run, range(cfg.restarts)))
    else:
        runs = [run(i) for i in range(cfg.restarts)]
    best_i = max(range(len(runs)), key=lambda i: (runs[i][0], -i))
    value, x, _ = runs[best_i]
    nz = np.flatnonzero(x > 0)
    if nz.size == 0:
        nz, x = np.array([0]), np.eye(1, s, 0).ravel()
    weights = WeightVector.from_arrays(pats[nz].tolist(), x[nz].tolist())
    rounded = rounded_w = None
    if cfg.round_denominator is not None:
        rounded_w = round_weights(pats[nz].tolist(), (x[nz] / x[nz].sum()).tolist(), cfg.round_denominator, [keys[i] for i in nz])
        rounded = lagrangian_value(rounded_w, k, d)
        # the certificate is an achievable point, so it can only raise the best value
        value = max(value, float(rounded))
    return LagrangianResult(
        k, d, float(value), weights, rounded, rounded_w, cfg.round_denominator,
        cfg.iterations, cfg.restarts, cfg.seed, restriction, [float(r[0]) for r in runs],
    )


def known_c(k: int, d: int) -> Fraction | None:
    """Closed-form ``c(k, d)`` where one is known."""
    if d == 1:
        return Fraction(int(k >= 2))
    if d == 2 and k >= 4:
        return c_exact_d2(k)
    if k == 1 << d:
        return c_d_formula(d)
    return None


def c_estimate(k: int, d: int, config: LagrangianConfig | None = None) -> BoundValue:
    """``d!`` times the best Lagrangian value found, as a lower bound on ``c(k, d)``.

    Marked ``exact`` only when a rational certificate exists and equals a
    known closed form.
    """
    res = maximize_lagrangian(k, d, config)
    fact = math.factorial(d)
    meta = {"lagrangian": res.value}
    if res.rounded is not None:
        val = fact * res.rounded
        kind = "exact" if known_c(k, d) == val else "lower"
        return BoundValue(val, kind, "lagrangian-certificate", meta)
    return BoundValue(fact * res.value, "lower", "lagrangian-search", meta)


@dataclass(frozen=True)
class SandwichReport:
    lower: Fraction | float
    f: int
    upper: Fraction | float
    certified: bool

    @property
    def lower_ok(self) -> bool:
        return self.lower <= self.f

    @property
    def upper_ok(self) -> bool:
        return self.f <= self.upper

    def as_dict(self) -> dict:
        return {
            "lower": str(self.lower), "f": self.f, "upper": str(self.upper),
            "certified": self.certified, "lower_ok": self.lower_ok, "upper_ok": self.upper_ok,
        }


def sandwich_check(k: int, d: int, n: int, result: LagrangianResult | Fraction, *, budget: int | None = None) -> SandwichReport:
    """Compare ``d! lam C(n, d) <= f(n, k, d) <= lam n^d`` with ``f`` from brute force.

    ``lam`` is the rational certificate when available; the lower inequality
    then must hold (a violation indicates a bug). The upper one holds whenever
    ``lam`` is the true Lagrangian.
    """
    if isinstance(result, LagrangianResult):
        lam = result.rounded if result.rounded is not None else result.value
    else:
        lam = result
    certified = isinstance(lam, Fraction)
    kwargs = {} if budget is None else {"budget": budget}
    f = brute_force_f(n, k, d, 2, **kwargs)
    lower = math.factorial(d) * lam * math.comb(n, d)
    upper = lam * n**d
    return SandwichReport(lower, f, upper, certified)
