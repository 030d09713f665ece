"""Closed forms, rate functions, bound tables and minimum-shattering formulas."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, NumericError, ResourceError
from .matrix import SetFamily, shattered_complex

KINDS = ("lower", "upper", "exact", "conjectured", "guide")


@dataclass(frozen=True)
class BoundValue:
    """A number tagged with what it bounds and where it came from.

    ``value`` is a :class:`Fraction` when known exactly, otherwise a float.
    """

    value: Fraction | float
    kind: str
    provenance: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputError(f"unknown bound kind {self.kind!r}")

    @property
    def exact(self) -> bool:
        return isinstance(self.value, Fraction)

    def __float__(self) -> float:
        return float(self.value)

    def assertable(self) -> Fraction | float:
        """The value, refusing to hand out conjectures."""
        if self.kind == "conjectured":
            raise InputError(f"conjectured value from {self.provenance} cannot back an assertion")
        return self.value

    def rational_str(self) -> str:
        if isinstance(self.value, Fraction):
            return f"{self.value.numerator}/{self.value.denominator}"
        return ""

    def as_dict(self) -> dict:
        out = {"value": f"{float(self.value):.12g}", "kind": self.kind, "provenance": self.provenance}
        if self.exact:
            out["rational"] = self.rational_str()
        return out


# -- closed forms -------------------------------------------------------------
def c_d_formula(d: int) -> Fraction:
    """Probability that ``d`` uniform nonzero vectors of ``F_2^d`` are independent."""
    if d < 1:
        raise InputError("d must be >= 1")
    top = 1 << d
    num = math.prod(top - (1 << i) for i in range(1, d))
    return Fraction(num, (top - 1) ** (d - 1))


def c_infinity_partials(terms: int) -> list[float]:
    """Partial products of ``prod_{i>=1} (1 - 2**-i)``."""
    out, acc = [], 1.0
    for i in range(1, terms + 1):
        acc *= 1.0 - 2.0**-i
        out.append(acc)
    return out


def c_infinity(precision: float = 1e-12) -> float:
    """``prod_{i>=1} (1 - 2**-i)`` to within ``precision``.

    After ``m`` factors the omitted tail lies in ``[1 - 2**-m, 1]``, so the
    partial product overshoots by at most ``partial * 2**-m``.
    """
    if not precision > 0:
        raise InputError("precision must be positive")
    acc, m = 1.0, 0
    while True:
        m += 1
        acc *= 1.0 - 2.0**-m
        if acc * 2.0**-m < precision or m >= 1100:
            return acc


def turan_edges(n: int, r: int) -> int:
    """Edge count of the complete ``r``-partite graph on ``n`` vertices with near-equal classes."""
    if n < 0 or r < 1:
        raise InputError("need n >= 0 and r >= 1")
    sizes = [(n + i) // r for i in range(r)]
    total = sum(sizes)
    return (total * total - sum(s * s for s in sizes)) // 2


def ks_size(k: int) -> int:
    if k < 4:
        raise InputError("k must be >= 4")
    return math.comb(k - 1, k // 2 - 1)


def f_exact_d2(n: int, k: int) -> int:
    """Maximum number of shattered pairs for ``k >= 4`` rows and ``n`` columns."""
    if n < 1:
        raise InputError("n must be >= 1")
    return turan_edges(n, ks_size(k))


def c_exact_d2(k: int) -> Fraction:
    return 1 - Fraction(1, ks_size(k))


def random_bound(k: int, d: int, v: int = 2) -> BoundValue:
    """Shattering probability bound ``1 - v**d (1 - v**-d)**k`` for a uniform ``k x d`` matrix, clamped at 0."""
    if k < 1 or d < 1 or v < 2:
        raise InputError("need k >= 1, d >= 1, v >= 2")
    vd = v**d
    val = 1 - vd * Fraction(vd - 1, vd) ** k
    return BoundValue(max(Fraction(0), val), "lower", "random")


def codim_rows(d: int, r: int) -> int:
    """Size of the point set ``F_2^(d+1)`` minus a ``(d-r)``-dimensional subspace."""
    return (1 << (d + 1)) - (1 << (d - r))


def codim_bound(d: int, r: int) -> BoundValue:
    """Lower bound ``(2 - 2**-r) c_{d+1}`` valid at ``k = codim_rows(d, r)``."""
    if d < 1 or not 0 <= r <= d:
        raise InputError(f"need d >= 1 and 0 <= r <= d, got d={d}, r={r}")
    return BoundValue((2 - Fraction(1, 1 << r)) * c_d_formula(d + 1), "lower", "codim", {"k": codim_rows(d, r), "r": r})


# -- rate function ------------------------------------------------------------
@dataclass(frozen=True)
class RateFunctionSpec:
    d: int
    v: int = 2
    t_max: float = 20.0

    def __post_init__(self) -> None:
        if self.d < 1 or self.v < 2:
            raise InputError("need d >= 1 and v >= 2")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise InputError("t_max must be positive and finite")


def rate_log_f(t: float, d: int, v: int) -> float:
    """``log`` of ``((e^{(v-1)t} + (v-1)e^{-t})^d - e^{(v-1)dt}) / v^d``.

    Rewritten as ``d (v-1) e^{((v-1)d - v)t} h / v^d`` with
    ``h = expm1(d log1p(x)) / (d x)``, ``x = (v-1) e^{-vt}``, which neither
    overflows nor cancels for large ``t``.
    """
    x = (v - 1) * math.exp(-v * t)
    h = 1.0 if x == 0.0 else math.expm1(d * math.log1p(x)) / (d * x)
    out = -d * math.log(v) + ((v - 1) * d - v) * t + math.log(d * (v - 1)) + math.log(h)
    if not math.isfinite(out):
        raise NumericError(f"non-finite rate function at t={t}")
    return out


def rate_slope_sign(t: float, d: int, v: int) -> float:
    """A quantity with the sign of ``f'(t)``: ``(1+x)^(d-1) (1-e^{-vt}) - 1``."""
    e = math.exp(-v * t)
    x = (v - 1) * e
    if e >= 1.0:
        return -1.0
    if e * d * v > 1e-4:
        return math.expm1((d - 1) * math.log1p(x) + math.log1p(-e))
    # small e: expand in powers of e, the leading terms may cancel exactly
    m, a = d - 1, v - 1
    coeffs = [math.comb(m, j) * a**j - (math.comb(m, j - 1) * a ** (j - 1) if j >= 1 else 0) for j in range(m + 2)]
    return sum(float(c) * e**j for j, c in enumerate(coeffs) if j >= 1)


def _rate_newton_step(t: float, d: int, v: int) -> float:
    # derivatives of f * v^d / e^{(v-1)dt}; the common factor cancels in f'/f''
    e = math.exp(-v * t)
    x = (v - 1) * e
    p = (v - 1) * (1 - e)
    q = (v - 1) ** 2 + (v - 1) * e
    g1 = d * (v - 1) * rate_slope_sign(t, d, v)
    g2 = d * (d - 1) * (1 + x) ** (d - 2) * p * p + d * (1 + x) ** (d - 1) * q - (v - 1) ** 2 * d * d
    if not (math.isfinite(g1) and math.isfinite(g2)):
        raise NumericError(f"non-finite derivative at t={t}")
    if g2 <= 0:
        return t
    return t - g1 / g2


def minimize_rate(spec: RateFunctionSpec, grid: int = 400, golden_iters: int = 200, newton_iters: int = 20) -> tuple[float, float, bool]:
    """Minimise the log rate function on ``[0, t_max]``.

    Returns ``(t*, log f(t*), boundary)``. A coarse grid brackets the minimum
    (guarding against non-convexity for ``v >= 3``), golden-section search
    narrows it and Newton steps polish. ``boundary`` is set when ``f`` is
    still decreasing at ``t_max`` (or already increasing at 0), in which case
    the endpoint value is an infimum rather than an interior minimum.
    """
    d, v, hi = spec.d, spec.v, spec.t_max
    if rate_slope_sign(hi, d, v) < 0:
        return hi, rate_log_f(hi, d, v), True
    if rate_slope_sign(0.0, d, v) > 0:
        return 0.0, rate_log_f(0.0, d, v), True
    ts = np.linspace(0.0, hi, grid + 1)
    vals = [rate_log_f(float(t), d, v) for t in ts]
    i = int(np.argmin(vals))
    a, b = float(ts[max(i - 1, 0)]), float(ts[min(i + 1, grid)])
    invphi = (math.sqrt(5) - 1) / 2
    c, e = b - invphi * (b - a), a + invphi * (b - a)
    fc, fe = rate_log_f(c, d, v), rate_log_f(e, d, v)
    for _ in range(golden_iters):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = rate_log_f(c, d, v)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = rate_log_f(e, d, v)
    best_t = (a + b) / 2
    best = rate_log_f(best_t, d, v)
    t = best_t
    for _ in range(newton_iters):
        t = min(max(_rate_newton_step(t, d, v), 0.0), hi)
        val = rate_log_f(t, d, v)
        if val < best:
            best_t, best = t, val
    if vals[i] < best:
        best_t, best = float(ts[i]), vals[i]
    return best_t, best, False


def balanced_rate_beta(spec: RateFunctionSpec) -> BoundValue:
    """Lower bound ``f_min ** -(v**d)`` on the decay base, from balanced random columns.

    ``meta`` carries the minimiser ``t``, ``f_min`` and the ``boundary`` flag
    of :func:`minimize_rate`.
    """
    t_star, log_f, boundary = minimize_rate(spec)
    vd = spec.v**spec.d
    beta = math.exp(-vd * log_f)
    if not math.isfinite(beta):
        raise NumericError("rate bound overflowed")
    meta = {"t": t_star, "f_min": math.exp(log_f), "boundary": boundary, "d": spec.d, "v": spec.v}
    return BoundValue(beta, "lower", "balanced-rate", meta)


def random_rate_beta(d: int, v: int = 2) -> BoundValue:
    """Decay base ``(1 - v**-d) ** -(v**d)`` of uniformly random columns."""
    vd = v**d
    return BoundValue(Fraction(vd, vd - 1) ** vd, "lower", "random-rate")


# -- bound tables -------------------------------------------------------------
def _hyperoctahedral_orbit_reps(d: int) -> list[tuple[int, int]]:
    """Orbit representatives (as pattern bit sets) with orbit sizes for subsets of ``{0,1}^d``.

    The group permutes coordinates and flips coordinates; both preserve
    column balance.
    """
    npat = 1 << d
    maps = []
    for perm in itertools.permutations(range(d)):
        for flip in range(npat):
            img = []
            for p in range(npat):
                q = 0
                for j in range(d):
                    q |= (p >> perm[j] & 1) << j
                img.append(q ^ flip)
            maps.append(img)
    seen: dict[int, int] = {}
    for subset in range(1 << npat):
        canon = min(sum(1 << img[p] for p in range(npat) if subset >> p & 1) for img in maps)
        seen[canon] = seen.get(canon, 0) + 1
    return sorted(seen.items())


def balanced_shatter_probabilities(d: int, k_max: int, *, budget: int = 50_000_000) -> dict[int, Fraction]:
    """Exact probability that ``d`` independent uniform balanced columns of length ``k`` are shattered.

    Returned for every even ``k <= k_max``. By inclusion-exclusion over the
    set of missing row patterns, the count of balanced matrices using only
    allowed patterns is the central coefficient of ``(sum_p x^p)^k``; one
    truncated polynomial power per pattern orbit gives every ``k`` at once.
    """
    if d < 1 or d > 3:
        raise InputError("exact balanced densities are supported for 1 <= d <= 3")
    half = k_max // 2
    states = (half + 1) ** d
    npat = 1 << d
    reps = _hyperoctahedral_orbit_reps(d)
    if states * k_max * npat * len(reps) > budget:
        raise ResourceError(f"balanced density DP needs {states * k_max * npat * len(reps)} updates (budget {budget})")
    signed: dict[int, int] = {k: 0 for k in range(0, k_max + 1, 2)}
    shape = (half + 1,) * d
    for subset, orbit in reps:
        missing = subset.bit_count()
        allowed = [p for p in range(npat) if not subset >> p & 1]
        poly = np.zeros(shape, dtype=object)
        poly[(0,) * d] = 1
        for step in range(1, k_max + 1):
            nxt = np.zeros(shape, dtype=object)
            for p in allowed:
                src = tuple(slice(0, half) if p >> j & 1 else slice(None) for j in range(d))
                dst = tuple(slice(1, None) if p >> j & 1 else slice(None) for j in range(d))
                nxt[dst] += poly[src]
            poly = nxt
            if step % 2 == 0:
                coeff = int(poly[(step // 2,) * d])
                signed[step] += (-1) ** missing * orbit * coeff
    out = {}
    for k, count in signed.items():
        if k == 0:
            continue
        out[k] = Fraction(count, math.comb(k, k // 2) ** d)
    return out


@dataclass
class GammaRow:
    k: int
    b: Fraction
    sources: dict[str, BoundValue]

    @property
    def best(self) -> BoundValue:
        usable = [s for s in self.sources.values() if s.kind in ("lower", "exact")]
        if not usable:
            return BoundValue(Fraction(0), "lower", "trivial")
        rank = {"exact": 1, "lower": 0}
        return max(usable, key=lambda s: (Fraction(s.value), rank[s.kind]))


def gamma_lower_table(d: int, ks: Iterable[int], *, balanced: bool = True, budget: int = 50_000_000) -> list[GammaRow]:
    """Per-source lower bounds on ``c(k, d)`` for each requested ``k``.

    Sources: the previous row's best (``c`` is monotone in ``k``), the
    full-space constant ``c_d`` (for ``k >= 2^d``), codimension
    constructions, uniform random columns, exact uniform-balanced densities
    (even ``k``, ``d <= 3``), the exact pair formula when ``d = 2``, and the
    stacking combination ``1 - (1 - c(k1))(1 - c(k2))`` over splits
    ``k = k1 + k2`` of already-tabulated values.
    """
    if d < 1:
        raise InputError("d must be >= 1")
    wanted = sorted(set(int(k) for k in ks))
    if not wanted:
        return []
    if wanted[0] < 1:
        raise InputError("k must be positive")
    k_hi = wanted[-1]
    base = 1 << d
    bal: dict[int, Fraction] = {}
    if balanced and d <= 3 and k_hi >= base:
        bal = balanced_shatter_probabilities(d, k_hi, budget=budget)
    cd = c_d_formula(d)
    rows: dict[int, GammaRow] = {}
    for k in range(1, k_hi + 1):
        src: dict[str, BoundValue] = {}
        if d == 1:
            src["exact"] = BoundValue(Fraction(int(k >= 2)), "exact", "d1")
        if k >= base:
            src["cd"] = BoundValue(cd, "lower", "cd")
            fits = [r for r in range(d + 1) if codim_rows(d, r) <= k]
            if fits:
                src["codim"] = codim_bound(d, max(fits))
            src["random"] = random_bound(k, d, 2)
            if k in bal:
                src["balanced"] = BoundValue(bal[k], "lower", "balanced")
            if d == 2:
                src["exact"] = BoundValue(c_exact_d2(k), "exact", "d2")
            best_split: Fraction | None = None
            for k1 in range(base, k - base + 1):
                a, b = rows[k1].best.value, rows[k - k1].best.value
                if isinstance(a, Fraction) and isinstance(b, Fraction):
                    val = 1 - (1 - a) * (1 - b)
                    if best_split is None or val > best_split:
                        best_split = val
            if best_split is not None:
                src["stack"] = BoundValue(best_split, "lower", "stack")
        if k > 1 and rows[k - 1].best.value > 0:
            # c(k, d) is weakly increasing in k
            src["monotone"] = BoundValue(rows[k - 1].best.value, "lower", "monotone")
        rows[k] = GammaRow(k, Fraction(k, base), src)
    return [rows[k] for k in wanted]


def conjectured_gamma_infinity(b: Fraction | float, c: float | None = None) -> BoundValue:
    """Staircase ``(2 - 2**ceil(log2(2 - b))) * c`` on ``[1, 2)``; kind ``conjectured``."""
    b = Fraction(b)
    if not 1 <= b < 2:
        raise InputError(f"b must lie in [1, 2), got {b}")
    gap = 2 - b
    m = 0
    while Fraction(2) ** (m - 1) >= gap:
        m -= 1
    factor = 2 - Fraction(2) ** m
    c = c_infinity(1e-15) if c is None else c
    return BoundValue(float(factor) * c, "conjectured", "staircase", {"factor": factor, "also_lower": True})


def gamma_staircase(d: int, bs: Sequence[Fraction | float]) -> list[tuple[Fraction, BoundValue]]:
    """Best lower bound on ``gamma_d(b) = c(floor(2^d b), d)`` at each ``b >= 1``."""
    bs = [Fraction(b) for b in bs]
    if any(b < 1 for b in bs):
        raise InputError("b must be >= 1")
    ks = sorted({math.floor(b * (1 << d)) for b in bs})
    table = {row.k: row.best for row in gamma_lower_table(d, ks, balanced=d <= 2)}
    return [(b, table[math.floor(b * (1 << d))]) for b in bs]


# -- minimum shattering -------------------------------------------------------
def _below(n: int, d: int) -> int:
    return sum(math.comb(n, i) for i in range(d))


def g_formula(n: int, k: int, d: int) -> int | None:
    """Exact minimum shattered ``d``-count when ``k`` falls in a closed-form bracket, else ``None``."""
    if n < 1 or k < 1 or d < 1 or d > n:
        raise InputError("need 1 <= d <= n and k >= 1")
    small = _below(n, d)
    for r in range(d, n + 1):
        low = small + math.comb(r, d) + sum(math.comb(r, i) - 1 for i in range(d + 1, r))
        high = small + sum(math.comb(r, i) for i in range(d, r + 1))
        if low <= k <= high:
            return math.comb(r, d)
    return None


def subset_order(n: int, order: str = "lex") -> list[int]:
    """All subsets of ``[n]`` as masks in the requested linear order.

    ``"lex"``: ascending mask value with element 1 as the lowest bit.
    ``"colex"``: ascending mask value with element ``n`` as the lowest bit.
    """
    masks = list(range(1 << n))
    if order == "lex":
        return masks
    if order == "colex":
        def rev(x: int) -> int:
            return int(f"{x:0{n}b}"[::-1], 2) if n else 0

        return sorted(masks, key=rev)
    raise InputError(f"unknown order {order!r}")


def g_construction(n: int, k: int, d: int, order: str = "lex") -> tuple[SetFamily, int]:
    """All subsets of size ``< d`` followed by the rest in ``order``, truncated to ``k`` sets."""
    if n < 1 or d < 1 or k < 1:
        raise InputError("n, k and d must be positive")
    if k > 1 << n:
        raise InputError(f"k={k} exceeds 2**{n}")
    masks = subset_order(n, order)
    small = [x for x in masks if x.bit_count() < d]
    rest = [x for x in masks if x.bit_count() >= d]
    fam = SetFamily(n, tuple((small + rest)[:k]))
    count = sum(1 for a in shattered_complex(fam) if a.bit_count() == d)
    return fam, count


# -- covering arrays ----------------------------------------------------------
@dataclass(frozen=True)
class CoveringExistence:
    guide_k: BoundValue | None
    n_prime: int | None
    n_at_n_prime: int | None
    n_certified: int | None

    def as_dict(self) -> dict:
        return {
            "guide_k": None if self.guide_k is None else self.guide_k.as_dict(),
            "n_prime": self.n_prime,
            "n_at_n_prime": self.n_at_n_prime,
            "n_certified": self.n_certified,
        }


def _n_prime(gap: Fraction, d: int) -> int:
    """Largest ``N`` with ``N**(d-1) * gap <= 1``."""
    est = int(float(gap) ** (-1.0 / (d - 1))) if gap > 0 else 0
    n = max(est - 2, 0)
    while (n + 1) ** (d - 1) * gap <= 1:
        n += 1
    while n > 0 and n ** (d - 1) * gap > 1:
        n -= 1
    return n


def certified_columns(c_lower: Fraction, d: int, *, search_limit: int = 2_000_000) -> tuple[int | None, int | None, int | None]:
    """Column counts of a covering array guaranteed by a density lower bound ``c_lower``.

    Returns ``(n', n' - floor((1-c) C(n', d)), max_N N - floor((1-c) C(N, d)))``.
    ``None`` entries mean unbounded (``c_lower >= 1``).
    """
    if d < 2:
        raise InputError("d must be >= 2")
    c_lower = Fraction(c_lower)
    gap = 1 - c_lower
    if gap <= 0:
        return None, None, None
    n_prime = _n_prime(gap, d)

    def surviving(n: int) -> int:
        return n - math.floor(gap * math.comb(n, d))

    at_prime = max(surviving(n_prime), 0)
    hi = min(2 * n_prime + 2 * d, search_limit)
    best = max([surviving(n) for n in range(d, hi + 1)] + [at_prime, d - 1])
    return n_prime, at_prime, best


def covering_existence(n: int, d: int, v: int, beta: BoundValue | float, c_lower: Fraction | None = None) -> CoveringExistence:
    """Row count guide ``(d-1) v^d log2(n) / log2(beta)`` and, given ``c_lower``, certified column counts."""
    if d < 2 or v < 2:
        raise InputError("need d >= 2 and v >= 2")
    b = float(beta)
    if not b > 1:
        raise InputError(f"beta must exceed 1, got {b}")
    guide = None
    if n >= 2:
        guide = BoundValue((d - 1) * v**d * math.log2(n) / math.log2(b), "guide", "covering-asymptotic")
    n_prime = at_prime = certified = None
    if c_lower is not None:
        n_prime, at_prime, certified = certified_columns(Fraction(c_lower), d)
    return CoveringExistence(guide, n_prime, at_prime, certified)


# -- simplex inequality -------------------------------------------------------
@dataclass(frozen=True)
class SimplexMaxResult:
    closed_form: Fraction
    uniform_value: Fraction
    numeric_max: float
    argmax: tuple[float, ...]


def simplex_closed_form(d: int) -> Fraction:
    if d < 2:
        raise InputError("d must be >= 2")
    return Fraction((1 << d) - 2, (1 << d) - 1) ** (d - 1)


def simplex_max(d: int, starts: int = 24, seed: int = 0) -> SimplexMaxResult:
    """Maximise ``sum p_i (1 - p_i)**(d-1)`` over the ``(2^d - 1)``-point simplex.

    Multistart SLSQP from the uniform point and Dirichlet samples; the exact
    value at the uniform point is returned alongside.
    """
    from scipy.optimize import minimize

    closed = simplex_closed_form(d)
    size = (1 << d) - 1
    uniform_value = size * Fraction(1, size) * (1 - Fraction(1, size)) ** (d - 1)

    def neg(p: np.ndarray) -> float:
        return -float(np.sum(p * (1 - p) ** (d - 1)))

    def neg_grad(p: np.ndarray) -> np.ndarray:
        return -((1 - p) ** (d - 1) - (d - 1) * p * (1 - p) ** (d - 2))

    rng = np.random.default_rng(seed)
    inits = [np.full(size, 1.0 / size)] + [rng.dirichlet(np.ones(size)) for _ in range(starts)]
    best_val, best_p = -math.inf, inits[0]
    for x0 in inits:
        res = minimize(
            neg, x0, jac=neg_grad, method="SLSQP", bounds=[(0.0, 1.0)] * size,
            constraints=[{"type": "eq", "fun": lambda p: np.sum(p) - 1.0, "jac": lambda p: np.ones_like(p)}],
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        p = np.clip(res.x, 0.0, None)
        p = p / p.sum()
        val = -neg(p)
        if val > best_val:
            best_val, best_p = val, p
    return SimplexMaxResult(closed, uniform_value, best_val, tuple(float(x) for x in best_p))
