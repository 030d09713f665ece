"""Explicit and randomised matrices realising lower bounds on shattering counts."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import InputError, ResourceError
from .matrix import AlphabetMatrix, SetFamily

#: largest alphabet a product construction may produce
MAX_SYMBOLS = 1 << 16
#: largest d * dim for which surjective maps are enumerated
MAX_MAP_EXPONENT = 24


@dataclass(frozen=True)
class F2PointSet:
    """Distinct points of the vector space ``F_2^dim``, stored as bit masks."""

    dim: int
    points: tuple[int, ...]

    def __post_init__(self) -> None:
        pts = tuple(int(p) for p in self.points)
        if self.dim < 1:
            raise InputError("dimension must be >= 1")
        if not pts:
            raise InputError("point set must be non-empty")
        if len(set(pts)) != len(pts):
            raise InputError("points must be distinct")
        if any(p < 0 or p >> self.dim for p in pts):
            raise InputError(f"points must lie in F_2^{self.dim}")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def full(cls, dim: int) -> F2PointSet:
        return cls(dim, tuple(range(1 << dim)))


@dataclass(frozen=True)
class ConstructionRecipe:
    name: str
    parameters: dict = field(default_factory=dict)
    claimed_count: Fraction | None = None

    def to_text(self) -> str:
        lines = [f"name={self.name}"]
        lines += [f"{key}={self.parameters[key]}" for key in sorted(self.parameters)]
        if self.claimed_count is not None:
            c = Fraction(self.claimed_count)
            lines.append(f"claimed_count={c.numerator}/{c.denominator}")
        return "\n".join(lines) + "\n"


def _parity(x: int) -> int:
    return x.bit_count() & 1


def dual_matrix(s: F2PointSet, d: int | None = None) -> AlphabetMatrix:
    """Rows indexed by the points of ``s``, columns by the nonzero dual vectors.

    Entry ``(p, u)`` is the inner product ``<u, p>`` over F_2. Columns are
    ordered by the integer value of ``u``. ``d`` is accepted for symmetry
    with :func:`surjective_map_count`; the matrix does not depend on it.
    """
    if d is not None and d < 1:
        raise InputError("d must be >= 1")
    duals = range(1, 1 << s.dim)
    return AlphabetMatrix(np.array([[_parity(u & p) for u in duals] for p in s.points], dtype=np.int64), 2)


def full_space(d: int) -> AlphabetMatrix:
    """The ``2**d x (2**d - 1)`` dual matrix of the whole space ``F_2^d``."""
    if d < 1:
        raise InputError("d must be >= 1")
    return dual_matrix(F2PointSet.full(d), d)


def codim_complement(d: int, r: int) -> F2PointSet:
    """``F_2^(d+1)`` minus the span of its first ``d - r`` basis vectors."""
    if d < 1 or not 0 <= r <= d:
        raise InputError(f"need d >= 1 and 0 <= r <= d, got d={d}, r={r}")
    sub = 1 << (d - r)
    return F2PointSet(d + 1, tuple(p for p in range(1 << (d + 1)) if p >= sub))


def surjective_map_count(s: F2PointSet, d: int, *, max_exponent: int = MAX_MAP_EXPONENT) -> int:
    """Number of linear maps ``F_2^dim -> F_2^d`` whose image of ``s`` is everything.

    A map is a tuple of ``d`` dual vectors; all ``2**(d*dim)`` are enumerated.
    """
    if d < 1:
        raise InputError("d must be >= 1")
    if d * s.dim > max_exponent:
        raise ResourceError(f"2**{d * s.dim} linear maps exceeds budget 2**{max_exponent}")
    if len(s) < 1 << d:
        return 0
    pts = np.array(s.points, dtype=np.int64)
    # parity table: images[u, p] = <u, p>
    duals = np.arange(1 << s.dim, dtype=np.int64)
    inner = np.zeros((duals.size, pts.size), dtype=np.int64)
    for b in range(s.dim):
        inner ^= (duals[:, None] >> b & 1) & (pts[None, :] >> b & 1)
    full = (1 << (1 << d)) - 1
    count = 0
    for maps in itertools.product(range(duals.size), repeat=d):
        code = np.zeros(pts.size, dtype=np.int64)
        for j, u in enumerate(maps):
            code |= inner[u] << j
        seen = 0
        for c in np.unique(code):
            seen |= 1 << int(c)
        count += seen == full
    return count


def ks_family(k: int) -> SetFamily:
    """All ``floor(k/2)``-subsets of ``[k]`` containing 1: a largest pairwise independent family."""
    if k < 4:
        raise InputError("pairwise independent families need k >= 4")
    half = k // 2
    sets = [(1,) + rest for rest in itertools.combinations(range(2, k + 1), half - 1)]
    return SetFamily.from_sets(k, sets)


def pairwise_independent(fam: SetFamily) -> bool:
    """True iff every two members split the ground set into four non-empty cells."""
    full = (1 << fam.n) - 1
    for a, b in itertools.combinations(fam.members, 2):
        if not (a & b and a & ~b & full and ~a & b & full and ~a & ~b & full):
            return False
    return True


def turan_construction(n: int, k: int) -> AlphabetMatrix:
    """``k x n`` binary matrix repeating the :func:`ks_family` indicator columns as evenly as possible."""
    if n < 1:
        raise InputError("n must be >= 1")
    family = ks_family(k)
    w = len(family)
    cols = [[x >> i & 1 for i in range(k)] for x in family.members]
    return AlphabetMatrix.from_columns([cols[j % w] for j in range(n)], 2)


def turan_recipe(n: int, k: int) -> ConstructionRecipe:
    from .bounds import turan_edges

    w = math.comb(k - 1, k // 2 - 1)
    return ConstructionRecipe("turan", {"n": n, "k": k, "w": w, "d": 2}, Fraction(turan_edges(n, w)))


def product_construction(m1: AlphabetMatrix, m2: AlphabetMatrix, *, max_symbols: int = MAX_SYMBOLS) -> AlphabetMatrix:
    """Pair symbols entrywise: row ``(i1, i2)``, column ``(j1, j2)`` holds ``(m1[i1,j1], m2[i2,j2])``.

    The pair ``(a, b)`` is encoded as ``a * v2 + b``; row and column pairs are
    flattened in row-major order.
    """
    v = m1.v * m2.v
    if v > max_symbols:
        raise InputError(f"alphabet {m1.v}*{m2.v} exceeds symbol budget {max_symbols}")
    a = m1.entries[:, None, :, None]
    b = m2.entries[None, :, None, :]
    prod = a * m2.v + b
    return AlphabetMatrix(prod.reshape(m1.k * m2.k, m1.n * m2.n), v)


def stack_construction(m1: AlphabetMatrix, m2: AlphabetMatrix) -> AlphabetMatrix:
    """Column ``(j1, j2)`` is column ``j1`` of ``m1`` on top of column ``j2`` of ``m2``."""
    if m1.v != m2.v:
        raise InputError(f"alphabet mismatch: {m1.v} vs {m2.v}")
    top = np.repeat(m1.entries, m2.n, axis=1)
    bottom = np.tile(m2.entries, (1, m1.n))
    return AlphabetMatrix(np.vstack([top, bottom]), m1.v)


def column_rng(seed: int, column: int) -> np.random.Generator:
    """Independent PCG64 stream for one column, keyed by ``(seed, column)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(column,))))


def _check_random_args(k: int, n: int, v: int, seed: int) -> None:
    if k < 1 or n < 1 or v < 2:
        raise InputError("need k >= 1, n >= 1, v >= 2")
    if seed is None or int(seed) < 0:
        raise InputError("a non-negative integer seed is required")


def iid_random(k: int, n: int, v: int, seed: int) -> AlphabetMatrix:
    """Entries i.i.d. uniform on ``{0..v-1}``; column ``j`` depends only on ``(seed, j)``."""
    _check_random_args(k, n, v, seed)
    cols = [column_rng(seed, j).integers(0, v, size=k) for j in range(n)]
    return AlphabetMatrix(np.stack(cols, axis=1), v)


def balanced_random(k: int, n: int, v: int, seed: int) -> AlphabetMatrix:
    """Each column a uniform shuffle of ``k / v`` copies of every symbol."""
    _check_random_args(k, n, v, seed)
    if k % v:
        raise InputError(f"balanced columns need v | k, got k={k}, v={v}")
    base = np.repeat(np.arange(v, dtype=np.int64), k // v)
    cols = []
    for j in range(n):
        col = base.copy()
        column_rng(seed, j).shuffle(col)
        cols.append(col)
    return AlphabetMatrix(np.stack(cols, axis=1), v)


def recipe_for(name: str, params: dict) -> tuple[AlphabetMatrix, ConstructionRecipe]:
    """Build a named construction; used by the command line."""
    from .bounds import c_d_formula

    if name == "full-space":
        d = params["d"]
        claim = c_d_formula(d) * (2**d - 1) ** d / math.factorial(d)
        return full_space(d), ConstructionRecipe(name, {"d": d}, claim)
    if name == "codim":
        d, r = params["d"], params["r"]
        s = codim_complement(d, r)
        claim = Fraction(surjective_map_count(s, d), math.factorial(d))
        return dual_matrix(s, d), ConstructionRecipe(name, {"d": d, "r": r, "k": len(s)}, claim)
    if name == "turan":
        n, k = params["n"], params["k"]
        return turan_construction(n, k), turan_recipe(n, k)
    if name == "ks":
        fam = ks_family(params["k"])
        return fam.to_matrix(), ConstructionRecipe(name, {"k": params["k"], "size": len(fam)})
    if name == "iid":
        p = {key: params[key] for key in ("k", "n", "v", "seed")}
        return iid_random(**p), ConstructionRecipe(name, p)
    if name == "balanced":
        p = {key: params[key] for key in ("k", "n", "v", "seed")}
        return balanced_random(**p), ConstructionRecipe(name, p)
    raise InputError(f"unknown recipe {name!r}")


def enumerate_pairwise_independent(k: int, size: int) -> Iterable[tuple[int, ...]]:
    """Yield every pairwise independent family of ``size`` subsets of ``[k]`` (as sorted masks)."""
    full = (1 << k) - 1
    # a member and its complement must both have at least two elements
    cands = [a for a in range(1 << k) if a.bit_count() >= 2 and (full ^ a).bit_count() >= 2]

    def compatible(a: int, b: int) -> bool:
        return bool(a & b and a & ~b & full and ~a & b & full and ~a & ~b & full)

    adj = {a: {b for b in cands if b > a and compatible(a, b)} for a in cands}

    def extend(chosen: tuple[int, ...], pool: set[int]) -> Iterable[tuple[int, ...]]:
        if len(chosen) == size:
            yield chosen
            return
        for a in sorted(pool):
            if len(chosen) + 1 + len([b for b in pool if b > a]) < size:
                break
            yield from extend(chosen + (a,), {b for b in pool if b > a} & adj[a])

    yield from extend((), set(cands))
