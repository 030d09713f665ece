"""Covering arrays by greedy column deletion."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bounds import certified_columns, random_bound
from .constructions import balanced_random, codim_complement, dual_matrix, full_space, iid_random, product_construction
from .errors import InputError
from .matrix import AlphabetMatrix, iter_shattered

STRATEGIES = ("full-space", "codim", "product", "iid", "balanced")
MAX_ROWS = 1 << 12


@dataclass
class CoveringArray:
    """A matrix with its strength; ``matrix is None`` marks the empty outcome."""

    matrix: AlphabetMatrix | None
    strength: int
    verified: bool
    deletion_log: list[int] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.matrix is None or self.matrix.n < self.strength

    def to_text(self) -> str:
        if self.matrix is None:
            raise InputError("empty covering array has no text form")
        tag = "verified" if self.verified else "unverified"
        return self.matrix.to_text() + f"# strength {self.strength} {tag}\n"

    @classmethod
    def from_text(cls, text: str) -> CoveringArray:
        """Parse the matrix body and trailer, then re-verify rather than trust the tag."""
        body, sep, trailer = text.rstrip("\n").rpartition("\n")
        parts = trailer.split()
        if not sep or len(parts) != 4 or parts[:2] != ["#", "strength"] or parts[3] not in ("verified", "unverified"):
            raise InputError("missing '# strength d verified' trailer")
        try:
            d = int(parts[2])
        except ValueError as exc:
            raise InputError(f"bad strength {parts[2]!r}") from exc
        m = AlphabetMatrix.from_text(body + "\n")
        ok, _, _ = verify_ca(m, d)
        return cls(m, d, ok)


def _check_strength(m: AlphabetMatrix, d: int) -> None:
    if d < 1 or d > m.n:
        raise InputError(f"strength must satisfy 1 <= d <= n={m.n}, got {d}")


def _missing_pattern(m: AlphabetMatrix, cols: tuple[int, ...]) -> tuple[int, ...]:
    seen = {tuple(row) for row in m.entries[:, list(cols)].tolist()}
    for pat in itertools.product(range(m.v), repeat=len(cols)):
        if pat not in seen:
            return pat
    raise AssertionError("subset reported non-shattered has every pattern")


def verify_ca(m: AlphabetMatrix, d: int) -> tuple[bool, tuple[int, ...] | None, tuple[int, ...] | None]:
    """``(ok, witness columns, missing row pattern)`` for the first failing d-subset in lex order."""
    _check_strength(m, d)
    for combos, mask in iter_shattered(m, d):
        if not mask.all():
            cols = tuple(int(c) for c in combos[int(np.argmin(mask))])
            return False, cols, _missing_pattern(m, cols)
    return True, None, None


def non_shattered_subsets(m: AlphabetMatrix, d: int) -> np.ndarray:
    _check_strength(m, d)
    bad = [combos[~mask] for combos, mask in iter_shattered(m, d)]
    return np.concatenate(bad) if bad else np.zeros((0, d), dtype=np.int64)


def build_by_deletion(m: AlphabetMatrix, d: int) -> CoveringArray:
    """Delete the column lying in the most non-shattered d-subsets until none remain.

    Ties go to the lowest column index; the log records original indices.
    Every deletion removes at least one bad subset, so the number of
    deletions never exceeds the initial bad count.
    """
    bad = non_shattered_subsets(m, d)
    log: list[int] = []
    while bad.shape[0]:
        counts = np.bincount(bad.ravel(), minlength=m.n)
        col = int(np.argmax(counts))
        log.append(col)
        bad = bad[~np.any(bad == col, axis=1)]
    keep = m.n - len(log)
    if keep < d:
        return CoveringArray(None if keep == 0 else m.delete_columns(log), d, False, log)
    out = m.delete_columns(log)
    ok, _, _ = verify_ca(out, d)
    return CoveringArray(out, d, ok, log)


def best_deletion(m: AlphabetMatrix, d: int, rotations: int = 16) -> tuple[CoveringArray, int]:
    """Run :func:`build_by_deletion` on the first ``rotations`` cyclic column orders; keep the largest result.

    Ties go to the smaller rotation. Returns the array (log in original
    indices) and the winning rotation.
    """
    best: tuple[CoveringArray, int] | None = None
    for r in range(max(1, min(rotations, m.n))):
        order = [(i + r) % m.n for i in range(m.n)]
        ca = build_by_deletion(AlphabetMatrix(m.entries[:, order], m.v), d)
        ca.deletion_log = [order[j] for j in ca.deletion_log]
        if ca.matrix is not None and not ca.empty:
            keep = sorted(set(range(m.n)) - set(ca.deletion_log))
            ca.matrix = AlphabetMatrix(m.entries[:, keep], m.v)
        size = 0 if ca.empty else ca.matrix.n
        if best is None or size > (0 if best[0].empty else best[0].matrix.n):
            best = (ca, r)
    return best


@dataclass
class PipelineReport:
    strategy: str
    d: int
    v: int
    k: int
    n_initial: int
    initial_nonshattered: int
    n_final: int
    deletions: int
    predicted_n: int | None
    target_n: int | None
    seed: int | None
    verified: bool
    parameters: dict = field(default_factory=dict)

    @property
    def shortfall(self) -> int:
        if self.target_n is None:
            return 0
        return max(self.target_n - self.n_final, 0)

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy, "d": self.d, "v": self.v, "k": self.k,
            "n_initial": self.n_initial, "initial_nonshattered": self.initial_nonshattered,
            "n_final": self.n_final, "deletions": self.deletions,
            "predicted_n": self.predicted_n, "target_n": self.target_n,
            "shortfall": self.shortfall, "verified": self.verified,
            "seed": self.seed, "parameters": self.parameters,
        }


def _columns_needed(c: Fraction, d: int, target: int, limit: int) -> int | None:
    """Smallest ``N >= target`` whose expected survivors ``N - floor((1-c) C(N,d))`` reach ``target``."""
    gap = 1 - c
    for n in range(max(target, d), limit + 1):
        if n - math.floor(gap * math.comb(n, d)) >= target:
            return n
    return None


def _random_rows(d: int, v: int, target: int, step: int) -> tuple[int, Fraction, int] | None:
    """Fewest rows (a multiple of ``step``) whose union bound certifies ``target`` columns."""
    k = v**d
    k += -k % step
    while k <= MAX_ROWS:
        c = Fraction(random_bound(k, d, v).value)
        _, _, best = certified_columns(c, d)
        if best is None or best >= target:
            n = _columns_needed(c, d, target, 4 * target + 4 * d)
            if n is not None:
                return k, c, n
        k += step
    return None


def _explicit_base(strategy: str, d: int, v: int, target: int | None) -> tuple[AlphabetMatrix, dict]:
    if strategy == "full-space":
        if v != 2:
            raise InputError("full-space strategy is binary (v=2)")
        return full_space(d), {}
    if strategy == "codim":
        if v != 2:
            raise InputError("codim strategy is binary (v=2)")
        best = None
        for r in range(d + 1):
            m = dual_matrix(codim_complement(d, r), d)
            ca = build_by_deletion(m, d)
            n_final = 0 if ca.empty else ca.matrix.n
            if best is None or n_final > best[2]:
                best = (m, r, n_final)
            if target is not None and n_final >= target:
                break
        return best[0], {"r": best[1]}
    if strategy == "product":
        power = v.bit_length() - 1
        if v < 2 or 1 << power != v:
            raise InputError("product strategy needs v a power of 2")
        m = full_space(d)
        for _ in range(power - 1):
            m = product_construction(m, full_space(d))
        return m, {"factors": power}
    raise InputError(f"unknown strategy {strategy!r}")


def ca_pipeline(d: int, v: int, target_n: int | None, strategy: str, seed: int | None = None, *, rotations: int = 16) -> tuple[CoveringArray, PipelineReport]:
    """Build a base matrix for ``strategy``, prune it to a covering array and report against the bound.

    Pruning is greedy deletion tried over ``rotations`` cyclic column orders.
    Random strategies pick the fewest rows for which the union bound on
    the shattering probability certifies ``target_n`` columns.
    """
    if strategy not in STRATEGIES:
        raise InputError(f"strategy must be one of {', '.join(STRATEGIES)}")
    if d < 2 or v < 2:
        raise InputError("need d >= 2 and v >= 2")
    params: dict = {}
    if strategy in ("iid", "balanced"):
        if seed is None or seed < 0:
            raise InputError("random strategies require a non-negative seed")
        if target_n is None or target_n < d:
            raise InputError("random strategies require --target-n >= d")
        step = v if strategy == "balanced" else 1
        choice = _random_rows(d, v, target_n, step)
        if choice is None:
            raise InputError(f"no row count up to {MAX_ROWS} certifies {target_n} columns")
        k, c, n0 = choice
        gen = iid_random if strategy == "iid" else balanced_random
        base = gen(k, n0, v, seed)
        params["c_lower"] = f"{c.numerator}/{c.denominator}"
        predicted = certified_columns(c, d)[2]
    else:
        base, params = _explicit_base(strategy, d, v, target_n)
        predicted = None
    if base.n < d:
        raise InputError("base matrix has fewer than d columns")
    initial_bad = int(non_shattered_subsets(base, d).shape[0])
    if predicted is None:
        predicted = max(base.n - initial_bad, 0)
    ca, rot = best_deletion(base, d, rotations)
    params["rotation"] = rot
    n_final = 0 if ca.empty else ca.matrix.n
    report = PipelineReport(
        strategy, d, v, base.k, base.n, initial_bad, n_final, len(ca.deletion_log),
        predicted, target_n, seed, ca.verified, params,
    )
    return ca, report
