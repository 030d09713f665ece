"""Matrices over a finite alphabet, shattering tests and exact brute-force oracles.

A ``k x n`` matrix over ``{0..v-1}`` stands for a family of ``k`` rows; a set
of ``d`` columns is *shattered* when every one of the ``v**d`` possible row
patterns occurs among the rows restricted to those columns.
"""

from __future__ import annotations

import itertools
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError, ResourceError

#: default cap on the number of objects a brute-force oracle may enumerate
DEFAULT_BUDGET = 20_000_000
#: cap on the number of cells of a dense edge table
MAX_TABLE_CELLS = 50_000_000
#: combos evaluated per vectorised chunk
_CHUNK_CELLS = 1 << 21

_DECIMAL = re.compile(r"0|[1-9][0-9]*")


@dataclass(frozen=True, eq=False)
class AlphabetMatrix:
    """A ``k x n`` matrix with entries in ``{0..v-1}``."""

    entries: np.ndarray
    v: int = 2

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"matrix must be 2-D with positive dimensions, got shape {arr.shape}")
        if self.v < 2:
            raise InputError(f"alphabet size must be >= 2, got {self.v}")
        if arr.min() < 0 or arr.max() >= self.v:
            raise InputError(f"entries must lie in [0, {self.v})")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]], v: int = 2) -> AlphabetMatrix:
        return cls(np.array([list(r) for r in rows], dtype=np.int64), v)

    @classmethod
    def from_columns(cls, columns: Iterable[Sequence[int]], v: int = 2) -> AlphabetMatrix:
        cols = [list(c) for c in columns]
        return cls(np.array(cols, dtype=np.int64).T, v)

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.entries[:, j])

    def delete_columns(self, cols: Iterable[int]) -> AlphabetMatrix:
        drop = set(cols)
        keep = [j for j in range(self.n) if j not in drop]
        if not keep:
            raise InputError("cannot delete every column")
        return AlphabetMatrix(self.entries[:, keep], self.v)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AlphabetMatrix):
            return NotImplemented
        return self.v == other.v and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.v, self.entries.shape, self.entries.tobytes()))

    def __repr__(self) -> str:
        return f"AlphabetMatrix(v={self.v}, k={self.k}, n={self.n})"

    # -- text format ---------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{self.v} {self.k} {self.n}"]
        lines.extend(" ".join(str(int(x)) for x in row) for row in self.entries)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> AlphabetMatrix:
        """Parse the strict ``v k n`` header + ``k`` rows format.

        Any deviation (missing trailing newline, tabs, repeated spaces,
        wrong row/column count, out-of-alphabet symbol) raises
        :class:`InputError`.
        """
        if not text.endswith("\n"):
            raise InputError("matrix text must end with a newline")
        lines = text[:-1].split("\n")
        header = _parse_ints(lines[0], 1)
        if len(header) != 3:
            raise InputError("header must be 'v k n'")
        v, k, n = header
        if len(lines) != k + 1:
            raise InputError(f"expected {k} rows, found {len(lines) - 1}")
        rows = []
        for i, line in enumerate(lines[1:], start=2):
            row = _parse_ints(line, i)
            if len(row) != n:
                raise InputError(f"line {i}: expected {n} symbols, found {len(row)}")
            rows.append(row)
        return cls(np.array(rows, dtype=np.int64), v)


def _parse_ints(line: str, lineno: int) -> list[int]:
    tokens = line.split(" ")
    for tok in tokens:
        if not _DECIMAL.fullmatch(tok):
            raise InputError(f"line {lineno}: malformed token {tok!r}")
    return [int(t) for t in tokens]


class BitColumns:
    """Bit-packed columns of a binary matrix: bit ``i`` of column ``j`` is row ``i``."""

    WORD = 64

    def __init__(self, k: int, words: np.ndarray) -> None:
        words = np.asarray(words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[1] != -(-k // self.WORD):
            raise InputError("word array has the wrong shape for k rows")
        self.k = k
        self.words = words
        self.words.setflags(write=False)
        if np.any(words & ~self.valid_mask()):
            raise InputError("bits above row k-1 must be zero")

    @property
    def n(self) -> int:
        return self.words.shape[0]

    def valid_mask(self) -> np.ndarray:
        nwords = self.words.shape[1]
        mask = np.full(nwords, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
        tail = self.k % self.WORD
        if tail:
            mask[-1] = np.uint64((1 << tail) - 1)
        return mask

    @classmethod
    def from_matrix(cls, m: AlphabetMatrix) -> BitColumns:
        if m.v != 2:
            raise InputError("BitColumns requires a binary matrix")
        nwords = -(-m.k // cls.WORD)
        padded = np.zeros((nwords * cls.WORD, m.n), dtype=np.uint64)
        padded[: m.k] = m.entries
        shifts = np.arange(cls.WORD, dtype=np.uint64)
        blocks = padded.reshape(nwords, cls.WORD, m.n)
        words = (blocks << shifts[None, :, None]).sum(axis=1, dtype=np.uint64)
        return cls(m.k, words.T.copy())

    def to_matrix(self) -> AlphabetMatrix:
        shifts = np.arange(self.WORD, dtype=np.uint64)
        bits = (self.words[:, :, None] >> shifts[None, None, :]) & np.uint64(1)
        flat = bits.reshape(self.n, -1)[:, : self.k]
        return AlphabetMatrix(flat.T.astype(np.int64), 2)

    def shattered_mask(self, combos: np.ndarray) -> np.ndarray:
        """Boolean mask over rows of ``combos`` (shape ``(C, d)``)."""
        combos = np.asarray(combos, dtype=np.int64)
        count, d = combos.shape
        if self.k < (1 << d):
            return np.zeros(count, dtype=bool)
        sel = self.words[combos]
        # partial[p] holds the rows whose restriction to the first j columns is p
        partial = [np.broadcast_to(self.valid_mask(), (count, self.words.shape[1]))]
        for j in range(d):
            col = sel[:, j, :]
            nxt = []
            for acc in partial:
                nxt.append(acc & ~col)
                nxt.append(acc & col)
            partial = nxt
        ok = np.ones(count, dtype=bool)
        for acc in partial:
            ok &= acc.any(axis=1)
        return ok


@dataclass(frozen=True)
class SetFamily:
    """Distinct subsets of a ground set of size ``n``; element ``i`` is bit ``i - 1``."""

    n: int
    members: tuple[int, ...]

    def __post_init__(self) -> None:
        members = tuple(int(x) for x in self.members)
        if self.n < 0:
            raise InputError("ground set size must be non-negative")
        if len(set(members)) != len(members):
            raise InputError("family members must be pairwise distinct")
        if any(x < 0 or x >> self.n for x in members):
            raise InputError(f"members must be subsets of a {self.n}-element ground set")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    @classmethod
    def from_sets(cls, n: int, sets: Iterable[Iterable[int]]) -> SetFamily:
        masks = []
        for s in sets:
            mask = 0
            for e in s:
                if not 1 <= e <= n:
                    raise InputError(f"element {e} outside [1, {n}]")
                mask |= 1 << (e - 1)
            masks.append(mask)
        return cls(n, tuple(masks))

    def to_sets(self) -> list[frozenset[int]]:
        return [frozenset(i + 1 for i in range(self.n) if x >> i & 1) for x in self.members]

    def to_matrix(self) -> AlphabetMatrix:
        if not self.members or self.n < 1:
            raise InputError("an empty family or ground set has no matrix form")
        rows = [[x >> i & 1 for i in range(self.n)] for x in self.members]
        return AlphabetMatrix.from_rows(rows, 2)

    @classmethod
    def from_matrix(cls, m: AlphabetMatrix) -> SetFamily:
        if m.v != 2:
            raise InputError("only binary matrices correspond to set families")
        weights = 1 << np.arange(m.n, dtype=object)
        masks = tuple(int(sum(int(b) * w for b, w in zip(row, weights))) for row in m.entries)
        return cls(m.n, masks)


@dataclass(frozen=True)
class ShatterReport:
    d: int
    n: int
    total: int
    shattered: int

    @property
    def density(self) -> Fraction:
        """Shattered count scaled as ``shattered * d! / n**d``."""
        return Fraction(self.shattered * math.factorial(self.d), self.n**self.d)

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "total": self.total,
            "shattered": self.shattered,
            "density": f"{self.density.numerator}/{self.density.denominator}",
        }


# -- shattering tests --------------------------------------------------------
def _generic_mask(entries: np.ndarray, v: int, combos: np.ndarray) -> np.ndarray:
    count, d = combos.shape
    k = entries.shape[0]
    vd = v**d
    if k < vd:
        return np.zeros(count, dtype=bool)
    codes = np.zeros((k, count), dtype=np.int64)
    for j in range(d):
        codes += entries[:, combos[:, j]] * (v**j)
    if vd <= 64:
        bits = np.left_shift(np.uint64(1), codes.astype(np.uint64))
        covered = np.bitwise_or.reduce(bits, axis=0)
        full = np.uint64((1 << vd) - 1) if vd < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
        return covered == full
    seen = np.zeros((count, vd), dtype=bool)
    seen[np.arange(count)[None, :], codes] = True
    return seen.all(axis=1)


def shattered_mask(m: AlphabetMatrix, combos: np.ndarray, *, bits: BitColumns | None = None) -> np.ndarray:
    """Vectorised shattering test for each row of ``combos``."""
    combos = np.asarray(combos, dtype=np.int64)
    if combos.ndim != 2:
        raise InputError("combos must be a 2-D index array")
    if combos.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if m.v == 2 and combos.shape[1] <= 16:
        bits = bits or BitColumns.from_matrix(m)
        return bits.shattered_mask(combos)
    return _generic_mask(m.entries, m.v, combos)


def is_shattered(m: AlphabetMatrix, cols: Sequence[int]) -> bool:
    """True iff all ``v**d`` patterns occur among the rows restricted to ``cols``."""
    cols = [int(c) for c in cols]
    if not 1 <= len(cols) <= m.n:
        raise InputError(f"need between 1 and {m.n} columns, got {len(cols)}")
    if len(set(cols)) != len(cols):
        raise InputError("column indices must be distinct")
    if any(c < 0 or c >= m.n for c in cols):
        raise InputError(f"column index out of range [0, {m.n})")
    return bool(_generic_mask(m.entries, m.v, np.array([cols], dtype=np.int64))[0])


def _combo_blocks(n: int, d: int, lead: int, chunk: int) -> Iterator[np.ndarray]:
    """All d-subsets of range(n) whose smallest element is ``lead``, in lex order."""
    tails = itertools.combinations(range(lead + 1, n), d - 1)
    while True:
        block = list(itertools.islice(tails, chunk))
        if not block:
            return
        arr = np.empty((len(block), d), dtype=np.int64)
        arr[:, 0] = lead
        if d > 1:
            arr[:, 1:] = np.array(block, dtype=np.int64)
        yield arr


def iter_shattered(m: AlphabetMatrix, d: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(combos, mask)`` blocks covering all d-subsets in lexicographic order."""
    _check_d(m, d)
    bits = BitColumns.from_matrix(m) if m.v == 2 else None
    chunk = max(1, _CHUNK_CELLS // max(m.k, 1))
    for lead in range(m.n - d + 1):
        for combos in _combo_blocks(m.n, d, lead, chunk):
            yield combos, shattered_mask(m, combos, bits=bits)


def _check_d(m: AlphabetMatrix, d: int) -> None:
    if d < 1 or d > m.n:
        raise InputError(f"d must satisfy 1 <= d <= n={m.n}, got {d}")


def count_shattered(m: AlphabetMatrix, d: int, *, workers: int = 1, use_bits: bool = True) -> ShatterReport:
    """Exact number of shattered ``k x d`` submatrices.

    The work is split by the smallest column index of each d-subset; the
    integer partial counts are summed in a fixed order, so the result does
    not depend on ``workers``.
    """
    _check_d(m, d)
    total = math.comb(m.n, d)
    if m.k < m.v**d:
        return ShatterReport(d, m.n, total, 0)
    bits = BitColumns.from_matrix(m) if (m.v == 2 and use_bits) else None
    chunk = max(1, _CHUNK_CELLS // max(m.k, 1))

    def task(lead: int) -> int:
        acc = 0
        for combos in _combo_blocks(m.n, d, lead, chunk):
            if bits is not None and d <= 16:
                acc += int(bits.shattered_mask(combos).sum())
            else:
                acc += int(_generic_mask(m.entries, m.v, combos).sum())
        return acc

    leads = range(m.n - d + 1)
    if workers <= 1:
        parts = [task(i) for i in leads]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, leads))
    return ShatterReport(d, m.n, total, sum(parts))


# -- set families --------------------------------------------------------------
def _shatters(members: Sequence[int], subset: int) -> bool:
    traces = {x & subset for x in members}
    return len(traces) == 1 << subset.bit_count()


def shattered_complex(fam: SetFamily, *, budget: int = DEFAULT_BUDGET) -> list[int]:
    """All subsets of the ground set shattered by ``fam``, as ascending bit masks.

    The result is closed under taking subsets; by Pajor's theorem it has at
    least ``len(fam)`` members.
    """
    if (1 << fam.n) * max(len(fam), 1) > budget:
        raise ResourceError(f"shattered complex needs {(1 << fam.n) * len(fam)} trace checks (budget {budget})")
    if not fam.members:
        return []
    return [a for a in range(1 << fam.n) if _shatters(fam.members, a)]


# -- brute-force oracles ---------------------------------------------------------
def canonical_patterns(k: int, v: int) -> np.ndarray:
    """Columns of length ``k`` using all ``v`` symbols, one per relabelling class.

    A pattern is canonical when its symbols first appear in the order
    ``0, 1, ..., v-1`` (a restricted growth string). Returns a ``(P, k)`` array.
    """
    out: list[list[int]] = []

    def grow(prefix: list[int], top: int) -> None:
        if len(prefix) == k:
            if top == v - 1:
                out.append(list(prefix))
            return
        remaining = k - len(prefix)
        for s in range(min(top + 2, v)):
            new_top = max(top, s)
            if (v - 1 - new_top) > remaining - 1:
                continue
            prefix.append(s)
            grow(prefix, new_top)
            prefix.pop()

    grow([0], 0)
    return np.array(out, dtype=np.int64).reshape(len(out), k)


def _edge_table(patterns: np.ndarray, v: int, d: int) -> np.ndarray:
    """Dense symmetric table: ``E[p1..pd]`` true iff the patterns form a shattered matrix."""
    count = patterns.shape[0]
    table = np.zeros((count,) * d, dtype=bool)
    if count < d:
        return table
    cols = AlphabetMatrix(patterns.T, v)
    bits = BitColumns.from_matrix(cols) if v == 2 else None
    perms = list(itertools.permutations(range(d)))
    it = itertools.combinations(range(count), d)
    chunk = max(1, _CHUNK_CELLS // max(cols.k, 1))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        combos = np.array(block, dtype=np.int64)
        hit = combos[shattered_mask(cols, combos, bits=bits)]
        for perm in perms:
            table[tuple(hit[:, p] for p in perm)] = True
    return table


def _f_by_columns(n: int, k: int, d: int, v: int) -> int:
    patterns = canonical_patterns(k, v)
    count = patterns.shape[0]
    if count == 0:
        return 0
    table = _edge_table(patterns, v, d)
    target = math.comb(n, d)
    if n == 1:
        return int(table[0]) if d == 1 else 0
    best = 0
    for prefix in itertools.combinations_with_replacement(range(count), n - 1):
        base = sum(int(table[s]) for s in itertools.combinations(prefix, d)) if n - 1 >= d else 0
        last = prefix[-1]
        gain = np.zeros(count - last, dtype=np.int64)
        for s in itertools.combinations(prefix, d - 1):
            gain += table[s][last:]
        value = base + int(gain.max())
        if value > best:
            best = value
            if best == target:
                break
    return best


def _row_codes(n: int, d: int, v: int) -> tuple[np.ndarray, int]:
    """Bit of each row's pattern on every d-subset of columns: shape ``(v**n, C(n, d))``."""
    rows = np.array(list(itertools.product(range(v), repeat=n)), dtype=np.int64)
    subsets = np.array(list(itertools.combinations(range(n), d)), dtype=np.int64)
    codes = np.zeros((rows.shape[0], subsets.shape[0]), dtype=np.int64)
    for j in range(d):
        codes += rows[:, subsets[:, j]] * (v**j)
    return np.left_shift(np.uint64(1), codes.astype(np.uint64)), subsets.shape[0]


def _scan_row_sets(n: int, d: int, v: int, size: int, want_max: bool, target: int | None) -> int:
    bits, _ = _row_codes(n, d, v)
    vd = v**d
    full = np.uint64((1 << vd) - 1) if vd < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    it = itertools.combinations(range(bits.shape[0]), size)
    chunk = max(1, _CHUNK_CELLS // max(size * bits.shape[1], 1))
    best: int | None = None
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        idx = np.array(block, dtype=np.int64)
        covered = np.bitwise_or.reduce(bits[idx], axis=1)
        counts = (covered == full).sum(axis=1)
        value = int(counts.max() if want_max else counts.min())
        if best is None or (value > best if want_max else value < best):
            best = value
        if target is not None and best == target:
            break
    return 0 if best is None else best


def _f_costs(n: int, k: int, d: int, v: int) -> dict[str, int | None]:
    costs: dict[str, int | None] = {"columns": None, "rows": None}
    # restricted growth strings of length k using all v symbols: Stirling S(k, v)
    stirling = sum((-1) ** i * math.comb(v, i) * (v - i) ** k for i in range(v + 1)) // math.factorial(v)
    if stirling**d <= MAX_TABLE_CELLS:
        costs["columns"] = math.comb(stirling + n - 1, n)
    if v**d <= 64 and v**n * math.comb(n, d) <= MAX_TABLE_CELLS:
        costs["rows"] = math.comb(v**n, min(k, v**n))
    return costs


def brute_force_f(n: int, k: int, d: int, v: int = 2, *, budget: int = DEFAULT_BUDGET, method: str = "auto") -> int:
    """Exact maximum number of shattered ``k x d`` submatrices over all ``k x n`` matrices.

    Two exact enumerations are available. ``"columns"`` walks column
    multisets drawn from one representative per symbol-relabelling class
    (the count ignores column order and per-column relabelling).
    ``"rows"`` walks sets of ``min(k, v**n)`` distinct rows, since only the
    set of distinct rows matters and adding rows never hurts. ``"auto"``
    picks the cheaper one.
    """
    for name, val, low in (("n", n, 1), ("k", k, 1), ("d", d, 1), ("v", v, 2)):
        if val < low:
            raise InputError(f"{name} must be >= {low}, got {val}")
    if method not in ("auto", "columns", "rows"):
        raise InputError(f"unknown method {method!r}")
    if n < d or k < v**d:
        return 0
    costs = _f_costs(n, k, d, v)
    if method == "auto":
        usable = {m: c for m, c in costs.items() if c is not None}
        if not usable:
            raise ResourceError(f"no enumeration fits in memory for n={n}, k={k}, d={d}, v={v}")
        method = min(usable, key=lambda m: (usable[m], m))
    cost = costs[method]
    if cost is None:
        raise ResourceError(f"{method} enumeration does not fit in memory for n={n}, k={k}, d={d}, v={v}")
    if cost > budget:
        label = "column multisets" if method == "columns" else "row sets"
        raise ResourceError(f"{cost} {label} to enumerate exceeds budget {budget}")
    if method == "columns":
        return _f_by_columns(n, k, d, v)
    return _scan_row_sets(n, d, v, min(k, v**n), True, math.comb(n, d))


def brute_force_g(n: int, k: int, d: int, *, budget: int = DEFAULT_BUDGET) -> int:
    """Exact minimum number of shattered d-subsets over families of ``k`` distinct subsets of ``[n]``."""
    if n < 1 or k < 1 or d < 1:
        raise InputError("n, k and d must be positive")
    if k > 1 << n:
        raise InputError(f"at most 2**{n} distinct subsets exist, asked for {k}")
    if d > n:
        return 0
    families = math.comb(1 << n, k)
    if families > budget:
        raise ResourceError(f"{families} families to enumerate exceeds budget {budget}")
    if (1 << n) * math.comb(n, d) > MAX_TABLE_CELLS:
        raise ResourceError("row table does not fit in memory")
    return _scan_row_sets(n, d, 2, k, False, 0)
