"""Capture matrices, partial capture histories and their numeric quantifications.

A partial capture history is a tuple of 0/1 ints ``(x_1, ..., x_l)``; the empty
tuple is the history seen before the first occasion.  Every quantifier here is
a function of three integers only: the reversed-binary code
``f = sum_j x_j 2**(j-1)``, the number of captures and the length.  Values are
exact :class:`fractions.Fraction` objects so that interval membership can be
decided without rounding.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MAX_OCCASIONS",
    "CaptureMatrix",
    "CaptureDataError",
    "CovariateMatrix",
    "Quantifier",
    "parse_quantifier",
    "history_stats",
    "quantify_f",
    "quantify_g",
    "quantify_gn",
    "quantify_gtilde",
    "quantify_gaug",
    "covariate_matrix",
    "read_capture_csv",
    "write_matrix_csv",
]

# keeps f(x) inside an unsigned 64-bit key
MAX_OCCASIONS = 63

QUANTIFIER_KINDS = ("f", "g", "gn", "gtilde", "gaug")


class CaptureDataError(ValueError):
    """Malformed capture data (bad CSV cell, ragged rows, never-captured unit)."""


def _as_history(x: Iterable[int]) -> tuple[int, ...]:
    bits = tuple(int(b) for b in x)
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"partial history must be binary, got {bits!r}")
    return bits


def history_stats(x: Iterable[int]) -> tuple[int, int, int]:
    """Return ``(f, captures, length)`` for a partial history."""
    bits = _as_history(x)
    f = sum(b << j for j, b in enumerate(bits))
    return f, sum(bits), len(bits)


@dataclass(frozen=True)
class CaptureMatrix:
    """Observed ``M x t`` binary capture matrix (never-captured units excluded)."""

    x: np.ndarray
    t: int = field(default=0)

    def __post_init__(self):
        arr = np.asarray(self.x)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, self.t)
        if arr.ndim != 2:
            raise CaptureDataError("capture matrix must be two-dimensional")
        if not np.isin(arr, (0, 1)).all():
            raise CaptureDataError("capture matrix entries must be 0 or 1")
        arr = arr.astype(np.int8)
        t = arr.shape[1] if arr.shape[0] or not self.t else self.t
        if arr.shape[1] != t:
            raise CaptureDataError(f"rows have length {arr.shape[1]}, expected t={t}")
        if t < 1:
            raise CaptureDataError("need at least one capture occasion")
        if t > MAX_OCCASIONS:
            raise CaptureDataError(f"at most {MAX_OCCASIONS} occasions are supported")
        if arr.shape[0] and (arr.sum(axis=1) == 0).any():
            bad = int(np.flatnonzero(arr.sum(axis=1) == 0)[0])
            raise CaptureDataError(f"row {bad + 1} was never captured; only observed units belong in the matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "x", arr)
        object.__setattr__(self, "t", int(t))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], t: int | None = None) -> "CaptureMatrix":
        rows = [list(r) for r in rows]
        if not rows:
            if t is None:
                raise CaptureDataError("empty matrix needs an explicit t")
            return cls(np.zeros((0, t), dtype=np.int8), t)
        lengths = {len(r) for r in rows}
        if len(lengths) != 1:
            raise CaptureDataError(f"ragged rows: lengths {sorted(lengths)}")
        return cls(np.array(rows, dtype=np.int8), t or lengths.pop())

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n_captures(self) -> int:
        return int(self.x.sum())

    def rows(self) -> list[tuple[int, ...]]:
        return [tuple(int(b) for b in r) for r in self.x]

    def partial_histories(self):
        """Yield ``(i, j, history, outcome)`` for every observed Bernoulli trial (0-based i, j)."""
        for i, row in enumerate(self.rows()):
            for j in range(self.t):
                yield i, j, row[:j], row[j]


@dataclass(frozen=True)
class Quantifier:
    """Maps a partial history to a number.

    ``kind`` is one of ``f``, ``g``, ``gn``, ``gtilde`` or ``gaug``; ``gtilde``
    needs the experiment length ``t`` and ``gaug`` the augmentation order ``k``.
    """

    kind: str
    k: int | None = None
    t: int | None = None

    def __post_init__(self):
        if self.kind not in QUANTIFIER_KINDS:
            raise ValueError(f"unknown quantifier {self.kind!r}")
        if self.kind == "gaug" and (self.k is None or self.k < 1):
            raise ValueError("gaug needs an order k >= 1")
        if self.kind == "gtilde" and (self.t is None or self.t < 1):
            raise ValueError("gtilde needs the number of occasions t >= 1")

    @property
    def label(self) -> str:
        if self.kind == "gaug":
            return f"gaug:{self.k}"
        return self.kind

    @property
    def normalized(self) -> bool:
        return self.kind != "f"

    def with_t(self, t: int) -> "Quantifier":
        """Bind the number of occasions (only changes ``gtilde``)."""
        if self.kind == "gtilde" and self.t != t:
            return Quantifier("gtilde", t=t)
        return self

    def from_stats(self, f: int, ones: int, length: int) -> Fraction:
        kind = self.kind
        if kind == "f":
            return Fraction(f)
        if kind == "g":
            return Fraction(f, (1 << length) - 1) if length else Fraction(0)
        if kind == "gn":
            return Fraction(ones, length) if length else Fraction(0)
        if kind == "gtilde":
            if length >= self.t:
                raise ValueError(f"history of length {length} cannot occur with t={self.t}")
            return Fraction(ones, self.t)
        # prepending k zeros multiplies f by 2**k and lengthens the history by k
        k = self.k
        return Fraction(f << k, (1 << (length + k)) - 1)

    def __call__(self, x: Iterable[int]) -> Fraction:
        return self.from_stats(*history_stats(x))

    def array(self, f: np.ndarray, ones: np.ndarray, length: np.ndarray) -> np.ndarray:
        """Floating-point evaluation on arrays of history statistics."""
        f = np.asarray(f, dtype=float)
        ones = np.asarray(ones, dtype=float)
        length = np.asarray(length)
        kind = self.kind
        with np.errstate(invalid="ignore", divide="ignore"):
            if kind == "f":
                out = f
            elif kind == "g":
                out = f / (np.exp2(length) - 1.0)
            elif kind == "gn":
                out = ones / length
            elif kind == "gtilde":
                out = ones / float(self.t)
            else:
                out = f * 2.0**self.k / (np.exp2(length + self.k) - 1.0)
        return np.where(length == 0, 0.0, out)

    def level_grid(self, length: int) -> tuple[Fraction, int]:
        """Values attainable at a given history length are ``scale * m`` for ``m in 0..m_max``."""
        if length == 0:
            return Fraction(1), 0
        kind = self.kind
        if kind == "f":
            return Fraction(1), (1 << length) - 1
        if kind == "g":
            return Fraction(1, (1 << length) - 1), (1 << length) - 1
        if kind == "gn":
            return Fraction(1, length), length
        if kind == "gtilde":
            return Fraction(1, self.t), length
        return Fraction(1 << self.k, (1 << (length + self.k)) - 1), (1 << length) - 1

    def attains_in(self, lo: Fraction | None, hi: Fraction, t: int) -> bool:
        """Whether some history of length < t has a value in ``(lo, hi]`` (``[0, hi]`` if lo is None)."""
        for length in range(t):
            scale, m_max = self.level_grid(length)
            m = min(int(hi / scale), m_max)
            if m < 0:
                continue
            if lo is None or m * scale > lo:
                return True
        return False

    def min_positive(self, t: int) -> Fraction:
        """Smallest strictly positive value over all histories of length < t."""
        best = None
        for length in range(1, t):
            scale, m_max = self.level_grid(length)
            if m_max >= 1 and (best is None or scale < best):
                best = scale
        if best is None:
            raise ValueError("no positive values are attainable")
        return best


def parse_quantifier(text: str, t: int | None = None) -> Quantifier:
    """Parse ``f``, ``g``, ``gn``, ``gtilde`` or ``gaug:k``."""
    text = text.strip().lower()
    if text.startswith("gaug"):
        _, _, k = text.partition(":")
        if not k.isdigit():
            raise ValueError(f"gaug needs an order, e.g. 'gaug:2', got {text!r}")
        return Quantifier("gaug", k=int(k))
    if text in ("gt", "gtilde"):
        return Quantifier("gtilde", t=t if t is not None else 1)
    return Quantifier(text)


def quantify_f(x: Iterable[int]) -> int:
    return history_stats(x)[0]


def quantify_g(x: Iterable[int]) -> Fraction:
    return Quantifier("g")(x)


def quantify_gn(x: Iterable[int]) -> Fraction:
    return Quantifier("gn")(x)


def quantify_gtilde(x: Iterable[int], t: int) -> Fraction:
    return Quantifier("gtilde", t=t)(x)


def quantify_gaug(x: Iterable[int], k: int) -> Fraction:
    """g of the history with ``k`` leading zeros prepended."""
    return Quantifier("gaug", k=k)(x)


@dataclass(frozen=True)
class CovariateMatrix:
    """``N x t`` covariate grid; the last ``n_unobserved`` rows are all zero."""

    exact: tuple[tuple[Fraction, ...], ...]
    t: int
    n_unobserved: int = 0

    @property
    def values(self) -> np.ndarray:
        out = np.array([[float(v) for v in row] for row in self.exact], dtype=float).reshape(-1, self.t)
        if self.n_unobserved:
            out = np.vstack([out, np.zeros((self.n_unobserved, self.t))])
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.exact) + self.n_unobserved, self.t


def covariate_matrix(data: CaptureMatrix, q: Quantifier, n_total: int | None = None) -> CovariateMatrix:
    """z_ij = q(x_i1, ..., x_i,j-1) for observed rows, plus ``n_total - M`` zero rows."""
    n_total = data.m if n_total is None else n_total
    if n_total < data.m:
        raise ValueError(f"n_total={n_total} is smaller than the number of observed units M={data.m}")
    q = q.with_t(data.t)
    rows = []
    for row in data.rows():
        f = ones = 0
        zrow = []
        for j, b in enumerate(row):
            zrow.append(q.from_stats(f, ones, j))
            f += b << j
            ones += b
        rows.append(tuple(zrow))
    return CovariateMatrix(tuple(rows), data.t, n_total - data.m)


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_capture_csv(source) -> CaptureMatrix:
    """Read a 0/1 capture matrix from a path, file object or CSV text.

    One row per observed unit; a single header line is skipped when its first
    cell is not numeric.  Errors carry the 1-based line number.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).is_file()):
        text = Path(source).read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    rows = []
    width = None
    for lineno, cells in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in cells]
        if not cells or all(c == "" for c in cells):
            continue
        if lineno == 1 and not _looks_numeric(cells[0]):
            continue
        try:
            vals = [int(c) for c in cells]
        except ValueError:
            raise CaptureDataError(f"line {lineno}: non-integer cell in {cells!r}") from None
        if any(v not in (0, 1) for v in vals):
            raise CaptureDataError(f"line {lineno}: entries must be 0 or 1")
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise CaptureDataError(f"line {lineno}: expected {width} columns, found {len(vals)}")
        if not any(vals):
            raise CaptureDataError(f"line {lineno}: unit never captured")
        rows.append(vals)
    if not rows:
        raise CaptureDataError("no capture histories found")
    return CaptureMatrix.from_rows(rows)


def write_matrix_csv(rows, fh, header: Sequence[str] | None = None, fmt=str) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
