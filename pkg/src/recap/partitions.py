"""Partitions of the set of partial capture histories into equivalence classes.

A :class:`Partition` is stored as a classifier: ``class_of(x)`` returns the
1-based class of a partial history.  Explicit class lists are only built on
request (``classes()``), since there are ``2**t - 1`` histories.
"""

from __future__ import annotations

import bisect
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .histories import Quantifier, history_stats

__all__ = [
    "Partition",
    "CutRecipe",
    "CorrespondenceReport",
    "all_histories",
    "named_partition",
    "cut_partition",
    "dyadic_cuts",
    "markov_correspondence_check",
    "bits_to_str",
]

NAMED_MODELS = ("M0", "Mb", "Mt", "Mc", "Mcb", "ML2", "Mcount")

# tables of explicit classes are only materialized up to this t
MAX_ENUMERATION_T = 16


def bits_to_str(x: Sequence[int]) -> str:
    return "".join(str(b) for b in x)


def all_histories(t: int):
    """Every partial history of length 0..t-1, shortest first."""
    for length in range(t):
        yield from itertools.product((0, 1), repeat=length)


@dataclass(frozen=True, eq=False)
class Partition:
    label: str
    t: int
    n_classes: int
    rule: Callable[[tuple], int] = field(repr=False)
    recipe: "CutRecipe | None" = None
    dropped: tuple[int, ...] = ()

    def class_of(self, x: Sequence[int]) -> int:
        x = tuple(x)
        if len(x) > self.t - 1:
            raise ValueError(f"history of length {len(x)} is too long for t={self.t}")
        return self.rule(x)

    def classes(self) -> list[list[tuple[int, ...]]]:
        if self.t > MAX_ENUMERATION_T:
            raise ValueError(f"explicit enumeration is limited to t <= {MAX_ENUMERATION_T}")
        out = [[] for _ in range(self.n_classes)]
        for x in all_histories(self.t):
            out[self.rule(x) - 1].append(x)
        return out

    def same_as(self, other: "Partition") -> bool:
        """Same classes in the same order."""
        return self.t == other.t and all(self.rule(x) == other.rule(x) for x in all_histories(self.t))

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "t": self.t,
            "classes": [[bits_to_str(x) for x in c] for c in self.classes()],
        }
        if self.recipe is not None:
            out["recipe"] = self.recipe.to_dict()
        if self.dropped:
            out["dropped_intervals"] = list(self.dropped)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _suffix_code(x: tuple, k: int) -> int:
    """Last k digits (zero-padded on the left) read with weights 1, 2, ..., 2**(k-1)."""
    tail = ((0,) * k + x)[-k:]
    return sum(b << p for p, b in enumerate(tail))


def named_partition(model: str, t: int, k: int | None = None) -> Partition:
    """Partition for a classical model.

    ``model`` is one of M0, Mb, Mt, Mc, Mcb, ML2, Mcount; Mc and Mcb need the
    Markov order ``k``.  ``"Mc2"``-style labels are accepted too.
    """
    name = model
    if k is None and model[:3] in ("Mcb", "mcb") and model[3:].isdigit():
        name, k = "Mcb", int(model[3:])
    elif k is None and model[:2] in ("Mc", "mc") and model[2:].isdigit():
        name, k = "Mc", int(model[2:])
    key = {m.lower(): m for m in NAMED_MODELS}.get(name.lower())
    if key is None:
        raise ValueError(f"unknown model {model!r}")
    if t < 2:
        raise ValueError("named partitions need t >= 2")

    if key == "M0":
        return Partition("M0", t, 1, lambda x: 1)
    if key == "Mb":
        return Partition("Mb", t, 2, lambda x: 2 if any(x) else 1)
    if key == "Mt":
        return Partition("Mt", t, t, lambda x: len(x) + 1)
    if key == "Mcount":
        return Partition("Mcount", t, t, lambda x: sum(x) + 1)
    if key == "ML2":
        if t < 4:
            raise ValueError("ML2 needs t >= 4")

        def ml2(x):
            if len(x) < 3:
                return 2 if x in ((1,), (0, 1), (1, 1)) else 1
            return 2 if _suffix_code(x, 3) >= 5 else 1

        return Partition("ML2", t, 2, ml2)

    if k is None or not 1 <= k <= t - 1:
        raise ValueError(f"{key} needs an order 1 <= k <= t-1, got k={k}")
    if key == "Mc":
        return Partition(f"Mc{k}", t, 2**k, lambda x: _suffix_code(x, k) + 1)

    def mcb(x):
        code = _suffix_code(x, k)
        if code == 0:
            return 2 if any(x) else 1
        return code + 2

    return Partition(f"Mc{k}b", t, 2**k + 1, mcb)


@dataclass(frozen=True)
class CutRecipe:
    """Intervals [0, e1], (e1, e2], ..., (e_{A-1}, 1] on a quantifier's range."""

    quantifier: Quantifier
    cutpoints: tuple[Fraction, ...]

    def __post_init__(self):
        cuts = tuple(Fraction(c) for c in self.cutpoints)
        if self.quantifier.kind == "f":
            raise ValueError("cut recipes need a quantifier with range [0, 1]")
        if any(c <= 0 or c >= 1 for c in cuts):
            raise ValueError(f"cutpoints must lie in (0, 1), got {[str(c) for c in cuts]}")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cutpoints must be strictly increasing")
        object.__setattr__(self, "cutpoints", cuts)

    @property
    def n_intervals(self) -> int:
        return len(self.cutpoints) + 1

    def interval_of(self, z: Fraction) -> int:
        """1-based interval index; intervals are right-closed and the first includes 0."""
        return bisect.bisect_left(self.cutpoints, z) + 1

    def to_dict(self) -> dict:
        return {"quantifier": self.quantifier.label, "cutpoints": [str(c) for c in self.cutpoints]}


def dyadic_cuts(k: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(r, 2**k) for r in range(1, 2**k))


def cut_partition(recipe: CutRecipe, t: int, label: str | None = None) -> Partition:
    """x belongs to class a iff q(x) falls in interval a.

    Intervals that no history of length < t can reach are dropped and the
    remaining classes renumbered; their original indices are kept in
    ``Partition.dropped``.
    """
    q = recipe.quantifier.with_t(t)
    bounds = (None,) + recipe.cutpoints
    tops = recipe.cutpoints + (Fraction(1),)
    kept, dropped = [], []
    for a, (lo, hi) in enumerate(zip(bounds, tops), start=1):
        (kept if q.attains_in(lo, hi, t) else dropped).append(a)
    remap = {a: i for i, a in enumerate(kept, start=1)}
    cache: dict[tuple, int] = {}

    def rule(x):
        got = cache.get(x)
        if got is None:
            got = cache[x] = remap[recipe.interval_of(q.from_stats(*history_stats(x)))]
        return got

    if label is None:
        label = f"{q.label}.cut({len(recipe.cutpoints)})"
    return Partition(label, t, len(kept), rule, recipe=recipe, dropped=tuple(dropped))


@dataclass(frozen=True)
class CorrespondenceReport:
    k: int
    t: int
    passed: bool
    n_checked: int
    counterexample: str | None = None

    def line(self) -> str:
        status = "pass" if self.passed else f"FAIL ({self.counterexample})"
        return f"k={self.k} t={self.t}: {status}"


def markov_correspondence_check(k: int, t: int) -> CorrespondenceReport:
    """Check exhaustively that dyadic cuts of g reproduce Markov order-k classes.

    Two things are verified over every history of length < t: (1) for length
    >= k the dyadic interval of g(x) is fixed by the last k digits, with index
    1 + sum_p x_{l-k+p} 2**(p-1); (2) dyadic cuts of the zero-augmented g give
    exactly the Mc(k) partition.
    """
    if not 1 <= k < t:
        raise ValueError("need 1 <= k < t")
    if t > MAX_ENUMERATION_T:
        raise ValueError(f"exhaustive check limited to t <= {MAX_ENUMERATION_T}")
    g_cut = cut_partition(CutRecipe(Quantifier("g"), dyadic_cuts(k)), t)
    aug_cut = cut_partition(CutRecipe(Quantifier("gaug", k=k), dyadic_cuts(k)), t)
    markov = named_partition("Mc", t, k)
    checked = 0
    for x in all_histories(t):
        checked += 1
        if len(x) >= k and g_cut.class_of(x) != _suffix_code(x, k) + 1:
            return CorrespondenceReport(k, t, False, checked, f"g interval of ({bits_to_str(x)}) not set by last {k} digits")
        if aug_cut.class_of(x) != markov.class_of(x):
            return CorrespondenceReport(k, t, False, checked, f"gaug class of ({bits_to_str(x)}) differs from Mc{k}")
    return CorrespondenceReport(k, t, True, checked)
