"""AIC ranking of candidate models and the search for optimal cutpoints."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import xlogy

from .histories import CaptureMatrix, Quantifier
from .likelihood import FitResult, default_n_upp, fit_model, grid_points, log_binom
from .models import ModelSpec

__all__ = ["RankingRow", "RankingReport", "rank_models", "cut_search", "cut_candidates", "CUT_STRATEGIES"]

CUT_STRATEGIES = ("full", "reduced", "greedy")
REDUCED_SIZE = 25
TIE_TOL = 1e-9


@dataclass
class RankingRow:
    spec: ModelSpec
    result: FitResult | None
    error: str | None = None

    @property
    def label(self) -> str:
        return self.result.model if self.result is not None else self.spec.label

    @property
    def aic(self) -> float:
        return math.inf if self.result is None else self.result.aic

    @property
    def params(self) -> int | None:
        return None if self.result is None else self.result.params

    def sort_key(self):
        return (self.aic, self.params if self.params is not None else 10**9, self.label)


@dataclass
class RankingReport:
    rows: list[RankingRow]

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def best(self) -> RankingRow:
        return self.rows[0]

    def to_records(self) -> list[dict]:
        out = []
        for row in self.rows:
            r = row.result
            out.append({
                "model": row.label,
                "spec": row.spec.to_string(),
                "params": row.params,
                "n_hat": None if r is None else r.n_hat,
                "ci_lo": None if r is None else r.ci[0],
                "ci_hi": None if r is None else r.ci[1],
                "aic": None if r is None else r.aic,
                "failure": None if r is None else r.failure,
                "error": row.error,
                "fit": None if r is None else r.to_dict(),
            })
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_records(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "params", "n_hat", "ci_lo", "ci_hi", "aic", "failure"])
        for rec in self.to_records():
            if rec["error"] is not None:
                w.writerow([rec["model"], "", "", "", "", "", f"error: {rec['error']}"])
                continue
            w.writerow([
                rec["model"], rec["params"], rec["n_hat"], rec["ci_lo"],
                "" if rec["ci_hi"] is None else rec["ci_hi"], f"{rec['aic']:.2f}", str(rec["failure"]).lower(),
            ])
        return buf.getvalue()


def rank_models(data: CaptureMatrix, candidates, n_upp: int | None = None, grid: str = "coarse",
                level: float = 0.95, threads: int = 1, cut_strategy: str | None = None) -> RankingReport:
    """Fit every candidate and sort by AIC (then fewer parameters, then label)."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate models")
    rows = []
    for spec in candidates:
        try:
            if spec.kind == "cutsearch":
                res = cut_search(data, spec.quantifier, spec.n_cuts, cut_strategy, n_upp, grid, level, threads)[1]
            else:
                res = fit_model(data, spec, n_upp, grid, level, threads)
            rows.append(RankingRow(spec, res))
        except ValueError as exc:
            rows.append(RankingRow(spec, None, str(exc)))
    rows.sort(key=RankingRow.sort_key)
    return RankingReport(rows)


def _observed_values(data: CaptureMatrix, q: Quantifier):
    """Per distinct quantifier value: successes, observed trials, unobserved trials per unit."""
    q = q.with_t(data.t)
    succ: dict = {}
    obs: dict = {}
    for row in data.rows():
        f = ones = 0
        for j, b in enumerate(row):
            z = q.from_stats(f, ones, j)
            succ[z] = succ.get(z, 0) + b
            obs[z] = obs.get(z, 0) + 1
            f += b << j
            ones += b
    values = sorted(obs)
    zero = Fraction(0)
    if zero not in obs:
        values = [zero] + values
    s = np.array([succ.get(v, 0) for v in values], dtype=float)
    n = np.array([obs.get(v, 0) for v in values], dtype=float)
    u = np.zeros(len(values))
    u[0] = data.t
    return values, s, n, u


def _zero_cut(q: Quantifier, t: int) -> Fraction:
    """Cutpoint that isolates the value 0 from every positive attainable value."""
    if q.kind == "g":
        return Fraction(1, 2**t)
    return q.min_positive(t) / 2


def cut_candidates(data: CaptureMatrix, q: Quantifier) -> list[Fraction]:
    """Admissible cut values: every attained value except the largest (0 is replaced by a tiny cut)."""
    values = _observed_values(data, q)[0]
    return [(_zero_cut(q.with_t(data.t), data.t) if v == 0 else v) for v in values[:-1]]


def _segment_ll(s, n):
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(n > 0, s / np.where(n > 0, n, 1.0), 0.0)
    return xlogy(s, p) + xlogy(n - s, 1.0 - p)


class _CutScorer:
    """Profile log-likelihood maximum for every cut vector, in closed form.

    Cutting the sorted list of attained values into contiguous blocks gives
    the classes; block 1 always holds value 0 and so all unobserved trials.
    """

    def __init__(self, data: CaptureMatrix, q: Quantifier, n_upp: int, grid: str):
        values, s, n, u = _observed_values(data, q)
        self.values = values
        self.cs = np.concatenate([[0.0], np.cumsum(s)])
        self.cn = np.concatenate([[0.0], np.cumsum(n)])
        self.m = data.m
        self.t = data.t
        ns = np.array(grid_points(self.m, n_upp, "full"), dtype=float)
        self.ns = ns
        self.log_c = log_binom(ns, self.m)
        self._first: dict[int, float] = {}

    def block(self, a: int, b: int) -> float:
        """Log-likelihood of values a..b (inclusive) pooled into one class."""
        return float(_segment_ll(self.cs[b + 1] - self.cs[a], self.cn[b + 1] - self.cn[a]))

    def first_block(self, b: int) -> float:
        got = self._first.get(b)
        if got is None:
            s1 = self.cs[b + 1]
            n1 = self.cn[b + 1] + (self.ns - self.m) * self.t
            got = self._first[b] = float(np.max(self.log_c + _segment_ll(s1, n1)))
        return got

    def score(self, cuts: tuple[int, ...]) -> float:
        """cuts are indices i: a cut after value i (value i is the right end of its block)."""
        last = len(self.values) - 1
        total = self.first_block(cuts[0])
        bounds = list(cuts) + [last]
        for a, b in zip(bounds, bounds[1:]):
            total += self.block(a + 1, b)
        return total


def _best(scorer: _CutScorer, combos) -> tuple[tuple[int, ...], float]:
    best, best_val = None, -math.inf
    for combo in combos:
        val = scorer.score(combo)
        if val > best_val + TIE_TOL:
            best, best_val = combo, val
    return best, best_val


def cut_search(data: CaptureMatrix, q: Quantifier, n_cuts: int, strategy: str | None = None,
               n_upp: int | None = None, grid: str = "coarse", level: float = 0.95, threads: int = 1):
    """AIC-optimal cutpoints among the quantifier values attained by observed histories.

    ``full`` tries every combination (default up to two cuts), ``reduced`` tries
    every combination of a decimated candidate list, ``greedy`` adds one cut at
    a time to the best solution with one cut fewer (default from three cuts).
    Returns ``(cutpoints, FitResult)``; ties go to the lexicographically
    smallest cut vector.
    """
    if n_cuts < 1:
        raise ValueError("n_cuts must be >= 1")
    strategy = strategy or ("full" if n_cuts <= 2 else "greedy")
    if strategy not in CUT_STRATEGIES:
        raise ValueError(f"strategy must be one of {CUT_STRATEGIES}")
    if data.m < 1:
        raise ValueError("no observed units")
    n_upp = default_n_upp(data.m) if n_upp is None else int(n_upp)
    q = q.with_t(data.t)
    scorer = _CutScorer(data, q, n_upp, grid)
    n_values = len(scorer.values)
    if n_cuts >= n_values:
        raise ValueError(f"{n_cuts} cuts need more than {n_values} distinct attained values")
    positions = list(range(n_values - 1))

    if strategy == "full":
        best, _ = _best(scorer, itertools.combinations(positions, n_cuts))
    elif strategy == "reduced":
        step = max(1, math.ceil(len(positions) / REDUCED_SIZE))
        reduced = positions[::step]
        if len(reduced) < n_cuts:
            reduced = positions
        best, _ = _best(scorer, itertools.combinations(reduced, n_cuts))
    else:
        best, _ = _best(scorer, itertools.combinations(positions, min(n_cuts, 2)))
        while len(best) < n_cuts:
            options = (tuple(sorted(best + (p,))) for p in positions if p not in best)
            best, _ = _best(scorer, sorted(options))

    candidates = cut_candidates(data, q)
    cuts = tuple(candidates[i] for i in best)
    spec = ModelSpec("cut", quantifier=q, cutpoints=cuts)
    return cuts, fit_model(data, spec, n_upp, grid, level, threads)
