"""Simulated capture experiments and replicated estimation studies.

Random numbers come from numpy's Philox counter-based generator.  Replicate
``r`` of a study with base seed ``s`` is seeded with
``SeedSequence(s, spawn_key=(r,))``, so every replicate has its own stream and
results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .histories import CaptureMatrix
from .likelihood import fit_model
from .models import ModelSpec
from .selection import RankingRow

__all__ = [
    "GeneratorSpec",
    "ReplicateRecord",
    "TrialRow",
    "TrialReport",
    "replicate_seed",
    "make_rng",
    "generate",
    "expected_m",
    "run_trial",
]


def replicate_seed(base_seed: int, r: int) -> int:
    """64-bit seed of replicate r."""
    state = np.random.SeedSequence(int(base_seed) & (2**64 - 1), spawn_key=(int(r),)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


@dataclass(frozen=True)
class GeneratorSpec:
    """A model with fixed parameters.

    Linear models take ``alpha`` and ``beta``; M0 takes ``alpha`` or a single
    probability in ``probs``; partition and time models take one probability
    per class in ``probs``.
    """

    model: ModelSpec
    n_true: int
    t: int
    seed: int = 0
    alpha: float | None = None
    beta: float | None = None
    probs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_true < 0 or self.t < 1:
            raise ValueError("need n_true >= 0 and t >= 1")
        kind = self.model.kind
        if kind in ("cutsearch",):
            raise ValueError("cannot simulate from a cut search; give explicit cutpoints")
        if kind == "linear":
            if self.alpha is None or self.beta is None:
                raise ValueError("linear generator needs alpha and beta")
            if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
                raise ValueError("alpha and beta must be finite")
        else:
            probs = self.probs
            if probs is None and self.alpha is not None and kind == "M0":
                probs = (float(expit(self.alpha)),)
            if probs is None:
                raise ValueError(f"{self.model.label} generator needs class probabilities")
            d = self.model.design(self.t).d
            if len(probs) != d:
                raise ValueError(f"{self.model.label} needs {d} probabilities, got {len(probs)}")
            if any(not 0.0 < p < 1.0 for p in probs):
                raise ValueError("probabilities must lie strictly between 0 and 1")
            object.__setattr__(self, "probs", tuple(float(p) for p in probs))

    def design(self):
        return self.model.design(self.t)

    def probability(self, history: tuple) -> float:
        """Conditional capture probability after a partial history."""
        design = self.design()
        f = sum(b << j for j, b in enumerate(history))
        key = design.key(tuple(history), f, sum(history))
        if design.kind == "linear":
            return float(expit(self.alpha + self.beta * float(key)))
        return self.probs[int(key) - 1]


def generate(spec: GeneratorSpec) -> CaptureMatrix:
    """Sample every unit occasion by occasion and keep the ones caught at least once."""
    rng = make_rng(spec.seed)
    n, t = spec.n_true, spec.t
    design = spec.design()
    x = np.zeros((n, t), dtype=np.int8)
    f = np.zeros(n, dtype=np.int64)
    ones = np.zeros(n, dtype=np.int64)
    for j in range(t):
        if design.kind == "linear":
            z = design.quantifier.array(f, ones, np.full(n, j))
            p = expit(spec.alpha + spec.beta * z)
        elif design.kind == "constant":
            p = np.full(n, spec.probs[0])
        elif design.kind == "time":
            p = np.full(n, spec.probs[j])
        else:
            part = design.partition
            p = np.array([spec.probs[part.class_of(tuple(row[:j])) - 1] for row in x.tolist()], dtype=float)
        caught = (rng.random(n) < p).astype(np.int8)
        x[:, j] = caught
        f += caught.astype(np.int64) << j
        ones += caught
    seen = x[x.sum(axis=1) > 0]
    return CaptureMatrix(seen, t)


def expected_m(spec: GeneratorSpec) -> float:
    """N (1 - P0) under the generating model."""
    p0 = 1.0
    for j in range(spec.t):
        p0 *= 1.0 - spec.probability((0,) * j)
    return spec.n_true * (1.0 - p0)


@dataclass
class ReplicateRecord:
    index: int
    seed: int
    m: int
    n_hat: list
    ci: list
    aic: list
    failure: list
    error: list
    winner: int | None


@dataclass
class TrialRow:
    model: str
    params: int | None
    mean_n_hat: float
    rmse: float
    coverage: float
    mean_ci_length: float
    pct_aic_best: float
    failures: int
    errors: int


@dataclass
class TrialReport:
    rows: list[TrialRow]
    k: int
    n_true: int
    t: int
    expected_m: float
    mean_m: float
    replicates: list[ReplicateRecord] = field(default_factory=list, repr=False)

    def row(self, model: str) -> TrialRow:
        return next(r for r in self.rows if r.model == model)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_true": self.n_true,
            "t": self.t,
            "expected_m": self.expected_m,
            "mean_m": self.mean_m,
            "rows": [r.__dict__ for r in self.rows],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "mean", "rmse", "coverage", "ci_length", "pct_aic", "failures",
                    "errors", "k", "n_true", "t", "expected_m", "mean_m"])
        for r in self.rows:
            w.writerow([r.model, _fmt(r.mean_n_hat), _fmt(r.rmse), _fmt(r.coverage), _fmt(r.mean_ci_length),
                        _fmt(r.pct_aic_best), r.failures, r.errors, self.k, self.n_true, self.t,
                        f"{self.expected_m:.1f}", _fmt(self.mean_m)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4g}"


def _run_replicate(spec: GeneratorSpec, candidates, r: int, base_seed: int, fit_kw: dict) -> ReplicateRecord:
    seed = replicate_seed(base_seed, r)
    data = generate(replace(spec, seed=seed))
    rec = ReplicateRecord(r, seed, data.m, [], [], [], [], [], None)
    rows = []
    for cand in candidates:
        res, err = None, None
        if data.m == 0:
            err = "no unit was captured"
        else:
            try:
                res = fit_model(data, cand, **fit_kw)
            except ValueError as exc:
                err = str(exc)
        rows.append(RankingRow(cand, res, err))
        rec.n_hat.append(None if res is None else res.n_hat)
        rec.ci.append(None if res is None else res.ci)
        rec.aic.append(None if res is None else res.aic)
        rec.failure.append(True if res is None else res.failure)
        rec.error.append(err)
    fitted = [i for i, row in enumerate(rows) if row.result is not None]
    if fitted:
        rec.winner = min(fitted, key=lambda i: rows[i].sort_key())
    return rec


def run_trial(spec: GeneratorSpec, candidates, k: int, base_seed: int = 0, threads: int = 1,
              n_upp: int | None = None, grid: str = "coarse", level: float = 0.95) -> TrialReport:
    """Replicated study: generate k data sets, fit every candidate, aggregate.

    Mean, rmse and CI length skip likelihood-failure replicates; coverage uses
    every replicate (an open upper end covers iff the lower end is below the
    truth).  The AIC winner of each replicate follows the ranking tie rule.
    """
    if k < 1:
        raise ValueError("need at least one replicate")
    candidates = list(candidates)
    fit_kw = {"n_upp": n_upp, "grid": grid, "level": level}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda r: _run_replicate(spec, candidates, r, base_seed, fit_kw), range(k)))
    else:
        records = [_run_replicate(spec, candidates, r, base_seed, fit_kw) for r in range(k)]

    truth = spec.n_true
    rows = []
    for c, cand in enumerate(candidates):
        ok = [rec for rec in records if rec.error[c] is None and not rec.failure[c]]
        est = np.array([rec.n_hat[c] for rec in ok], dtype=float)
        lengths = np.array([rec.ci[c][1] - rec.ci[c][0] for rec in ok], dtype=float)
        covered = 0
        for rec in records:
            ci = rec.ci[c]
            if ci is None:
                continue
            lo, hi = ci
            if lo <= truth and (hi is None or truth <= hi):
                covered += 1
        rows.append(TrialRow(
            model=cand.label,
            params=None if cand.kind == "cutsearch" else cand.n_params(spec.t),
            mean_n_hat=float(est.mean()) if est.size else math.nan,
            rmse=float(np.sqrt(np.mean((est - truth) ** 2))) if est.size else math.nan,
            coverage=100.0 * covered / k,
            mean_ci_length=float(lengths.mean()) if lengths.size else math.nan,
            pct_aic_best=100.0 * sum(rec.winner == c for rec in records) / k,
            failures=sum(1 for rec in records if rec.error[c] is None and rec.failure[c]),
            errors=sum(1 for rec in records if rec.error[c] is not None),
        ))
    return TrialReport(
        rows=rows,
        k=k,
        n_true=truth,
        t=spec.t,
        expected_m=expected_m(spec),
        mean_m=float(np.mean([rec.m for rec in records])),
        replicates=records,
    )
