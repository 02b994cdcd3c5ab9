"""Unconditional likelihood in (N, model parameters) and its profile over N.

For each candidate ``n`` the inner model is fitted on the grouped data with
``n - M`` all-zero rows, and ``log C(n, M)`` is added to the Bernoulli
log-likelihood.  The estimate of N is the argmax over an integer grid
``M..n_upp``; hitting the upper edge is reported as a likelihood failure.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln
from scipy.stats import chi2

from .glm import Design, GlmFit, GroupedData, build_grouped, irls_fit
from .histories import CaptureMatrix
from .models import ModelSpec

__all__ = [
    "ProfilePoint",
    "FitResult",
    "log_binom",
    "default_n_upp",
    "grid_points",
    "p0",
    "profile",
    "maximize",
    "profile_ci",
    "chi2_threshold",
    "fit_model",
]

GRID_STRATEGIES = ("full", "coarse")
COARSE_STEPS = 200


def log_binom(n, m):
    """log C(n, m) via log-gamma."""
    return gammaln(np.asarray(n, dtype=float) + 1) - gammaln(m + 1.0) - gammaln(np.asarray(n, dtype=float) - m + 1)


def default_n_upp(m: int) -> int:
    return max(2 * m + 100, 20 * m)


def chi2_threshold(level: float) -> float:
    return float(chi2.ppf(level, df=1))


@dataclass
class ProfilePoint:
    n: int
    loglik: float
    fit: GlmFit | None = None
    error: str | None = None


@dataclass
class FitResult:
    model: str
    n_hat: int
    coefficients: list
    p0: float
    loglik: float
    aic: float
    ci: tuple
    failure: bool
    params: int
    m: int
    n_upp: int
    class_probs: list | None = None
    warnings: list = field(default_factory=list)
    profile: list = field(default_factory=list, repr=False)

    @property
    def ci_length(self) -> float:
        lo, hi = self.ci
        return math.inf if hi is None else hi - lo

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n_hat": self.n_hat,
            "coefficients": [float(c) for c in self.coefficients],
            "class_probs": None if self.class_probs is None else [float(p) for p in self.class_probs],
            "p0": float(self.p0),
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "ci": [self.ci[0], self.ci[1]],
            "failure": bool(self.failure),
            "params": self.params,
            "m": self.m,
            "n_upp": self.n_upp,
            "warnings": list(self.warnings),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def p0(fit: GlmFit, design: Design, t: int | None = None) -> float:
    """Probability that a unit is never captured in t occasions.

    Product over occasions of one minus the fitted probability given the
    all-zero history of that length.
    """
    t = design.t if t is None else t
    out = 1.0
    zeros: tuple = ()
    for _ in range(t):
        key = design.key(zeros, 0, 0)
        if design.kind == "linear":
            p = float(expit(design.row(key) @ fit.coefficients))
        else:
            p = float(fit.probs[int(key) - 1])
        out *= 1.0 - p
        zeros = zeros + (0,)
    return out


def grid_points(m: int, n_upp: int, strategy: str = "coarse") -> list[int]:
    """Coarse grid from M to n_upp (always including both ends)."""
    if strategy not in GRID_STRATEGIES:
        raise ValueError(f"grid must be one of {GRID_STRATEGIES}")
    if strategy == "full":
        return list(range(m, n_upp + 1))
    stride = max(1, math.ceil((n_upp - m) / COARSE_STEPS))
    pts = list(range(m, n_upp + 1, stride))
    if pts[-1] != n_upp:
        pts.append(n_upp)
    return pts


def _stride(m: int, n_upp: int) -> int:
    return max(1, math.ceil((n_upp - m) / COARSE_STEPS))


def _evaluate(base: GroupedData, n: int) -> ProfilePoint:
    try:
        fit = irls_fit(base.at(n))
    except (ValueError, np.linalg.LinAlgError) as exc:
        return ProfilePoint(n, -math.inf, None, str(exc))
    return ProfilePoint(n, float(log_binom(n, base.m)) + fit.loglik, fit)


def _evaluate_many(base: GroupedData, ns, threads: int = 1) -> list[ProfilePoint]:
    ns = list(ns)
    if threads > 1 and len(ns) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda n: _evaluate(base, n), ns))
    return [_evaluate(base, n) for n in ns]


def profile(data: CaptureMatrix, design: Design, n_upp: int | None = None, grid: str = "coarse", threads: int = 1,
            base: GroupedData | None = None) -> list[ProfilePoint]:
    """Profile log-likelihood points sorted by n.

    ``grid="full"`` evaluates every integer; ``"coarse"`` evaluates a stride of
    ceil((n_upp - M) / 200) and then every integer within two strides of the
    coarse maximum.  Every point is fitted from the same cold start, so the
    result does not depend on ``threads``.
    """
    m = data.m
    n_upp = default_n_upp(m) if n_upp is None else int(n_upp)
    if n_upp < m:
        raise ValueError(f"n_upp={n_upp} is below M={m}")
    base = build_grouped(data, design, m) if base is None else base
    pts = _evaluate_many(base, grid_points(m, n_upp, grid), threads)
    if grid == "coarse":
        stride = _stride(m, n_upp)
        if stride > 1:
            best = _argmax(pts)
            centre = pts[best].n
            have = {p.n for p in pts}
            extra = [n for n in range(max(m, centre - 2 * stride), min(n_upp, centre + 2 * stride) + 1) if n not in have]
            pts = sorted(pts + _evaluate_many(base, extra, threads), key=lambda p: p.n)
    return pts


def _argmax(points) -> int:
    """First index of the maximum log-likelihood (ties go to the smaller n)."""
    vals = np.array([p.loglik for p in points])
    return int(np.argmax(vals))


def maximize(points: list[ProfilePoint], n_params: int, model: str = "", n_upp: int | None = None) -> FitResult:
    """Pick n-hat from a profile; AIC counts N among the parameters."""
    if not points:
        raise ValueError("empty profile")
    points = sorted(points, key=lambda p: p.n)
    best = _argmax(points)
    top = points[best]
    if not np.isfinite(top.loglik):
        raise ValueError(f"no profile point could be fitted: {points[0].error}")
    n_upp = points[-1].n if n_upp is None else n_upp
    return FitResult(
        model=model,
        n_hat=top.n,
        coefficients=[] if top.fit is None else list(top.fit.coefficients),
        p0=math.nan,
        loglik=top.loglik,
        aic=-2.0 * top.loglik + 2.0 * n_params,
        ci=(points[0].n, None),
        failure=top.n == points[-1].n and best == len(points) - 1,
        params=n_params,
        m=points[0].n,
        n_upp=n_upp,
        profile=points,
    )


def profile_ci(points: list[ProfilePoint], level: float = 0.95, failure: bool | None = None) -> tuple:
    """Likelihood-ratio interval {n : 2 (max - L(n)) <= chi2_1(level)} over the evaluated points.

    The upper end is ``None`` (open) under likelihood failure.
    """
    points = sorted(points, key=lambda p: p.n)
    vals = np.array([p.loglik for p in points])
    best = int(np.argmax(vals))
    inside = 2.0 * (vals[best] - vals) <= chi2_threshold(level)
    idx = np.flatnonzero(inside)
    lo = points[int(idx[0])].n
    hi = points[int(idx[-1])].n
    if failure is None:
        failure = best == len(points) - 1
    return lo, (None if failure else hi)


def _refine_ci(points, base: GroupedData, level: float, threads: int) -> list[ProfilePoint]:
    """Fill in every integer between the last evaluated point inside the interval and the first outside."""
    points = sorted(points, key=lambda p: p.n)
    vals = np.array([p.loglik for p in points])
    best = int(np.argmax(vals))
    inside = 2.0 * (vals[best] - vals) <= chi2_threshold(level)
    idx = np.flatnonzero(inside)
    have = {p.n for p in points}
    extra = []
    first, last = int(idx[0]), int(idx[-1])
    if first > 0:
        extra.extend(range(points[first - 1].n + 1, points[first].n))
    if last < len(points) - 1:
        extra.extend(range(points[last].n + 1, points[last + 1].n))
    extra = [n for n in extra if n not in have]
    if not extra:
        return points
    return sorted(points + _evaluate_many(base, extra, threads), key=lambda p: p.n)


def fit_model(data: CaptureMatrix, model: ModelSpec, n_upp: int | None = None, grid: str = "coarse",
              level: float = 0.95, threads: int = 1) -> FitResult:
    """Unconditional ML fit of one model: profile over N, argmax, profile CI and P0."""
    if model.kind == "cutsearch":
        from .selection import cut_search

        return cut_search(data, model.quantifier, model.n_cuts, n_upp=n_upp, grid=grid, level=level, threads=threads)[1]
    if data.m < 1:
        raise ValueError("no observed units")
    design = model.design(data.t)
    n_upp = default_n_upp(data.m) if n_upp is None else int(n_upp)
    base = build_grouped(data, design, data.m)
    points = profile(data, design, n_upp, grid, threads, base=base)
    if grid == "coarse":
        points = _refine_ci(points, base, level, threads)
    res = maximize(points, design.d + 1, model=model.label, n_upp=n_upp)
    res.ci = profile_ci(points, level, failure=res.failure)
    top = next(p for p in points if p.n == res.n_hat)
    res.p0 = p0(top.fit, design, data.t)
    if design.kind != "linear":
        res.class_probs = list(top.fit.probs)
    if design.kind == "factor" and design.partition.dropped:
        res.warnings.append(f"intervals {list(design.partition.dropped)} contain no partial history and were dropped")
    if top.fit.empty_cells:
        res.warnings.append(f"classes {list(top.fit.empty_cells)} have no observed trials")
    if top.fit.separation:
        res.warnings.append("boundary estimate or separation at n_hat")
    if not top.fit.converged:
        res.warnings.append("inner fit did not converge at n_hat")
    errors = [p for p in points if p.error]
    if errors:
        res.warnings.append(f"{len(errors)} profile points failed: {errors[0].error}")
    if res.failure:
        res.warnings.append("likelihood failure: profile still increasing at n_upp")
    return res
