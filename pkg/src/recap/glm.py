"""Weighted-binomial logistic regression on grouped capture data.

Every Bernoulli trial x_ij (including the all-zero rows of the N - M units
never seen) is assigned to a cell by its design key: the exact covariate value
for linear designs, the partition class for factor designs, the occasion for
the time design.  Log-likelihoods are plain Bernoulli sums, so grouping is an
exact identity; the binomial coefficient C(N, M) is added in ``likelihood``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, log_expit, logit, xlogy

from .histories import CaptureMatrix, Quantifier
from .partitions import Partition

__all__ = [
    "Design",
    "GroupedData",
    "GlmFit",
    "DegenerateDesignError",
    "build_grouped",
    "irls_fit",
    "loglik",
    "bernoulli_loglik",
]

SEPARATION_LIMIT = 30.0
PROB_FLOOR = 1e-12
MAX_ITER = 100
MAX_HALVINGS = 20
COEF_TOL = 1e-10
LOGLIK_RTOL = 1e-12

DESIGN_KINDS = ("constant", "linear", "factor", "time")


class DegenerateDesignError(ValueError):
    """Design columns are collinear over the cells that carry trials."""


@dataclass(frozen=True, eq=False)
class Design:
    kind: str
    t: int
    quantifier: Quantifier | None = None
    partition: Partition | None = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.kind == "linear":
            if self.quantifier is None:
                raise ValueError("linear design needs a quantifier")
            object.__setattr__(self, "quantifier", self.quantifier.with_t(self.t))
        if self.kind == "factor":
            if self.partition is None:
                raise ValueError("factor design needs a partition")
            if self.partition.t != self.t:
                raise ValueError("partition was built for a different t")

    @property
    def d(self) -> int:
        if self.kind == "constant":
            return 1
        if self.kind == "linear":
            return 2
        if self.kind == "factor":
            return self.partition.n_classes
        return self.t

    @property
    def closed_form(self) -> bool:
        return self.kind != "linear"

    def key(self, history: tuple, f: int, ones: int) -> object:
        """Cell key of the trial at occasion ``len(history) + 1``."""
        if self.kind == "constant":
            return 1
        if self.kind == "linear":
            return self.quantifier.from_stats(f, ones, len(history))
        if self.kind == "factor":
            return self.partition.class_of(history)
        return len(history) + 1

    def row(self, key) -> np.ndarray:
        if self.kind == "linear":
            return np.array([1.0, float(key)])
        out = np.zeros(self.d)
        out[int(key) - 1 if self.kind != "constant" else 0] = 1.0
        return out

    def all_keys(self) -> list | None:
        """Fixed key set for closed-form designs (None for linear)."""
        if self.kind == "linear":
            return None
        return list(range(1, self.d + 1))


@dataclass(frozen=True, eq=False)
class GroupedData:
    """Cells of Bernoulli trials at a given population size ``n_total``.

    ``trials = observed_trials + (n_total - m) * unobserved_per_unit``; only the
    cells that contain all-zero conditioning histories have a nonzero
    ``unobserved_per_unit``.
    """

    design: Design
    keys: tuple
    successes: np.ndarray
    observed_trials: np.ndarray
    unobserved_per_unit: np.ndarray
    m: int
    n_total: int
    X: np.ndarray = field(repr=False)

    @property
    def trials(self) -> np.ndarray:
        return self.observed_trials + (self.n_total - self.m) * self.unobserved_per_unit

    def at(self, n_total: int) -> "GroupedData":
        if n_total < self.m:
            raise ValueError(f"n_total={n_total} is smaller than M={self.m}")
        return replace(self, n_total=int(n_total))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "successes", "trials"])
        for key, s, n in zip(self.keys, self.successes, self.trials):
            w.writerow([str(key), int(s), int(n)])
        return buf.getvalue()


def build_grouped(data: CaptureMatrix, design: Design, n_total: int | None = None) -> GroupedData:
    """Group the ``n_total * t`` Bernoulli trials by design key."""
    n_total = data.m if n_total is None else int(n_total)
    if n_total < data.m:
        raise ValueError(f"n_total={n_total} is smaller than the number of observed units M={data.m}")
    if design.t != data.t:
        raise ValueError(f"design built for t={design.t}, data has t={data.t}")
    succ: dict = {}
    obs: dict = {}
    for row in data.rows():
        f = ones = 0
        for j, b in enumerate(row):
            key = design.key(row[:j], f, ones)
            succ[key] = succ.get(key, 0) + b
            obs[key] = obs.get(key, 0) + 1
            f += b << j
            ones += b
    unobs: dict = {}
    zeros: tuple = ()
    for j in range(data.t):
        key = design.key(zeros, 0, 0)
        unobs[key] = unobs.get(key, 0) + 1
        zeros = zeros + (0,)
    keys = design.all_keys()
    if keys is None:
        keys = sorted(set(obs) | set(unobs))
    keys = tuple(keys)
    X = np.array([design.row(k) for k in keys], dtype=float).reshape(len(keys), design.d)
    return GroupedData(
        design=design,
        keys=keys,
        successes=np.array([succ.get(k, 0) for k in keys], dtype=float),
        observed_trials=np.array([obs.get(k, 0) for k in keys], dtype=float),
        unobserved_per_unit=np.array([unobs.get(k, 0) for k in keys], dtype=float),
        m=data.m,
        n_total=n_total,
        X=X,
    )


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray
    loglik: float
    converged: bool
    separation: bool
    probs: np.ndarray
    iterations: int = 0
    empty_cells: tuple = ()

    def class_probs(self) -> np.ndarray:
        return self.probs


def bernoulli_loglik(successes, trials, probs) -> float:
    """sum s log p + (n - s) log(1 - p), with 0 log 0 = 0."""
    s = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    p = np.asarray(probs, dtype=float)
    return float(np.sum(xlogy(s, p) + xlogy(n - s, 1.0 - p)))


def _eta_loglik(X, s, n, beta) -> float:
    eta = X @ beta
    return float(np.sum(s * log_expit(eta) + (n - s) * log_expit(-eta)))


def _closed_form(data: GroupedData) -> GlmFit:
    s = data.successes
    n = data.trials
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(n > 0, s / np.where(n > 0, n, 1.0), 0.0)
    empty = tuple(k for k, nn in zip(data.keys, n) if nn == 0)
    boundary = bool(np.any((n > 0) & ((s == 0) | (s == n))))
    return GlmFit(
        coefficients=logit(np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)),
        loglik=bernoulli_loglik(s, n, p),
        converged=True,
        separation=boundary,
        probs=p,
        empty_cells=empty,
    )


def _irls(X, s, n, beta0=None):
    d = X.shape[1]
    if beta0 is None:
        rate = np.clip(s.sum() / n.sum(), 1e-6, 1 - 1e-6)
        beta = np.zeros(d)
        beta[0] = logit(rate)
    else:
        beta = np.array(beta0, dtype=float)
    ll = _eta_loglik(X, s, n, beta)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        p = expit(X @ beta)
        w = n * p * (1.0 - p)
        grad = X.T @ (s - n * p)
        hess = X.T @ (w[:, None] * X)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        new = beta + step
        new_ll = _eta_loglik(X, s, n, new)
        halvings = 0
        while (not np.isfinite(new_ll) or new_ll < ll) and halvings < MAX_HALVINGS:
            step = step / 2.0
            new = beta + step
            new_ll = _eta_loglik(X, s, n, new)
            halvings += 1
        if not np.isfinite(new_ll) or new_ll < ll:
            break
        change = np.max(np.abs(new - beta))
        rel = abs(new_ll - ll) / max(abs(ll), 1e-300)
        beta, ll = new, new_ll
        if change < COEF_TOL or rel < LOGLIK_RTOL:
            converged = True
            break
    return beta, ll, converged, it


def irls_fit(data: GroupedData, design: Design | None = None, start=None) -> GlmFit:
    """Maximize the grouped Bernoulli log-likelihood.

    Closed-form designs (constant, factor, time) return ``p_b = s_b / n_b``.
    Linear designs run Newton/IRLS on internally rescaled columns.  Never raises
    for non-convergence; raises :class:`DegenerateDesignError` for collinear
    columns.
    """
    design = design or data.design
    if design.closed_form:
        return _closed_form(data)
    n = data.trials
    live = n > 0
    X = data.X[live]
    s = data.successes[live]
    n = n[live]
    if X.shape[0] == 0 or np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateDesignError("covariate takes a single value over the observed trials")
    scale = np.max(np.abs(X), axis=0)
    scale[scale == 0] = 1.0
    start_scaled = None if start is None else np.asarray(start) * scale
    beta_s, ll, converged, it = _irls(X / scale, s, n, start_scaled)
    beta = beta_s / scale
    probs = expit(data.X @ beta)
    return GlmFit(
        coefficients=beta,
        loglik=ll,
        converged=converged,
        separation=bool(np.any(np.abs(beta) > SEPARATION_LIMIT)),
        probs=probs,
        iterations=it,
    )


def loglik(fit: GlmFit, data: GroupedData) -> float:
    """Bernoulli log-likelihood of ``data`` under ``fit``'s cell probabilities."""
    if data.design.closed_form:
        return bernoulli_loglik(data.successes, data.trials, fit.probs)
    return _eta_loglik(data.X, data.successes, data.trials, fit.coefficients)
