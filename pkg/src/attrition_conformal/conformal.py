"""Nonconformity scores and split conformal calibration, weighted and not."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .data import PredictionInterval
from .learners import LearnerSpec, fit_mean, fit_quantile_pair
from .rng import child_seed, make_rng

# Relative slack when comparing cumulative weights against the target level;
# absorbs float dust in normalized-weight sums without changing exact ties.
_CUM_EPS = 1e-12


def cqr_score(y, q_lo, q_hi):
    """CQR nonconformity: max(q_lo - y, y - q_hi); negative strictly inside."""
    y = np.asarray(y, dtype=np.float64)
    q_lo = np.asarray(q_lo, dtype=np.float64)
    q_hi = np.asarray(q_hi, dtype=np.float64)
    if np.any(q_lo > q_hi):
        raise ValueError("quantile pair out of order")
    out = np.maximum(q_lo - y, y - q_hi)
    return float(out) if out.ndim == 0 else out


def interval_score(c_lo, c_hi, h_lo, h_hi):
    """Interval nonconformity: max(h_lo - c_lo, c_hi - h_hi); <= 0 iff nested."""
    c_lo = np.asarray(c_lo, dtype=np.float64)
    c_hi = np.asarray(c_hi, dtype=np.float64)
    if np.any(c_lo > c_hi):
        raise ValueError("interval endpoints out of order")
    out = np.maximum(np.asarray(h_lo, dtype=np.float64) - c_lo,
                     c_hi - np.asarray(h_hi, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScoreSet:
    """Calibration scores with optional weights and the test point's weight mass.

    Empty ``weights`` selects the unweighted rule, where the test point
    contributes one extra unit mass.
    """

    scores: np.ndarray
    weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    test_weight: float = 1.0

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.size and weights.shape != scores.shape:
            raise ValueError("weights must match scores in length")
        if np.any(~np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if weights.size and (np.any(~np.isfinite(weights)) or np.any(weights < 0)):
            raise ValueError("weights must be finite and nonnegative")
        if not (self.test_weight >= 0):
            raise ValueError("test_weight must be nonnegative")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "weights", weights)


def unweighted_quantile(scores: np.ndarray, level: float) -> float:
    """The ceil(level * (n + 1))-th order statistic, or +inf past the sample."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if n == 0:
        return math.inf
    k = math.ceil(level * (n + 1))
    if k > n:
        return math.inf
    return float(np.sort(scores)[k - 1])


def weighted_quantile(ss: ScoreSet, level: float) -> float:
    """Quantile of the weighted score distribution with an infinity atom.

    Normalizes p_i = w_i / (sum w + test_weight) and puts the remaining mass
    p_inf at +inf; returns the smallest score whose cumulative mass reaches
    ``level``, or +inf when only the infinity atom does.  Ties take the
    smallest qualifying score.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    if ss.scores.size == 0:
        return math.inf
    if ss.weights.size == 0:
        return unweighted_quantile(ss.scores, level)
    order = np.argsort(ss.scores, kind="stable")
    total = float(ss.weights.sum()) + ss.test_weight
    if total <= 0:
        return math.inf
    cum = np.cumsum(ss.weights[order]) / total
    hit = np.flatnonzero(cum >= level - _CUM_EPS * max(1.0, abs(level)))
    if hit.size == 0:
        return math.inf
    return float(ss.scores[order][hit[0]])


@dataclass(frozen=True)
class CalibratedBand:
    """A conformal band: quantile predictions plus the calibration margin."""

    lo: np.ndarray
    hi: np.ndarray
    eta: np.ndarray
    uninformative: np.ndarray  # True where eta = +inf

    def intervals(self) -> list[PredictionInterval]:
        return [PredictionInterval(float(l), float(h)) for l, h in zip(self.lo, self.hi)]


def weighted_split_cqr_batch(train_x, train_y, cal_x, cal_y, x_test, level: float,
                             weight_fn, spec: LearnerSpec,
                             cap_at_max: bool = False) -> CalibratedBand:
    """Weighted split CQR for a batch of test points.

    Fits the (level/2, 1 - level/2) quantile pair on the proper training
    rows, scores the calibration rows, and calibrates each test point with
    the weighted score quantile at 1 - level, the test point entering as the
    infinity atom.  eta = +inf yields (-inf, +inf), flagged uninformative;
    with ``cap_at_max`` an unreachable quantile falls back to the largest
    calibration score instead (still flagged), trading the finite-sample
    guarantee for a finite, very wide interval.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    cal_x = np.atleast_2d(np.asarray(cal_x, dtype=np.float64))
    x_test = np.atleast_2d(np.asarray(x_test, dtype=np.float64))
    if train_x.shape[0] == 0 or cal_x.shape[0] == 0:
        raise ValueError("train and calibration sets must be non-empty")

    qp = fit_quantile_pair(train_x, train_y, level / 2.0, 1.0 - level / 2.0, spec)
    c_lo, c_hi = qp.predict(cal_x)
    scores = cqr_score(np.asarray(cal_y, dtype=np.float64), c_lo, c_hi)

    w_cal = np.asarray(weight_fn(cal_x), dtype=np.float64)
    w_test = np.asarray(weight_fn(x_test), dtype=np.float64)
    if np.any(~np.isfinite(w_cal)) or np.any(w_cal <= 0) or np.any(~np.isfinite(w_test)) or np.any(w_test <= 0):
        raise ValueError("weight_fn must be finite and positive")

    t_lo, t_hi = qp.predict(x_test)
    m = x_test.shape[0]
    eta = np.empty(m)
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    cum_w = np.cumsum(w_cal[order])
    total_cal = cum_w[-1]
    for i in range(m):
        # same rule as weighted_quantile, with only the infinity atom varying
        total = total_cal + w_test[i]
        target = (1.0 - level) * total
        hit = np.searchsorted(cum_w, target - _CUM_EPS * total, side="left")
        eta[i] = sorted_scores[hit] if hit < sorted_scores.size else math.inf
    uninformative = ~np.isfinite(eta)
    if cap_at_max:
        eta = np.where(uninformative, sorted_scores[-1], eta)
        lo = t_lo - eta
        hi = t_hi + eta
    else:
        lo = np.where(uninformative, -math.inf, t_lo - eta)
        hi = np.where(uninformative, math.inf, t_hi + eta)
    return CalibratedBand(lo=lo, hi=hi, eta=eta, uninformative=uninformative)


def weighted_split_cqr(train_x, train_y, cal_x, cal_y, x_test, level: float,
                       weight_fn, spec: LearnerSpec) -> PredictionInterval:
    """Single-point weighted split CQR; see :func:`weighted_split_cqr_batch`."""
    band = weighted_split_cqr_batch(train_x, train_y, cal_x, cal_y,
                                    np.atleast_2d(x_test), level, weight_fn, spec)
    return PredictionInterval(float(band.lo[0]), float(band.hi[0]))


def unweighted_interval_conformal_batch(obs_x, obs_lo, obs_hi, x_test, gamma: float,
                                        spec: LearnerSpec, seed: int = 0) -> CalibratedBand:
    """Conformal inference for interval outcomes (unweighted) at many points.

    Splits the observed (x, interval) rows in half, fits endpoint mean models
    on the first part, scores the second with the interval nonconformity, and
    expands by the ceil((1 - gamma)(n_cal + 1))-th order statistic.
    """
    obs_x = np.atleast_2d(np.asarray(obs_x, dtype=np.float64))
    obs_lo = np.asarray(obs_lo, dtype=np.float64)
    obs_hi = np.asarray(obs_hi, dtype=np.float64)
    x_test = np.atleast_2d(np.asarray(x_test, dtype=np.float64))
    n = obs_x.shape[0]
    if n < 4:
        raise ValueError("interval conformal needs at least 4 observed rows")

    rng = make_rng(child_seed(seed, 0))
    order = rng.permutation(n)
    n_tr = n // 2
    tr, ca = order[:n_tr], order[n_tr:]

    h_lo = fit_mean(obs_x[tr], obs_lo[tr], spec)
    h_hi = fit_mean(obs_x[tr], obs_hi[tr], spec)
    scores = interval_score(obs_lo[ca], obs_hi[ca], h_lo.predict(obs_x[ca]),
                            h_hi.predict(obs_x[ca]))
    eta = unweighted_quantile(scores, 1.0 - gamma)

    t_lo = h_lo.predict(x_test)
    t_hi = h_hi.predict(x_test)
    m = x_test.shape[0]
    etas = np.full(m, eta)
    uninformative = ~np.isfinite(etas)
    lo = np.where(uninformative, -math.inf, t_lo - eta)
    hi = np.where(uninformative, math.inf, t_hi + eta)
    return CalibratedBand(lo=lo, hi=hi, eta=etas, uninformative=uninformative)


def unweighted_interval_conformal(obs_x, obs_lo, obs_hi, x_test, gamma: float,
                                  spec: LearnerSpec, seed: int = 0) -> PredictionInterval:
    """Single-point variant of :func:`unweighted_interval_conformal_batch`."""
    band = unweighted_interval_conformal_batch(obs_x, obs_lo, obs_hi,
                                               np.atleast_2d(x_test), gamma, spec, seed)
    return PredictionInterval(float(band.lo[0]), float(band.hi[0]))
