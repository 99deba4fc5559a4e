"""Core data types: experiment datasets, intervals, configuration, splits."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .rng import child_seed, make_rng


class DataValidationError(ValueError):
    """Structural problem in input data (exit code 3 at the CLI)."""


class InsufficientDataError(ValueError):
    """Not enough rows to honor a split plan or a fitting precondition."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ExperimentDataset:
    """Rows of (covariates x, treatment d, response r, outcome y observed iff r=1).

    ``y`` is NaN exactly where ``r == 0``.  Arrays are frozen after
    construction and safe to share across parallel workers.
    """

    x: np.ndarray
    d: np.ndarray
    r: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_readonly(np.asarray(self.x, dtype=np.float64))
        d = _as_readonly(np.asarray(self.d, dtype=np.int64))
        r = _as_readonly(np.asarray(self.r, dtype=np.int64))
        y = _as_readonly(np.asarray(self.y, dtype=np.float64))
        if x.ndim != 2:
            raise DataValidationError("covariates must be a 2-d matrix")
        n, k = x.shape
        if n < 1 or k < 1:
            raise DataValidationError("need at least one row and one covariate column")
        if not (d.shape == r.shape == y.shape == (n,)):
            raise DataValidationError("d, r, y must be vectors of length n")
        if not np.isfinite(x).all():
            raise DataValidationError("non-finite covariate values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class PredictionInterval:
    """Closed interval [lo, hi]; an infinite endpoint marks an uninformative side."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class ConformalConfig:
    """Miscoverage budgets, quantile levels, split fractions and solver knobs.

    ``q_lo_level``/``q_hi_level`` are the conditional-quantile levels of the
    counterfactual step (default alpha/2, 1 - alpha/2); ``g_lo_level``/
    ``g_hi_level`` the endpoint-quantile levels used by the inexact nested
    baseline (default gamma/2, 1 - gamma/2).
    """

    alpha: float = 0.025
    gamma: float = 0.025
    q_lo_level: float | None = None
    q_hi_level: float | None = None
    g_lo_level: float | None = None
    g_hi_level: float | None = None
    pretrain_frac: float = 0.20
    train_frac_of_rest: float = 0.75
    step2_train_frac: float = 0.50
    propensity_clip: float = 0.01
    step2_use_treatment: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 and 0.0 < self.gamma < 1.0):
            raise ValueError("alpha and gamma must lie in (0, 1)")
        if self.alpha + self.gamma >= 1.0:
            raise ValueError("alpha + gamma must be < 1")
        for name in ("pretrain_frac", "train_frac_of_rest", "step2_train_frac"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1)")
        if not (0.0 < self.propensity_clip < 0.5):
            raise ValueError("propensity_clip must lie in (0, 0.5)")
        if self.q_lo_level is None:
            object.__setattr__(self, "q_lo_level", self.alpha / 2.0)
        if self.q_hi_level is None:
            object.__setattr__(self, "q_hi_level", 1.0 - self.alpha / 2.0)
        if self.g_lo_level is None:
            object.__setattr__(self, "g_lo_level", self.gamma / 2.0)
        if self.g_hi_level is None:
            object.__setattr__(self, "g_hi_level", 1.0 - self.gamma / 2.0)
        if not (0.0 < self.q_lo_level < self.q_hi_level < 1.0):
            raise ValueError("counterfactual quantile levels out of order")
        if not (0.0 < self.g_lo_level < self.g_hi_level < 1.0):
            raise ValueError("extrapolation quantile levels out of order")


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint row-index sets for the two conformal steps.

    ``pretrain``/``train1``/``train2``/``calibration`` partition all rows;
    ``step2_train``/``step2_cal`` partition the calibration rows with r = 1.
    """

    pretrain: np.ndarray
    train1: np.ndarray
    train2: np.ndarray
    calibration: np.ndarray
    step2_train: np.ndarray
    step2_cal: np.ndarray

    def __post_init__(self):
        for name in ("pretrain", "train1", "train2", "calibration", "step2_train", "step2_cal"):
            object.__setattr__(self, name, _as_readonly(np.asarray(getattr(self, name), dtype=np.int64)))


@dataclass(frozen=True)
class ValidationReport:
    n: int
    cell_counts: dict
    warnings: tuple


def validate_dataset(ds: ExperimentDataset, require_both_arms: bool = False) -> ValidationReport:
    """Check the observation pattern and Table-1 structure of a dataset.

    Structural violations (y present with r=0, y missing with r=1, non-binary
    d/r) raise :class:`DataValidationError`; empty (d, r) cells are reported
    as warnings.
    """
    bad_d = ~np.isin(ds.d, (0, 1))
    bad_r = ~np.isin(ds.r, (0, 1))
    if bad_d.any():
        raise DataValidationError(f"non-binary treatment at rows {np.flatnonzero(bad_d)[:5].tolist()}")
    if bad_r.any():
        raise DataValidationError(f"non-binary response at rows {np.flatnonzero(bad_r)[:5].tolist()}")
    y_present = ~np.isnan(ds.y)
    extra = y_present & (ds.r == 0)
    missing = ~y_present & (ds.r == 1)
    if extra.any():
        raise DataValidationError(f"outcome present on attrited rows {np.flatnonzero(extra)[:5].tolist()}")
    if missing.any():
        raise DataValidationError(f"outcome missing on responding rows {np.flatnonzero(missing)[:5].tolist()}")
    counts = {}
    warnings = []
    for d in (0, 1):
        for r in (0, 1):
            counts[(d, r)] = int(np.sum((ds.d == d) & (ds.r == r)))
    # only empty observed-arm cells block inference; an empty attrition
    # group is a legitimate dataset
    for d in (0, 1):
        if counts[(d, 1)] == 0:
            warnings.append(f"no D={d},R=1 cell")
    if require_both_arms:
        if counts[(0, 1)] == 0 or counts[(1, 1)] == 0:
            raise DataValidationError("counterfactual inference needs both treatment arms among r=1 rows")
    return ValidationReport(n=ds.n, cell_counts=counts, warnings=tuple(warnings))


def make_splits(n_rows: int, r_flags: np.ndarray, cfg: ConformalConfig) -> SplitPlan:
    """Seeded uniform shuffle, then contiguous slices into the spec'd folds.

    Fold sizes are rounded fractions: pretrain ``pretrain_frac`` of all rows,
    training ``train_frac_of_rest`` of the remainder (halved into train1 and
    train2), the rest calibration.  Step-2 folds halve the calibration rows
    with r = 1.  Deterministic given ``cfg.seed``.
    """
    if n_rows < 8:
        raise InsufficientDataError("insufficient data for split plan (need at least 8 rows)")
    r_flags = np.asarray(r_flags, dtype=np.int64)
    if r_flags.shape != (n_rows,):
        raise ValueError("r_flags must have length n_rows")

    rng = make_rng(child_seed(cfg.seed, 0))
    order = rng.permutation(n_rows)

    n_pr = int(round(cfg.pretrain_frac * n_rows))
    rest = n_rows - n_pr
    n_tr = int(round(cfg.train_frac_of_rest * rest))
    n_tr1 = n_tr // 2
    pretrain = order[:n_pr]
    train1 = order[n_pr:n_pr + n_tr1]
    train2 = order[n_pr + n_tr1:n_pr + n_tr]
    calibration = order[n_pr + n_tr:]
    for name, fold in (("pretrain", pretrain), ("train1", train1),
                       ("train2", train2), ("calibration", calibration)):
        if fold.size == 0:
            raise InsufficientDataError(f"insufficient data for split plan (empty {name} fold)")

    cal_obs = calibration[r_flags[calibration] == 1]
    rng2 = make_rng(child_seed(cfg.seed, 1))
    cal_obs = cal_obs[rng2.permutation(cal_obs.size)]
    n_s2tr = int(round(cfg.step2_train_frac * cal_obs.size))
    step2_train = cal_obs[:n_s2tr]
    step2_cal = cal_obs[n_s2tr:]

    return SplitPlan(pretrain=pretrain, train1=train1, train2=train2,
                     calibration=calibration, step2_train=step2_train, step2_cal=step2_cal)
