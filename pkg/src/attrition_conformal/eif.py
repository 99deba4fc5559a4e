"""Influence-function evaluation and the smallest-threshold moment solver.

The two counterfactual influence functions and the extrapolation one share a
structure: a term that is constant in the threshold eta plus a nonnegative
weight times the indicator 1{score < eta}.  Their sample mean is therefore a
nondecreasing step function of eta with jumps exactly at the observed
scores, and the smallest root is found by scanning score values, each taken
as the infimum threshold strictly above it.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


def _vec(a, dtype=np.float64) -> np.ndarray:
    return np.asarray(a, dtype=dtype)


@dataclass(frozen=True)
class PsiCounterfactualInputs:
    """Per-row pieces of the counterfactual influence functions.

    ``v`` holds the nonconformity score, NaN off the source arm; ``m`` the
    localized conditional CDF held fixed at its initial threshold; ``e_r1``/
    ``e_r0`` the response propensities at both treatment values; ``pi_d``
    the treatment odds e_D / (1 - e_D).
    """

    d: np.ndarray
    r: np.ndarray
    v: np.ndarray
    m: np.ndarray
    e_r1: np.ndarray
    e_r0: np.ndarray
    pi_d: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "d", _vec(self.d))
        object.__setattr__(self, "r", _vec(self.r))
        object.__setattr__(self, "v", _vec(self.v))
        object.__setattr__(self, "m", _vec(self.m))
        object.__setattr__(self, "e_r1", _vec(self.e_r1))
        object.__setattr__(self, "e_r0", _vec(self.e_r0))
        object.__setattr__(self, "pi_d", _vec(self.pi_d))
        if np.any(self.pi_d <= 0):
            raise ValueError("treatment odds must be positive")


@dataclass(frozen=True)
class PsiExtrapolationInputs:
    """Per-row pieces of the extrapolation influence function.

    ``v`` is the interval nonconformity score, NaN on attrited rows; ``m``
    the localized conditional CDF at (x, d); ``pi_r`` the response odds
    e_R / (1 - e_R).
    """

    r: np.ndarray
    v: np.ndarray
    m: np.ndarray
    pi_r: np.ndarray
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "r", _vec(self.r))
        object.__setattr__(self, "v", _vec(self.v))
        object.__setattr__(self, "m", _vec(self.m))
        object.__setattr__(self, "pi_r", _vec(self.pi_r))
        if np.any(self.pi_r <= 0):
            raise ValueError("response odds must be positive")


def psi1_eval(inp: PsiCounterfactualInputs, eta: float) -> np.ndarray:
    """Influence function of the threshold calibrating intervals for Y(1)."""
    ind = np.less(inp.v, eta)  # NaN compares False; those rows carry zero weight
    first = inp.r * (1.0 - inp.d) * (inp.m - (1.0 - inp.alpha))
    weight = inp.d * inp.r * inp.e_r0 / (inp.pi_d * inp.e_r1)
    return first + weight * (ind - inp.m)


def psi0_eval(inp: PsiCounterfactualInputs, eta: float) -> np.ndarray:
    """Influence function of the threshold calibrating intervals for Y(0)."""
    ind = np.less(inp.v, eta)
    first = inp.r * inp.d * (inp.m - (1.0 - inp.alpha))
    weight = (1.0 - inp.d) * inp.r * inp.e_r1 * inp.pi_d / inp.e_r0
    return first + weight * (ind - inp.m)


def psiC_eval(inp: PsiExtrapolationInputs, eta: float) -> np.ndarray:
    """Influence function of the threshold extrapolating intervals to attrition."""
    ind = np.less(inp.v, eta)
    first = (1.0 - inp.r) * (inp.m - (1.0 - inp.gamma))
    return first + (inp.r / inp.pi_r) * (ind - inp.m)


def initial_eta(scores, level: float) -> float:
    """The ceil(level * (n + 1))-th order statistic, clamped to the maximum."""
    scores = _vec(scores)
    if scores.size == 0:
        raise ValueError("initial_eta needs at least one score")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    k = min(math.ceil(level * (scores.size + 1)), scores.size)
    return float(np.sort(scores)[k - 1])


@dataclass(frozen=True)
class EtaSolution:
    eta: float
    moment_value_at_eta: float
    candidates_scanned: int
    degenerate: bool


def solve_smallest_eta(inputs, psi, candidates) -> EtaSolution:
    """Smallest candidate threshold with nonnegative mean influence.

    Each finite candidate c is evaluated at eta = c+ (the next representable
    float), so the strict indicator counts scores <= c; the returned eta is
    the candidate value itself.  When no finite candidate reaches a
    nonnegative mean the solution is +inf with the degenerate flag set.
    """
    candidates = np.sort(_vec(candidates))
    if candidates.size and not np.isfinite(candidates).all():
        raise ValueError("candidates must be finite; +inf is appended internally")
    scanned = 0
    for c in candidates:
        scanned += 1
        moment = float(np.mean(psi(inputs, np.nextafter(c, math.inf))))
        if moment >= 0.0:
            return EtaSolution(eta=float(c), moment_value_at_eta=moment,
                               candidates_scanned=scanned, degenerate=False)
    moment = float(np.mean(psi(inputs, math.inf)))
    return EtaSolution(eta=math.inf, moment_value_at_eta=moment,
                       candidates_scanned=scanned + 1, degenerate=True)
