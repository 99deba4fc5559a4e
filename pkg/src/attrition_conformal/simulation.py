"""Synthetic data generators, oracle intervals, and the Monte Carlo harness."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.special import betainc, expit, ndtr, ndtri

from .data import ConformalConfig, ExperimentDataset
from .learners import RoleSpecs
from .pipelines import CiseResult, run_cise, wcqr_nested_baseline
from .rng import child_seed, make_rng

DGP1 = "dgp1"
DGP2 = "dgp2"
DGP_APPENDIX_E = "appendixE"
_KINDS = (DGP1, DGP2, DGP_APPENDIX_E)

METHODS = ("cise", "wcqr_nested_exact", "wcqr_nested_inexact")


@dataclass(frozen=True)
class DgpSpec:
    kind: str
    n: int
    rho: float = 0.0
    missingness: str = "MAR"  # appendixE only; MCAR keeps each row with p = 0.8
    seed: int = 0
    k: int = 0  # 0 -> the DGP's own dimension (10, 10, 5)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown DGP kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("rho must lie in [0, 1)")
        if self.missingness not in ("MAR", "MCAR"):
            raise ValueError("missingness must be MAR or MCAR")
        if self.kind != DGP_APPENDIX_E and self.missingness != "MAR":
            raise ValueError("MCAR missingness applies to the appendixE DGP only")
        if self.kind == DGP_APPENDIX_E and self.rho != 0.0:
            raise ValueError("the appendixE DGP has independent covariates")
        if self.k == 0:
            object.__setattr__(self, "k", 5 if self.kind == DGP_APPENDIX_E else 10)
        if self.k < 2:
            raise ValueError("need at least two covariates")


@dataclass(frozen=True)
class SimulatedDraw:
    """A dataset plus hidden truths; estimation code only ever sees .dataset."""

    dataset: ExperimentDataset
    y1: np.ndarray
    y0: np.ndarray
    ite: np.ndarray
    cate: np.ndarray
    e_d: np.ndarray
    e_r: np.ndarray  # at the assigned treatment


def _equicorrelated_gaussian(rng: np.random.Generator, n: int, k: int, rho: float) -> np.ndarray:
    """Shared-factor construction: X_j = sqrt(rho) Z0 + sqrt(1 - rho) Z_j."""
    z0 = rng.standard_normal(n)
    z = rng.standard_normal((n, k))
    return math.sqrt(rho) * z0[:, None] + math.sqrt(1.0 - rho) * z


def _assemble(x, y1, y0, cate, e_d, e_r_fn, rng) -> SimulatedDraw:
    n = x.shape[0]
    d = (rng.random(n) < e_d).astype(np.int64)
    e_r = e_r_fn(x, d)
    r = (rng.random(n) < e_r).astype(np.int64)
    y_obs = np.where(d == 1, y1, y0)
    y = np.where(r == 1, y_obs, np.nan)
    ds = ExperimentDataset(x=x, d=d, r=r, y=y)
    return SimulatedDraw(dataset=ds, y1=y1, y0=y0, ite=y1 - y0, cate=cate,
                         e_d=e_d, e_r=e_r)


def dgp1_f(x):
    return 2.0 / (1.0 + np.exp(-12.0 * (np.asarray(x, dtype=np.float64) - 0.5)))


def dgp1_cate(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return dgp1_f(x[:, 0]) * dgp1_f(x[:, 1])


def dgp1_e_d(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    t = np.clip(x[:, 0], 0.0, 1.0)
    return 0.25 * (1.0 + betainc(2.0, 4.0, t))


def dgp1_e_r(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return expit(-0.25 + 0.5 * np.asarray(d) + 0.2 * x[:, 0] - 0.3 * x[:, 1])


def gen_dgp1(spec: DgpSpec) -> SimulatedDraw:
    """Logistic-bump outcome surface, beta-CDF treatment propensity, MAR attrition."""
    if spec.kind != DGP1:
        raise ValueError("spec.kind must be dgp1")
    rng = make_rng(spec.seed)
    x = _equicorrelated_gaussian(rng, spec.n, spec.k, spec.rho)
    eps1 = rng.standard_normal(spec.n)
    eps0 = rng.standard_normal(spec.n)
    cate = dgp1_cate(x)
    return _assemble(x, cate + eps1, eps0, cate, dgp1_e_d(x), dgp1_e_r, rng)


def dgp2_cate(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return x[:, 0] ** 2 + 0.2 * x[:, 1] + 0.8 * np.exp(x[:, 3])


def dgp2_e_d(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return expit(-0.5 * x[:, 0] - 0.3 * x[:, 1] + 0.2 * x[:, 2])


def dgp2_e_r(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return expit(-1.0 + 0.3 * np.asarray(d) + 0.5 * x[:, 0] - 0.4 * x[:, 1])


def gen_dgp2(spec: DgpSpec) -> SimulatedDraw:
    """Curved outcome surface with a shared softplus-reciprocal baseline term."""
    if spec.kind != DGP2:
        raise ValueError("spec.kind must be dgp2")
    rng = make_rng(spec.seed)
    x = _equicorrelated_gaussian(rng, spec.n, spec.k, spec.rho)
    eps1 = rng.standard_normal(spec.n)
    eps0 = rng.standard_normal(spec.n)
    base = 1.0 / np.log1p(np.exp(x[:, 2]))
    cate = dgp2_cate(x)
    return _assemble(x, base + cate + eps1, base + eps0, cate, dgp2_e_d(x), dgp2_e_r, rng)


def appendix_e_cate(x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(x).sum(axis=1)


def appendix_e_e_d(x: np.ndarray) -> np.ndarray:
    return ndtr(np.atleast_2d(x)[:, 0])


def appendix_e_e_r(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return expit(-0.2 + 0.5 * np.asarray(d) + 0.2 * x[:, 0] - 0.3 * x[:, 1])


def gen_dgp_appendix_e(spec: DgpSpec) -> SimulatedDraw:
    """Linear outcome in all covariates, probit treatment, MCAR or MAR attrition."""
    if spec.kind != DGP_APPENDIX_E:
        raise ValueError("spec.kind must be appendixE")
    rng = make_rng(spec.seed)
    x = rng.standard_normal((spec.n, spec.k))
    eps1 = rng.standard_normal(spec.n)
    eps0 = rng.standard_normal(spec.n)
    cate = appendix_e_cate(x)
    if spec.missingness == "MCAR":
        def e_r_fn(x_, d_):
            return np.full(x_.shape[0], 0.8)
    else:
        e_r_fn = appendix_e_e_r
    return _assemble(x, cate + eps1, eps0, cate, appendix_e_e_d(x), e_r_fn, rng)


def generate(spec: DgpSpec) -> SimulatedDraw:
    if spec.kind == DGP1:
        return gen_dgp1(spec)
    if spec.kind == DGP2:
        return gen_dgp2(spec)
    return gen_dgp_appendix_e(spec)


def oracle_interval(draw: SimulatedDraw, level: float) -> tuple[np.ndarray, np.ndarray, float]:
    """True conditional intervals for the ITE under the homoskedastic N(0,1)
    noise pair: CATE +- z_{1-level/2} * sqrt(2).  Returns (lo, hi, length)."""
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    z = ndtri(1.0 - level / 2.0)
    half = z * math.sqrt(2.0)
    return draw.cate - half, draw.cate + half, 2.0 * half


@dataclass(frozen=True)
class MetricResult:
    coverage: float
    avg_length: float
    infinite_count: int


def compute_metrics(lo, hi, truths) -> MetricResult:
    """Empirical coverage and average length; infinite-length intervals count
    as covering and push the average length to +inf (reported as a count)."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if lo.size == 0 or lo.shape != hi.shape or lo.shape != truths.shape:
        raise ValueError("intervals and truths must align and be non-empty")
    lengths = hi - lo
    infinite = ~np.isfinite(lengths)
    covered = np.where(infinite, True, (lo <= truths) & (truths <= hi))
    return MetricResult(coverage=float(covered.mean()),
                        avg_length=float(lengths.mean()) if not infinite.any() else math.inf,
                        infinite_count=int(infinite.sum()))


@dataclass(frozen=True)
class RepRecord:
    rep: int
    coverage: float | None = None
    avg_length: float | None = None
    infinite_count: int | None = None
    ate_r1: float | None = None
    ate_attrition: float | None = None
    n_attrition: int | None = None
    error: str | None = None


@dataclass
class McReport:
    dgp: DgpSpec
    method: str
    cfg: ConformalConfig
    learner: str
    reps: list
    mean_coverage: float | None
    sd_coverage: float | None
    mean_length: float | None
    sd_length: float | None
    mean_ate_r1: float | None
    mean_ate_attrition: float | None
    n_failed: int
    wall_time: float = field(default=0.0, compare=False)


def _diff_in_means(ds: ExperimentDataset) -> float:
    obs = np.flatnonzero(ds.r == 1)
    y = ds.y[obs]
    d = ds.d[obs]
    return float(y[d == 1].mean() - y[d == 0].mean())


def run_method(ds: ExperimentDataset, method: str, cfg: ConformalConfig,
               specs: RoleSpecs) -> CiseResult:
    if method == "cise":
        return run_cise(ds, cfg, specs)
    if method == "wcqr_nested_exact":
        return wcqr_nested_baseline(ds, cfg, specs, exact=True)
    if method == "wcqr_nested_inexact":
        return wcqr_nested_baseline(ds, cfg, specs, exact=False)
    raise ValueError(f"unknown method {method!r}")


def _run_one_rep(args) -> RepRecord:
    dgp, method, cfg, specs, learner, rep = args
    try:
        draw = generate(replace(dgp, seed=child_seed(dgp.seed, rep)))
        cfg_rep = replace(cfg, seed=child_seed(cfg.seed, rep))
        result = run_method(draw.dataset, method, cfg_rep, specs.reseed(child_seed(cfg.seed, 10_000 + rep)))
        att = result.att_idx
        if att.size == 0:
            return RepRecord(rep=rep, error="no attrition rows in draw")
        metrics = compute_metrics(result.che_lo, result.che_hi, draw.ite[att])
        finite = np.isfinite(result.che_lo) & np.isfinite(result.che_hi)
        mid = 0.5 * (result.che_lo[finite] + result.che_hi[finite])
        ate_att = float(mid.mean()) if finite.any() else None
        return RepRecord(rep=rep, coverage=metrics.coverage,
                         avg_length=metrics.avg_length,
                         infinite_count=metrics.infinite_count,
                         ate_r1=_diff_in_means(draw.dataset),
                         ate_attrition=ate_att, n_attrition=int(att.size))
    except Exception as exc:  # recorded per rep; the harness enforces the budget
        return RepRecord(rep=rep, error=f"{type(exc).__name__}: {exc}")


def _mean_sd(values: list) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    if any(math.isinf(v) for v in vals):
        return math.inf, None
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
    return mean, sd


def run_mc(dgp: DgpSpec, method: str, cfg: ConformalConfig, specs: RoleSpecs,
           reps: int, learner: str = "", workers: int = 1) -> McReport:
    """Monte Carlo replications with per-rep derived seeds.

    Failed replicates are recorded with their error and excluded from the
    aggregates; more than 20% failures aborts the run.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    start = time.time()
    payloads = [(dgp, method, cfg, specs, learner, rep) for rep in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one_rep, payloads))
    else:
        records = [_run_one_rep(p) for p in payloads]
    records.sort(key=lambda r: r.rep)

    n_failed = sum(1 for r in records if r.error is not None)
    if n_failed > 0.2 * reps:
        errors = [r.error for r in records if r.error is not None][:3]
        raise RuntimeError(f"{n_failed}/{reps} replicates failed; first errors: {errors}")

    mean_cov, sd_cov = _mean_sd([r.coverage for r in records])
    mean_len, sd_len = _mean_sd([r.avg_length for r in records])
    mean_ate_r1, _ = _mean_sd([r.ate_r1 for r in records])
    mean_ate_att, _ = _mean_sd([r.ate_attrition for r in records])
    return McReport(dgp=dgp, method=method, cfg=cfg, learner=learner, reps=records,
                    mean_coverage=mean_cov, sd_coverage=sd_cov,
                    mean_length=mean_len, sd_length=sd_len,
                    mean_ate_r1=mean_ate_r1, mean_ate_attrition=mean_ate_att,
                    n_failed=n_failed, wall_time=time.time() - start)
