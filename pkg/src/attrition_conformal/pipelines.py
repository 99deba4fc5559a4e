"""End-to-end interval pipelines: the two-step EIF method, the weighted-CQR
nested baseline, IPW for the observed group, and ATE aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .conformal import (cqr_score, interval_score, unweighted_quantile,
                        weighted_split_cqr_batch)
from .data import (ConformalConfig, DataValidationError, ExperimentDataset,
                   InsufficientDataError, SplitPlan, make_splits, validate_dataset)
from .eif import (PsiCounterfactualInputs, PsiExtrapolationInputs, initial_eta,
                  psi0_eval, psi1_eval, psiC_eval, solve_smallest_eta)
from .learners import (MeanModel, ProbabilityModel, RoleSpecs,
                       fit_conditional_cdf, fit_mean, fit_propensity,
                       fit_quantile, fit_quantile_pair)
from .rng import child_seed, make_rng


def _with_treatment(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    return np.column_stack([x, d.astype(np.float64)])


def _role_seed(cfg_seed: int, role: int) -> int:
    return child_seed(cfg_seed, 1000 + role)


@dataclass
class Step1State:
    """Everything produced by the counterfactual step of the two-step method."""

    cfg: ConformalConfig
    q_models: dict
    e_d_model: ProbabilityModel
    e_r_model: ProbabilityModel
    eta_init: dict
    eta_solutions: dict
    cal_obs_idx: np.ndarray    # calibration rows with r = 1, original indices
    c_cf_lo: np.ndarray        # counterfactual-arm interval per such row
    c_cf_hi: np.ndarray
    c_ite_lo: np.ndarray       # ITE interval per such row
    c_ite_hi: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def eta_hat(self) -> dict:
        return {arm: sol.eta for arm, sol in self.eta_solutions.items()}


@dataclass
class CiseResult:
    """Output of a full pipeline run: step-1 intervals, thresholds, and the
    extrapolated attrition-group intervals with their expansion models."""

    cal_obs_idx: np.ndarray
    c_cf_lo: np.ndarray
    c_cf_hi: np.ndarray
    c_ite_lo: np.ndarray
    c_ite_hi: np.ndarray
    att_idx: np.ndarray
    che_lo: np.ndarray
    che_hi: np.ndarray
    eta_alpha: dict
    eta_gamma: float
    h_lo_model: MeanModel | None
    h_hi_model: MeanModel | None
    flags: list = field(default_factory=list)

    def extrapolate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Attrition-group interval at arbitrary covariates."""
        if self.h_lo_model is None:
            raise RuntimeError("no extrapolation models (empty attrition set)")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if not math.isfinite(self.eta_gamma):
            n = x.shape[0]
            return np.full(n, -math.inf), np.full(n, math.inf)
        lo = self.h_lo_model.predict(x) - self.eta_gamma
        hi = self.h_hi_model.predict(x) + self.eta_gamma
        return lo, hi


def _arm_rows(ds: ExperimentDataset, fold: np.ndarray, arm: int) -> np.ndarray:
    return fold[(ds.r[fold] == 1) & (ds.d[fold] == arm)]


def cise_step1(ds: ExperimentDataset, plan: SplitPlan, cfg: ConformalConfig,
               specs: RoleSpecs) -> Step1State:
    """Counterfactual step: nuisances on the pretraining fold, localized
    conditional CDFs on the training subfolds, thresholds on calibration."""
    validate_dataset(ds, require_both_arms=True)
    flags = []

    for name, fold in (("pretrain", plan.pretrain), ("train1", plan.train1),
                       ("train2", plan.train2), ("calibration", plan.calibration)):
        for arm in (0, 1):
            if _arm_rows(ds, fold, arm).size == 0:
                raise InsufficientDataError(f"empty arm {arm} in {name} fold")

    q_models = {}
    for arm in (0, 1):
        rows = _arm_rows(ds, plan.pretrain, arm)
        spec = replace(specs.quantile, seed=_role_seed(cfg.seed, arm))
        q_models[arm] = fit_quantile_pair(ds.x[rows], ds.y[rows],
                                          cfg.q_lo_level, cfg.q_hi_level, spec)

    e_d_model = fit_propensity(ds.x[plan.pretrain], ds.d[plan.pretrain],
                               replace(specs.propensity, seed=_role_seed(cfg.seed, 2)),
                               cfg.propensity_clip)
    e_r_model = fit_propensity(_with_treatment(ds.x[plan.pretrain], ds.d[plan.pretrain]),
                               ds.r[plan.pretrain],
                               replace(specs.propensity, seed=_role_seed(cfg.seed, 3)),
                               cfg.propensity_clip)

    def own_arm_scores(rows: np.ndarray) -> np.ndarray:
        v = np.full(rows.size, np.nan)
        for arm in (0, 1):
            sel = (ds.r[rows] == 1) & (ds.d[rows] == arm)
            if sel.any():
                lo, hi = q_models[arm].predict(ds.x[rows[sel]])
                v[sel] = cqr_score(ds.y[rows[sel]], lo, hi)
        return v

    eta_init = {}
    m_models = {}
    for arm in (0, 1):
        tr1 = _arm_rows(ds, plan.train1, arm)
        v1 = own_arm_scores(tr1)
        eta_init[arm] = initial_eta(v1, 1.0 - cfg.alpha)
        tr2 = _arm_rows(ds, plan.train2, arm)
        v2 = own_arm_scores(tr2)
        m_models[arm] = fit_conditional_cdf(ds.x[tr2], v2, eta_init[arm],
                                            replace(specs.conditional_cdf,
                                                    seed=_role_seed(cfg.seed, 4 + arm)),
                                            cfg.propensity_clip)

    cal = plan.calibration
    v_cal = own_arm_scores(cal)
    e_d = e_d_model.predict_proba(ds.x[cal])
    pi_d = e_d / (1.0 - e_d)
    e_r1 = e_r_model.predict_proba(_with_treatment(ds.x[cal], np.ones(cal.size)))
    e_r0 = e_r_model.predict_proba(_with_treatment(ds.x[cal], np.zeros(cal.size)))

    eta_solutions = {}
    for arm, psi in ((1, psi1_eval), (0, psi0_eval)):
        v_arm = np.where((ds.r[cal] == 1) & (ds.d[cal] == arm), v_cal, np.nan)
        # The frozen CDF surrogate sits at its target level by construction,
        # so its sampling noise alone can push the moment's ceiling below
        # zero and degenerate the root to +inf; flooring at the target level
        # (the constant of the double-robustness route) removes that failure
        # mode without moving the root's first-order location.
        m_hat = np.maximum(m_models[arm].predict_proba(ds.x[cal]), 1.0 - cfg.alpha)
        inputs = PsiCounterfactualInputs(d=ds.d[cal], r=ds.r[cal], v=v_arm,
                                         m=m_hat,
                                         e_r1=e_r1, e_r0=e_r0, pi_d=pi_d,
                                         alpha=cfg.alpha)
        candidates = np.sort(v_arm[np.isfinite(v_arm)])
        sol = solve_smallest_eta(inputs, psi, candidates)
        if sol.degenerate:
            flags.append(f"eta_alpha_{arm} is infinite; counterfactual intervals unbounded")
        eta_solutions[arm] = sol

    obs = cal[ds.r[cal] == 1]
    c_cf_lo = np.empty(obs.size)
    c_cf_hi = np.empty(obs.size)
    c_ite_lo = np.empty(obs.size)
    c_ite_hi = np.empty(obs.size)
    for arm in (0, 1):
        # rows observed in arm `arm` get the counterfactual interval of 1 - arm
        sel = ds.d[obs] == arm
        if not sel.any():
            continue
        cf = 1 - arm
        lo, hi = q_models[cf].predict(ds.x[obs[sel]])
        eta = eta_solutions[cf].eta
        if math.isfinite(eta):
            cf_lo, cf_hi = lo - eta, hi + eta
        else:
            cf_lo = np.full(lo.shape, -math.inf)
            cf_hi = np.full(hi.shape, math.inf)
        c_cf_lo[sel], c_cf_hi[sel] = cf_lo, cf_hi
        y = ds.y[obs[sel]]
        if arm == 1:
            c_ite_lo[sel], c_ite_hi[sel] = y - cf_hi, y - cf_lo
        else:
            c_ite_lo[sel], c_ite_hi[sel] = cf_lo - y, cf_hi - y

    return Step1State(cfg=cfg, q_models=q_models, e_d_model=e_d_model,
                      e_r_model=e_r_model, eta_init=eta_init,
                      eta_solutions=eta_solutions, cal_obs_idx=obs,
                      c_cf_lo=c_cf_lo, c_cf_hi=c_cf_hi,
                      c_ite_lo=c_ite_lo, c_ite_hi=c_ite_hi, flags=flags)


def cise_step2(state: Step1State, ds: ExperimentDataset, plan: SplitPlan,
               cfg: ConformalConfig, specs: RoleSpecs) -> CiseResult:
    """Extrapolation step: expand the step-1 ITE intervals to attrited rows."""
    flags = list(state.flags)
    att = np.flatnonzero(ds.r == 0)

    finite = np.isfinite(state.c_ite_lo) & np.isfinite(state.c_ite_hi)
    if finite.sum() < 8:
        raise InsufficientDataError("step 1 produced fewer than 8 finite ITE intervals")

    if att.size == 0:
        flags.append("no attrition rows; extrapolation skipped")
        return CiseResult(cal_obs_idx=state.cal_obs_idx, c_cf_lo=state.c_cf_lo,
                          c_cf_hi=state.c_cf_hi, c_ite_lo=state.c_ite_lo,
                          c_ite_hi=state.c_ite_hi, att_idx=att,
                          che_lo=np.empty(0), che_hi=np.empty(0),
                          eta_alpha=state.eta_hat, eta_gamma=math.nan,
                          h_lo_model=None, h_hi_model=None, flags=flags)

    pos = {int(row): i for i, row in enumerate(state.cal_obs_idx)}
    obstr = plan.step2_train
    obsca = plan.step2_cal
    if obstr.size == 0 or obsca.size == 0:
        raise InsufficientDataError("empty step-2 fold")
    tr_pos = np.array([pos[int(r)] for r in obstr], dtype=np.int64)
    ca_pos = np.array([pos[int(r)] for r in obsca], dtype=np.int64)

    def endpoint_features(rows: np.ndarray) -> np.ndarray:
        if cfg.step2_use_treatment:
            return _with_treatment(ds.x[rows], ds.d[rows])
        return ds.x[rows]

    # Endpoint models can only learn from finite surrogate intervals; rows
    # with an unbounded step-1 interval keep a +inf score and stay in the
    # moment, where they honestly count as never covered.
    tr_finite = np.isfinite(state.c_ite_lo[tr_pos]) & np.isfinite(state.c_ite_hi[tr_pos])
    if tr_finite.sum() < obstr.size:
        flags.append(f"{int(obstr.size - tr_finite.sum())} unbounded surrogates "
                     "excluded from endpoint fits")
    h_lo = fit_mean(endpoint_features(obstr[tr_finite]), state.c_ite_lo[tr_pos[tr_finite]],
                    replace(specs.mean, seed=_role_seed(cfg.seed, 6)))
    h_hi = fit_mean(endpoint_features(obstr[tr_finite]), state.c_ite_hi[tr_pos[tr_finite]],
                    replace(specs.mean, seed=_role_seed(cfg.seed, 7)))

    # P(R | X, D) needs both classes; the step-2 training fold has none with
    # r = 0, so the attrition rows join the fit.
    pi_rows = np.concatenate([obstr, att])
    pi_model = fit_propensity(_with_treatment(ds.x[pi_rows], ds.d[pi_rows]),
                              ds.r[pi_rows],
                              replace(specs.propensity, seed=_role_seed(cfg.seed, 8)),
                              cfg.propensity_clip)

    def v_c(rows_pos: np.ndarray, rows: np.ndarray) -> np.ndarray:
        return interval_score(state.c_ite_lo[rows_pos], state.c_ite_hi[rows_pos],
                              h_lo.predict(endpoint_features(rows)),
                              h_hi.predict(endpoint_features(rows)))

    # The localized CDF needs out-of-sample scores: endpoint models evaluated
    # on their own fitting rows understate the nonconformity, which drags the
    # initial threshold (and with it the whole moment) below its target.
    # Cross-fit the endpoint models across two halves of the training fold.
    v_tr = np.full(obstr.size, np.nan)
    perm = make_rng(child_seed(cfg.seed, 11)).permutation(obstr.size)
    halves = (perm[:obstr.size // 2], perm[obstr.size // 2:])
    for a, b in ((0, 1), (1, 0)):
        fit_rows, fit_pos = obstr[halves[a]], tr_pos[halves[a]]
        fin = np.isfinite(state.c_ite_lo[fit_pos]) & np.isfinite(state.c_ite_hi[fit_pos])
        g_lo = fit_mean(endpoint_features(fit_rows[fin]), state.c_ite_lo[fit_pos[fin]],
                        replace(specs.mean, seed=_role_seed(cfg.seed, 12 + a)))
        g_hi = fit_mean(endpoint_features(fit_rows[fin]), state.c_ite_hi[fit_pos[fin]],
                        replace(specs.mean, seed=_role_seed(cfg.seed, 14 + a)))
        out_rows, out_pos = obstr[halves[b]], tr_pos[halves[b]]
        v_tr[halves[b]] = interval_score(state.c_ite_lo[out_pos], state.c_ite_hi[out_pos],
                                         g_lo.predict(endpoint_features(out_rows)),
                                         g_hi.predict(endpoint_features(out_rows)))
    eta_init_c = initial_eta(v_tr[np.isfinite(v_tr)], 1.0 - cfg.gamma)

    m_c = fit_conditional_cdf(_with_treatment(ds.x[obstr], ds.d[obstr]),
                              v_tr, eta_init_c,
                              replace(specs.conditional_cdf, seed=_role_seed(cfg.seed, 9)),
                              cfg.propensity_clip)

    solve_rows = np.concatenate([obsca, att])
    v_solve = np.full(solve_rows.size, np.nan)
    v_solve[:obsca.size] = v_c(ca_pos, obsca)
    e_r = pi_model.predict_proba(_with_treatment(ds.x[solve_rows], ds.d[solve_rows]))
    # same target-level floor as in step 1 (see the comment there)
    m_hat = np.maximum(m_c.predict_proba(_with_treatment(ds.x[solve_rows], ds.d[solve_rows])),
                       1.0 - cfg.gamma)
    inputs = PsiExtrapolationInputs(r=ds.r[solve_rows], v=v_solve,
                                    m=m_hat,
                                    pi_r=e_r / (1.0 - e_r), gamma=cfg.gamma)
    candidates = np.sort(v_solve[np.isfinite(v_solve)])
    sol = solve_smallest_eta(inputs, psiC_eval, candidates)
    if sol.degenerate:
        flags.append("eta_gamma is infinite; attrition intervals unbounded")

    if math.isfinite(sol.eta):
        che_lo = h_lo.predict(endpoint_features(att)) - sol.eta
        che_hi = h_hi.predict(endpoint_features(att)) + sol.eta
    else:
        che_lo = np.full(att.size, -math.inf)
        che_hi = np.full(att.size, math.inf)

    return CiseResult(cal_obs_idx=state.cal_obs_idx, c_cf_lo=state.c_cf_lo,
                      c_cf_hi=state.c_cf_hi, c_ite_lo=state.c_ite_lo,
                      c_ite_hi=state.c_ite_hi, att_idx=att, che_lo=che_lo,
                      che_hi=che_hi, eta_alpha=state.eta_hat, eta_gamma=sol.eta,
                      h_lo_model=h_lo, h_hi_model=h_hi, flags=flags)


def run_cise(ds: ExperimentDataset, cfg: ConformalConfig, specs: RoleSpecs) -> CiseResult:
    """Full two-step pipeline on one dataset."""
    plan = make_splits(ds.n, ds.r, cfg)
    state = cise_step1(ds, plan, cfg, specs)
    return cise_step2(state, ds, plan, cfg, specs)


def wcqr_nested_baseline(ds: ExperimentDataset, cfg: ConformalConfig, specs: RoleSpecs,
                         exact: bool = True) -> CiseResult:
    """Nested weighted-CQR baseline: counterfactual intervals by weighted
    split CQR on one half of the observed rows, then an unweighted second
    conformal step (exact) or direct endpoint-quantile fits (inexact)."""
    validate_dataset(ds, require_both_arms=True)
    flags = []
    obs = np.flatnonzero(ds.r == 1)
    att = np.flatnonzero(ds.r == 0)

    rng = make_rng(child_seed(cfg.seed, 2))
    order = obs[rng.permutation(obs.size)]
    half = order.size // 2
    z1, z2 = order[:half], order[half:]
    for arm in (0, 1):
        if (ds.d[z1] == arm).sum() < 4 or (ds.d[z2] == arm).sum() < 1:
            raise InsufficientDataError(f"too few arm-{arm} rows in the baseline folds")

    e_d_model = fit_propensity(ds.x[z1], ds.d[z1],
                               replace(specs.propensity, seed=_role_seed(cfg.seed, 20)),
                               cfg.propensity_clip)

    c_ite_lo = np.empty(z2.size)
    c_ite_hi = np.empty(z2.size)
    for arm in (0, 1):
        # counterfactual arm cf = 1 - arm, fitted on z1 rows observed in cf
        cf = 1 - arm
        src = z1[ds.d[z1] == cf]
        rng_arm = make_rng(child_seed(cfg.seed, 3 + arm))
        perm = src[rng_arm.permutation(src.size)]
        n_tr = perm.size // 2
        tr, ca = perm[:n_tr], perm[n_tr:]
        if tr.size == 0 or ca.size == 0:
            raise InsufficientDataError(f"too few arm-{cf} rows for weighted CQR")

        if cf == 0:
            def weight_fn(x):
                p = e_d_model.predict_proba(x)
                return p / (1.0 - p)
        else:
            def weight_fn(x):
                p = e_d_model.predict_proba(x)
                return (1.0 - p) / p

        test = z2[ds.d[z2] == arm]
        # unreachable weighted quantiles fall back to the largest score so
        # the baseline keeps producing (very wide) finite intervals
        band = weighted_split_cqr_batch(ds.x[tr], ds.y[tr], ds.x[ca], ds.y[ca],
                                        ds.x[test], cfg.alpha, weight_fn,
                                        replace(specs.quantile, seed=_role_seed(cfg.seed, 22 + arm)),
                                        cap_at_max=True)
        if band.uninformative.any():
            flags.append(f"{int(band.uninformative.sum())} capped counterfactual intervals (arm {cf})")
        sel = ds.d[z2] == arm
        y = ds.y[test]
        if arm == 1:
            c_ite_lo[sel], c_ite_hi[sel] = y - band.hi, y - band.lo
        else:
            c_ite_lo[sel], c_ite_hi[sel] = band.lo - y, band.hi - y

    eta_gamma = math.nan
    h_lo_model = h_hi_model = None
    if att.size == 0:
        flags.append("no attrition rows; extrapolation skipped")
        che_lo = np.empty(0)
        che_hi = np.empty(0)
    else:
        finite = np.isfinite(c_ite_lo) & np.isfinite(c_ite_hi)
        if finite.sum() < 4:
            raise InsufficientDataError("too few finite baseline ITE intervals")
        fz = z2[finite]
        flo = c_ite_lo[finite]
        fhi = c_ite_hi[finite]
        if exact:
            rng2 = make_rng(child_seed(cfg.seed, 5))
            perm = rng2.permutation(fz.size)
            n_tr = fz.size // 2
            tr_i, ca_i = perm[:n_tr], perm[n_tr:]
            h_lo_model = fit_mean(ds.x[fz[tr_i]], flo[tr_i],
                                  replace(specs.mean, seed=_role_seed(cfg.seed, 24)))
            h_hi_model = fit_mean(ds.x[fz[tr_i]], fhi[tr_i],
                                  replace(specs.mean, seed=_role_seed(cfg.seed, 25)))
            scores = interval_score(flo[ca_i], fhi[ca_i],
                                    h_lo_model.predict(ds.x[fz[ca_i]]),
                                    h_hi_model.predict(ds.x[fz[ca_i]]))
            eta_gamma = unweighted_quantile(scores, 1.0 - cfg.gamma)
            if not math.isfinite(eta_gamma):
                flags.append("baseline eta_gamma is infinite; attrition intervals unbounded")
                che_lo = np.full(att.size, -math.inf)
                che_hi = np.full(att.size, math.inf)
            else:
                che_lo = h_lo_model.predict(ds.x[att]) - eta_gamma
                che_hi = h_hi_model.predict(ds.x[att]) + eta_gamma
        else:
            h_lo_model = fit_quantile(ds.x[fz], flo, cfg.g_lo_level,
                                      replace(specs.quantile, seed=_role_seed(cfg.seed, 26)))
            h_hi_model = fit_quantile(ds.x[fz], fhi, cfg.g_hi_level,
                                      replace(specs.quantile, seed=_role_seed(cfg.seed, 27)))
            eta_gamma = 0.0
            che_lo = h_lo_model.predict(ds.x[att])
            che_hi = h_hi_model.predict(ds.x[att])
            swap = che_lo > che_hi
            if swap.any():
                mid = 0.5 * (che_lo[swap] + che_hi[swap])
                che_lo[swap] = mid
                che_hi[swap] = mid

    return CiseResult(cal_obs_idx=z2, c_cf_lo=np.full(z2.size, np.nan),
                      c_cf_hi=np.full(z2.size, np.nan), c_ite_lo=c_ite_lo,
                      c_ite_hi=c_ite_hi, att_idx=att, che_lo=che_lo, che_hi=che_hi,
                      eta_alpha={}, eta_gamma=eta_gamma,
                      h_lo_model=h_lo_model, h_hi_model=h_hi_model, flags=flags)


@dataclass(frozen=True)
class AteEstimate:
    estimate: float
    se: float


def ipw_ate(ds: ExperimentDataset, specs: RoleSpecs, clip: float = 0.01) -> AteEstimate:
    """Hajek-style IPW ATE on the observed rows, weighting by the inverse of
    the treatment and response propensities."""
    obs = np.flatnonzero(ds.r == 1)
    if (ds.d[obs] == 1).sum() == 0 or (ds.d[obs] == 0).sum() == 0:
        raise DataValidationError("IPW needs observed rows in both arms")
    e_d_model = fit_propensity(ds.x, ds.d, specs.propensity, clip)
    e_r_model = fit_propensity(_with_treatment(ds.x, ds.d), ds.r, specs.propensity, clip)

    x_obs = ds.x[obs]
    d_obs = ds.d[obs]
    y_obs = ds.y[obs]
    e_d = e_d_model.predict_proba(x_obs)
    e_r = e_r_model.predict_proba(_with_treatment(x_obs, d_obs))

    means = {}
    variances = {}
    for arm in (1, 0):
        sel = d_obs == arm
        p_arm = e_d if arm == 1 else 1.0 - e_d
        w = 1.0 / (p_arm[sel] * e_r[sel])
        mu = float(np.sum(w * y_obs[sel]) / np.sum(w))
        # linearized variance of the weighted mean
        var = float(np.sum((w * (y_obs[sel] - mu)) ** 2) / np.sum(w) ** 2)
        means[arm] = mu
        variances[arm] = var
    return AteEstimate(estimate=means[1] - means[0],
                       se=math.sqrt(variances[1] + variances[0]))


@dataclass(frozen=True)
class AteSummary:
    ate_r1: float
    se_r1: float
    ate_r0: float | None
    se_r0: float | None
    ate_all: float
    se_all: float
    n_r1: int
    n_r0: int


def aggregate_ate(result: CiseResult, ds: ExperimentDataset, ate_r1: float,
                  se_r1: float, se_r0: float = math.nan) -> AteSummary:
    """Combine the observed-group ATE with the attrition-group midpoint ATE.

    The attrition point estimate is the mean of interval midpoints over rows
    with finite intervals; SE(ATE over everyone) follows the weighted-average
    variance formula.  ``se_r0`` comes from the caller (spread across
    replications); it is NaN for a single run.
    """
    n_r1 = int((ds.r == 1).sum())
    n_r0 = int((ds.r == 0).sum())
    if n_r0 == 0:
        return AteSummary(ate_r1=ate_r1, se_r1=se_r1, ate_r0=None, se_r0=None,
                          ate_all=ate_r1, se_all=se_r1, n_r1=n_r1, n_r0=n_r0)
    finite = np.isfinite(result.che_lo) & np.isfinite(result.che_hi)
    if not finite.any():
        raise RuntimeError("no finite attrition intervals to aggregate")
    mid = 0.5 * (result.che_lo[finite] + result.che_hi[finite])
    ate_r0 = float(mid.mean())
    w1 = n_r1 / (n_r1 + n_r0)
    w0 = n_r0 / (n_r1 + n_r0)
    ate_all = w1 * ate_r1 + w0 * ate_r0
    se_all = math.sqrt((w1 * se_r1) ** 2 + (w0 * se_r0) ** 2)
    return AteSummary(ate_r1=ate_r1, se_r1=se_r1, ate_r0=ate_r0, se_r0=se_r0,
                      ate_all=ate_all, se_all=se_all, n_r1=n_r1, n_r0=n_r0)
