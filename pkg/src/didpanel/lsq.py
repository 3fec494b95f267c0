"""Weighted least squares with fixed-effect absorption.

Fits the two-way fixed-effects regression, the first-difference regression,
and the relative-time event-study regression.  Every reported coefficient
carries its influence representation: the per-row vector ``c`` such that the
coefficient equals ``sum(c * y)`` over raw outcomes, with ``sum(c) == 0`` and
``sum(c * x) == 1`` for the coefficient's own regressor.  That representation
is what the diagnostics module turns into decomposition weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    CollinearRegressor,
    ConvergenceFailure,
    NotBinaryStaggered,
    RankDeficient,
    TooFewClusters,
    WrongShape,
)
from .panel import PanelDataset, derive_design

_DEMEAN_TOL = 1e-12
_DEMEAN_MAX_PASSES = 10_000


def _is_rank_one(mat: np.ndarray) -> bool:
    """True when a positive matrix factorizes as row * col / total (within fp)."""
    total = mat.sum()
    if total <= 0:
        return False
    approx = np.outer(mat.sum(axis=1), mat.sum(axis=0)) / total
    return bool(np.max(np.abs(mat - approx)) <= 1e-12 * mat.max())


def _balanced_two_factor(factors, weights, n_obs) -> bool:
    if len(factors) != 2:
        return False
    (c1, n1), (c2, n2) = factors
    if n_obs != n1 * n2:
        return False
    counts = np.zeros((n1, n2))
    np.add.at(counts, (c1, c2), 1.0)
    if not np.all(counts == 1.0):
        return False
    wmat = np.zeros((n1, n2))
    wmat[c1, c2] = weights
    return _is_rank_one(wmat)


def residualize(values: np.ndarray, factors, weights: np.ndarray) -> np.ndarray:
    """Residualize columns on categorical factors in the weighted inner product.

    ``factors`` is a sequence of ``(codes, n_levels)`` pairs.  Balanced
    two-factor layouts with multiplicatively separable weights use one exact
    double-demeaning pass; anything else iterates alternating weighted
    demeaning until the largest per-pass adjustment falls below 1e-12 of the
    data scale.
    """
    V = np.array(values, dtype=float)
    squeeze = V.ndim == 1
    if squeeze:
        V = V[:, None]
    if not factors:
        return V[:, 0] if squeeze else V
    w = np.asarray(weights, dtype=float)
    n = V.shape[0]

    wsums = []
    for codes, nlev in factors:
        ws = np.bincount(codes, weights=w, minlength=nlev)
        ws[ws == 0.0] = 1.0  # empty levels are never indexed; avoid 0/0
        wsums.append(ws)

    def one_pass(M):
        delta = 0.0
        for (codes, nlev), ws in zip(factors, wsums):
            for j in range(M.shape[1]):
                means = np.bincount(codes, weights=w * M[:, j], minlength=nlev) / ws
                adj = means[codes]
                M[:, j] -= adj
                step = np.max(np.abs(adj)) if adj.size else 0.0
                delta = max(delta, step)
        return delta

    if _balanced_two_factor(factors, w, n):
        one_pass(V)
        return V[:, 0] if squeeze else V

    scale = max(1.0, float(np.max(np.abs(V))) if V.size else 1.0)
    for _ in range(_DEMEAN_MAX_PASSES):
        if one_pass(V) <= _DEMEAN_TOL * scale:
            break
    else:
        raise ConvergenceFailure("fixed-effect absorption did not converge in 10000 passes")
    return V[:, 0] if squeeze else V


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted regression with absorbed fixed effects.

    ``influence[name]`` is the per-row vector reproducing ``coefficients[name]``
    from raw outcomes.  ``row_keys`` gives the (group, period) identity of each
    fitted row; for first-difference fits the period is the later one of the
    pair.  ``dropped_terms`` lists requested terms removed for having no
    observations (empty relative-time bins).
    """

    coefficients: dict
    se: dict
    vcov: np.ndarray | None
    term_names: tuple
    residuals: np.ndarray
    influence: dict
    row_keys: tuple
    n_obs: int
    n_clusters: int
    dropped_terms: tuple = ()
    term_meta: dict | None = None

    def coefficient_vector(self) -> np.ndarray:
        return np.array([self.coefficients[t] for t in self.term_names])


def _wls_absorbed(y, X, names, factors, w, cluster_codes, row_keys,
                  small_sample=False, compute_vcov=True, dropped=(), term_meta=None):
    n = y.shape[0]
    k = X.shape[1]
    total_w = float(w.sum())
    _, cluster_codes = np.unique(cluster_codes, return_inverse=True)

    cols = np.concatenate([X, y[:, None]], axis=1)
    demeaned = residualize(cols, factors, w)
    Xd, yd = demeaned[:, :k], demeaned[:, k]

    if k:
        raw_scale = np.sqrt((w[:, None] * X * X).sum(axis=0) / total_w)
        within = np.sqrt((w[:, None] * Xd * Xd).sum(axis=0) / total_w)
        for j in range(k):
            if within[j] <= 1e-10 * max(raw_scale[j], 1e-300) or raw_scale[j] == 0.0:
                raise CollinearRegressor(
                    f"regressor '{names[j]}' has no variation after absorbing fixed effects"
                )
        G = (Xd * w[:, None]).T @ Xd
        eigs = np.linalg.eigvalsh(G)
        if eigs[0] <= 1e-12 * max(eigs[-1], 1e-300):
            raise RankDeficient("regressors are collinear with each other after absorption")
        b = (Xd * w[:, None]).T @ yd
        Ginv = np.linalg.inv(G)
        beta = Ginv @ b
        residuals = yd - Xd @ beta
        influence_mat = (w[:, None] * Xd) @ Ginv  # column j reproduces beta[j] from raw y
    else:
        Ginv = np.empty((0, 0))
        beta = np.empty(0)
        residuals = yd
        influence_mat = np.empty((n, 0))

    vcov = None
    n_clusters = int(cluster_codes.max()) + 1 if n else 0
    se = {}
    if compute_vcov and k:
        if n_clusters < 2:
            raise TooFewClusters(f"cluster-robust vcov needs >= 2 clusters, found {n_clusters}")
        scores = np.zeros((n_clusters, k))
        np.add.at(scores, cluster_codes, w[:, None] * Xd * residuals[:, None])
        meat = scores.T @ scores
        vcov = Ginv @ meat @ Ginv
        if small_sample:
            dof_absorbed = sum(nlev for _, nlev in factors) - max(len(factors) - 1, 0)
            denom = max(n - k - dof_absorbed, 1)
            vcov = vcov * (n_clusters / (n_clusters - 1)) * ((n - 1) / denom)
        vcov = (vcov + vcov.T) / 2.0
        se = {names[j]: float(np.sqrt(max(vcov[j, j], 0.0))) for j in range(k)}

    return FitResult(
        coefficients={names[j]: float(beta[j]) for j in range(k)},
        se=se,
        vcov=vcov,
        term_names=tuple(names),
        residuals=residuals,
        influence={names[j]: influence_mat[:, j].copy() for j in range(k)},
        row_keys=tuple(row_keys),
        n_obs=n,
        n_clusters=n_clusters,
        dropped_terms=tuple(dropped),
        term_meta=term_meta,
    )


def _factor_codes(data: PanelDataset, spec):
    if isinstance(spec, str):
        if spec == "group":
            return data.group_code, data.n_groups
        if spec == "time":
            return data.time_code, data.n_periods
        raise WrongShape(f"unknown factor '{spec}'; use 'group', 'time', or an array of codes")
    arr = np.asarray(spec)
    _, codes = np.unique(arr, return_inverse=True)
    return codes, int(codes.max()) + 1


def absorb_and_fit(
    data: PanelDataset,
    regressors,
    absorb: Sequence = ("group", "time"),
    cluster="group",
    *,
    small_sample: bool = False,
    compute_vcov: bool = True,
) -> FitResult:
    """Weighted OLS of the outcome on named regressors with absorbed factors.

    Parameters
    ----------
    regressors : mapping of name -> per-row values, or sequence of arrays
        Sequences get positional names ``x0, x1, ...``.
    absorb : sequence
        Factors to absorb: ``"group"``, ``"time"``, or per-row code arrays.
        An empty sequence absorbs a single constant (plain weighted OLS with
        intercept).
    cluster : str or array
        Clustering factor for the sandwich covariance (default group).

    Raises
    ------
    CollinearRegressor
        A regressor has no variation left after absorption.
    RankDeficient
        The absorbed regressors are mutually collinear.
    TooFewClusters
        Fewer than two clusters while a covariance was requested.
    """
    if isinstance(regressors, Mapping):
        names = list(regressors.keys())
        X = np.column_stack([np.asarray(regressors[k], dtype=float) for k in names])
    else:
        arrays = [np.asarray(a, dtype=float) for a in regressors]
        names = [f"x{i}" for i in range(len(arrays))]
        X = np.column_stack(arrays) if arrays else np.empty((data.n_rows, 0))
    if X.shape[0] != data.n_rows:
        raise WrongShape("regressor columns must align with the panel rows")

    factors = [_factor_codes(data, f) for f in absorb]
    if not factors:
        factors = [(np.zeros(data.n_rows, dtype=np.int64), 1)]
    cluster_codes, _ = _factor_codes(data, cluster)
    return _wls_absorbed(
        data.outcome, X, names, factors, data.weight, cluster_codes,
        data.row_keys(), small_sample=small_sample, compute_vcov=compute_vcov,
    )


def fit_twfe(data: PanelDataset, *, small_sample: bool = False, compute_vcov: bool = True) -> FitResult:
    """Outcome on group fixed effects, period fixed effects, and the treatment."""
    return absorb_and_fit(
        data, {"treatment": data.treatment}, absorb=("group", "time"),
        cluster="group", small_sample=small_sample, compute_vcov=compute_vcov,
    )


def first_difference_rows(data: PanelDataset):
    """Consecutive-period differences per group: codes, y, x, weights, keys.

    Pairs are formed only where a group is observed at adjacent integer
    periods t-1 and t; the pair carries the period-t weight.
    """
    gcode = data.group_code
    tvals = data.time_values
    same_group = gcode[1:] == gcode[:-1]
    adjacent = tvals[1:] == tvals[:-1] + 1
    take = same_group & adjacent
    idx = np.flatnonzero(take) + 1  # row index of the later period
    dy = data.outcome[idx] - data.outcome[idx - 1]
    dx = data.treatment[idx] - data.treatment[idx - 1]
    keys = tuple((data.groups[gcode[i]], int(tvals[i])) for i in idx)
    return gcode[idx], tvals[idx], dy, dx, data.weight[idx], keys


def fit_first_difference(data: PanelDataset, *, small_sample: bool = False,
                         compute_vcov: bool = True) -> FitResult:
    """Outcome first difference on treatment first difference with period effects.

    Clustered by group; each pair is weighted by the later period's weight.
    """
    g, tvals, dy, dx, w, keys = first_difference_rows(data)
    if len(keys) == 0:
        raise WrongShape("no group is observed at two consecutive periods")
    uniq_t, tcode = np.unique(tvals, return_inverse=True)
    factors = [(tcode, len(uniq_t))]
    return _wls_absorbed(
        dy, dx[:, None], ["treatment"], factors, w, g, keys,
        small_sample=small_sample, compute_vcov=compute_vcov,
    )


@dataclass(frozen=True)
class EventStudySpec:
    """Shape of a relative-time event-study regression.

    ``leads`` (K) and ``lags`` (L) bound the included relative times
    {-K, ..., -2, 0, ..., L} around the omitted one (default -1).  With
    ``binning="endpoint"`` the extreme indicators become one-sided: at least
    K periods before adoption, respectively at least L periods after.  Under
    endpoint binning, groups that never switch satisfy the lead-bin condition
    and fall into that bin.
    """

    leads: int = 0
    lags: int = 0
    binning: str = "none"
    omitted_relative_time: int = -1

    def __post_init__(self):
        if self.leads < 0 or self.lags < 0:
            raise WrongShape("leads and lags must be nonnegative")
        if self.binning not in ("none", "endpoint"):
            raise WrongShape(f"unknown binning {self.binning!r}; use 'none' or 'endpoint'")


def event_terms(spec: EventStudySpec):
    """Ordered (name, mode, ell) descriptors for the included indicators."""
    terms = []
    for ell in range(-spec.leads, spec.lags + 1):
        if ell == spec.omitted_relative_time:
            continue
        if spec.binning == "endpoint" and ell == -spec.leads and spec.leads > 0:
            terms.append((f"rel_le_{ell}", "le", ell))
        elif spec.binning == "endpoint" and ell == spec.lags and spec.lags > 0:
            terms.append((f"rel_ge_{ell}", "ge", ell))
        else:
            terms.append((f"rel_{ell}", "eq", ell))
    return terms


def relative_time(data: PanelDataset, design=None) -> np.ndarray:
    """Per-row periods elapsed since the first switch (-inf for never-switchers)."""
    design = design or derive_design(data)
    F = design.first_switch_code[data.group_code]
    rel = np.where(np.isfinite(F), data.time_values - F, -np.inf)
    return rel


def fit_event_study(data: PanelDataset, spec: EventStudySpec, *,
                    small_sample: bool = False, compute_vcov: bool = True) -> FitResult:
    """Relative-time indicator regression for binary staggered designs.

    Indicator bins with no observations are dropped and listed in
    ``dropped_terms`` rather than silently absorbed.
    """
    design = derive_design(data)
    if not (design.is_binary and design.is_staggered):
        raise NotBinaryStaggered("event-study regression requires a binary staggered design")
    rel = relative_time(data, design)
    if not np.any(rel == spec.omitted_relative_time):
        warnings.warn(
            f"omitted relative time {spec.omitted_relative_time} has no observations",
            stacklevel=2,
        )

    X_cols, names, meta, dropped = [], [], {}, []
    for name, mode, ell in event_terms(spec):
        if mode == "eq":
            col = (rel == ell).astype(float)
        elif mode == "le":
            col = (rel <= ell).astype(float)
        else:
            col = (rel >= ell).astype(float)
        if not col.any():
            dropped.append(name)
            continue
        X_cols.append(col)
        names.append(name)
        meta[name] = (mode, ell)
    if not names:
        raise CollinearRegressor("no relative-time indicator has observations")

    X = np.column_stack(X_cols)
    factors = [(data.group_code, data.n_groups), (data.time_code, data.n_periods)]
    return _wls_absorbed(
        data.outcome, X, names, factors, data.weight, data.group_code,
        data.row_keys(), small_sample=small_sample, compute_vcov=compute_vcov,
        dropped=dropped, term_meta=meta,
    )


def recover_two_way_effects(y, gcode, n_groups, tcode, n_periods, w,
                            tol=1e-14, max_passes=200_000):
    """Back out additive group and period effects from a two-way fit.

    Solves the small weighted normal equations exactly when the dummy basis
    is of moderate size, and falls back to alternating weighted means for
    very large panels.  The caller must have verified that the group-period
    incidence graph is connected wherever predictions are needed; across
    disconnected components the level split is arbitrary.
    """
    if n_groups + n_periods <= 2000:
        Z = np.zeros((y.shape[0], n_groups + n_periods))
        Z[np.arange(y.shape[0]), gcode] = 1.0
        Z[np.arange(y.shape[0]), n_groups + tcode] = 1.0
        sw = np.sqrt(w)
        sol, *_ = np.linalg.lstsq(Z * sw[:, None], y * sw, rcond=None)
        return sol[:n_groups], sol[n_groups:]

    alpha = np.zeros(n_groups)
    gamma = np.zeros(n_periods)
    wg = np.bincount(gcode, weights=w, minlength=n_groups)
    wt = np.bincount(tcode, weights=w, minlength=n_periods)
    scale = max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
    for _ in range(max_passes):
        alpha_new = np.bincount(gcode, weights=w * (y - gamma[tcode]), minlength=n_groups)
        with np.errstate(invalid="ignore"):
            alpha_new = np.where(wg > 0, alpha_new / np.where(wg > 0, wg, 1.0), 0.0)
        gamma_new = np.bincount(tcode, weights=w * (y - alpha_new[gcode]), minlength=n_periods)
        with np.errstate(invalid="ignore"):
            gamma_new = np.where(wt > 0, gamma_new / np.where(wt > 0, wt, 1.0), 0.0)
        delta = max(
            float(np.max(np.abs(alpha_new - alpha))) if alpha.size else 0.0,
            float(np.max(np.abs(gamma_new - gamma))) if gamma.size else 0.0,
        )
        alpha, gamma = alpha_new, gamma_new
        if delta <= tol * scale:
            return alpha, gamma
    raise ConvergenceFailure("fixed-effect recovery did not converge")
