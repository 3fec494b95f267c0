"""Estimators that allow dynamic treatment effects.

Three families, all built on first-switch event timing:

* cohort-horizon DIDs for binary staggered designs, with never-treated,
  not-yet-treated, or last-treated control groups;
* the imputation estimator: fit group and period effects (optionally group
  trends) on never-yet-treated cells, predict counterfactuals for treated
  cells, and average the gaps;
* generalized first-switch DIDs for arbitrary designs (doses, on/off paths),
  aggregated into an event-study with a first-stage dose profile and a
  normalized per-unit total effect.

Every family carries placebos that mimic the corresponding effect windows on
strictly pre-switch data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CohortEmpty,
    EmptyHorizon,
    HorizonOutOfRange,
    InsufficientPretrendData,
    NoControls,
    NotBinaryStaggered,
    NotBinaryTreatment,
    UnidentifiedFixedEffect,
    UnsupportedFeature,
    WrongShape,
)
from .lsq import absorb_and_fit, recover_two_way_effects
from .panel import NEVER, PanelDataset, derive_design

CONTROL_RULES = ("never_treated", "not_yet_treated", "last_treated")


def _wmean(values, weights):
    return float(np.sum(values * weights) / np.sum(weights))


@dataclass(frozen=True)
class CohortHorizonEffect:
    """Effect of having been treated for ``horizon + 1`` periods in one cohort."""

    cohort: int
    horizon: int
    estimate: float
    n_treated_groups: int
    n_control_groups: int
    control_rule: str
    weight: float


@dataclass(frozen=True)
class HorizonEstimate:
    horizon: int
    estimate: float
    se: float | None = None
    n_treated: int = 0
    weight: float = 0.0


@dataclass(frozen=True)
class EventStudyResult:
    """Per-horizon effects (>= 0) and placebos (<= -2) around the first switch.

    Horizons run contiguously from 0 to the requested maximum; any horizon
    with no computable comparison appears in ``gaps`` instead of carrying a
    silent zero.  ``first_stage`` holds the average absolute dose change at
    each horizon; ``normalized_effect`` divides the horizon-averaged effects
    by the horizon-averaged first stage, yielding a per-unit total effect.
    """

    effects: tuple
    placebos: tuple = ()
    first_stage: tuple | None = None
    normalized_effect: tuple | None = None   # (estimate, se or None)
    joint_placebo: object | None = None
    gaps: tuple = ()
    placebo_gaps: tuple = ()

    def effect_at(self, horizon: int) -> HorizonEstimate:
        for e in self.effects:
            if e.horizon == horizon:
                return e
        raise EmptyHorizon(f"no estimate at horizon {horizon}")


# --------------------------------------------------------------------------
# cohort-horizon DIDs
# --------------------------------------------------------------------------

def _column(data: PanelDataset, period: int):
    try:
        return data.periods.index(period)
    except ValueError:
        return None


def _control_codes(data, design, rule, target_period):
    F = design.first_switch_code
    base = design.baseline_code
    if rule == "never_treated":
        return np.flatnonzero((base == 0.0) & ~np.isfinite(F))
    if rule == "not_yet_treated":
        return np.flatnonzero((base == 0.0) & (F > target_period))
    if rule == "last_treated":
        finite = F[np.isfinite(F)]
        last = int(finite.max())
        if target_period >= last:
            raise HorizonOutOfRange(
                f"the last-treated cohort switches at {last}; horizons reaching period "
                f"{target_period} cannot use it as a control"
            )
        return np.flatnonzero(F == last)
    raise WrongShape(f"unknown control rule {rule!r}; choose from {CONTROL_RULES}")


def cohort_effect(data: PanelDataset, cohort: int, horizon: int,
                  control_rule: str = "never_treated") -> CohortHorizonEffect:
    """DID between one adoption cohort and its controls, from the last
    pre-adoption period to ``horizon`` periods after adoption.

    Control sets: ``never_treated`` (groups untreated throughout),
    ``not_yet_treated`` (groups still untreated at the target period), or
    ``last_treated`` (the final adoption cohort, usable only strictly before
    it switches; its own post-switch periods never enter the estimation).
    """
    design = derive_design(data)
    if not (design.is_binary and design.is_staggered):
        raise NotBinaryStaggered("cohort-horizon DIDs require a binary staggered design")
    if cohort not in design.cohorts:
        raise CohortEmpty(f"no group first switches at period {cohort}")
    if horizon < 0:
        raise HorizonOutOfRange("horizon must be >= 0")
    target = cohort + horizon
    base = cohort - 1
    j_target = _column(data, target)
    j_base = _column(data, base)
    if j_target is None or j_base is None:
        raise HorizonOutOfRange(
            f"periods {base} and {target} must both exist in the panel"
        )

    F = design.first_switch_code
    treated = np.flatnonzero(F == cohort)
    if control_rule == "last_treated":
        finite = F[np.isfinite(F)]
        if cohort == int(finite.max()):
            raise NoControls(
                "the last-treated cohort has no later-treated cohort to serve as control"
            )
    controls = _control_codes(data, design, control_rule, target)

    grids = data.grids
    obs = grids["observed"]
    ok = obs[:, j_base] & obs[:, j_target]
    treated = treated[ok[treated]]
    controls = controls[ok[controls]]
    if len(treated) == 0:
        raise CohortEmpty(f"cohort {cohort} is not observed at periods {base} and {target}")
    if len(controls) == 0:
        raise NoControls(
            f"no {control_rule} group is observed at periods {base} and {target}"
        )

    dy = grids["outcome"][:, j_target] - grids["outcome"][:, j_base]
    w = grids["weight"][:, j_target]
    estimate = _wmean(dy[treated], w[treated]) - _wmean(dy[controls], w[controls])
    return CohortHorizonEffect(
        cohort=int(cohort),
        horizon=int(horizon),
        estimate=float(estimate),
        n_treated_groups=int(len(treated)),
        n_control_groups=int(len(controls)),
        control_rule=control_rule,
        weight=float(np.sum(w[treated])),
    )


def cohort_placebo(data: PanelDataset, cohort: int, lag: int,
                   control_rule: str = "never_treated") -> CohortHorizonEffect:
    """Pre-adoption consecutive-period placebo for one cohort.

    ``lag`` p compares the outcome change from period ``cohort - 1 - p`` to
    ``cohort - p`` between the cohort and its controls; reported at pseudo
    horizon ``-(p + 1)`` so the first placebo lands at -2.
    """
    design = derive_design(data)
    if not (design.is_binary and design.is_staggered):
        raise NotBinaryStaggered("cohort-horizon DIDs require a binary staggered design")
    if cohort not in design.cohorts:
        raise CohortEmpty(f"no group first switches at period {cohort}")
    if lag < 1:
        raise HorizonOutOfRange("placebo lag must be >= 1")
    late, early = cohort - lag, cohort - 1 - lag
    j_late, j_early = _column(data, late), _column(data, early)
    if j_late is None or j_early is None:
        raise HorizonOutOfRange(f"periods {early} and {late} must both exist in the panel")

    F = design.first_switch_code
    treated = np.flatnonzero(F == cohort)
    controls = _control_codes(data, design, control_rule, late)

    grids = data.grids
    obs = grids["observed"]
    ok = obs[:, j_early] & obs[:, j_late]
    treated = treated[ok[treated]]
    controls = controls[ok[controls]]
    if len(treated) == 0:
        raise CohortEmpty(f"cohort {cohort} is not observed at periods {early} and {late}")
    if len(controls) == 0:
        raise NoControls(f"no {control_rule} group is observed at periods {early} and {late}")

    dy = grids["outcome"][:, j_late] - grids["outcome"][:, j_early]
    w = grids["weight"][:, j_late]
    estimate = _wmean(dy[treated], w[treated]) - _wmean(dy[controls], w[controls])
    return CohortHorizonEffect(
        cohort=int(cohort),
        horizon=-(lag + 1),
        estimate=float(estimate),
        n_treated_groups=int(len(treated)),
        n_control_groups=int(len(controls)),
        control_rule=control_rule,
        weight=float(np.sum(w[treated])),
    )


def aggregate_cohort_effects(effects, horizon: int) -> HorizonEstimate:
    """Average cohort effects at one horizon, weighted by cohort population."""
    here = [e for e in effects if e.horizon == horizon]
    if not here:
        raise EmptyHorizon(f"no cohort reaches horizon {horizon}")
    total = sum(e.weight for e in here)
    est = sum(e.weight * e.estimate for e in here) / total
    return HorizonEstimate(
        horizon=int(horizon),
        estimate=float(est),
        n_treated=sum(e.n_treated_groups for e in here),
        weight=float(total),
    )


def cohort_event_study(data: PanelDataset, max_horizon: int | None = None,
                       control_rule: str = "never_treated", placebos: int = 0,
                       bootstrap=None, threads: int = 1) -> EventStudyResult:
    """Aggregate cohort-horizon DIDs into one event-study per control rule.

    Horizons with no computable cohort are reported as gaps.  When a
    bootstrap specification is supplied, standard errors are attached to all
    effects and placebos and the placebo vector gets a joint nullity test.
    """
    design = derive_design(data)
    if not (design.is_binary and design.is_staggered):
        raise NotBinaryStaggered("cohort-horizon DIDs require a binary staggered design")
    if max_horizon is None:
        max_horizon = max(data.periods) - min(design.cohorts) if design.cohorts else 0

    effects, gaps = [], []
    for ell in range(0, max_horizon + 1):
        per_cohort = []
        for c in design.cohorts:
            try:
                per_cohort.append(cohort_effect(data, c, ell, control_rule))
            except (CohortEmpty, NoControls, HorizonOutOfRange):
                continue
        if per_cohort:
            effects.append(aggregate_cohort_effects(per_cohort, ell))
        else:
            gaps.append(ell)
    if not effects or effects[0].horizon != 0:
        raise EmptyHorizon("no cohort has a computable effect at horizon 0")

    placebo_list, placebo_gaps = [], []
    for p in range(1, placebos + 1):
        per_cohort = []
        for c in design.cohorts:
            try:
                per_cohort.append(cohort_placebo(data, c, p, control_rule))
            except (CohortEmpty, NoControls, HorizonOutOfRange):
                continue
        if per_cohort:
            placebo_list.append(aggregate_cohort_effects(per_cohort, -(p + 1)))
        else:
            placebo_gaps.append(-(p + 1))

    result = EventStudyResult(
        effects=tuple(effects),
        placebos=tuple(placebo_list),
        gaps=tuple(gaps),
        placebo_gaps=tuple(placebo_gaps),
    )
    if bootstrap is not None:
        result = _attach_bootstrap(
            result, data, bootstrap, threads,
            lambda d: cohort_event_study(d, max_horizon, control_rule, placebos),
            has_normalized=False,
        )
    return result


# --------------------------------------------------------------------------
# imputation estimator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ImputationResult:
    """Per-cell effect estimates from counterfactual imputation."""

    cell_effects: dict
    att: float
    by_horizon: tuple
    by_cohort_horizon: dict
    trends: str
    n_treated_cells: int


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        self.parent[self.find(i)] = self.find(j)


def _clean_mask(data: PanelDataset, design):
    """Rows never yet treated: before the first switch, or never-switching at dose 0."""
    F = design.first_switch_code[data.group_code]
    base = design.baseline_code[data.group_code]
    return (base == 0.0) & (data.time_values < F)


def imputation_fit(data: PanelDataset, trends: str = "none") -> ImputationResult:
    """Impute untreated counterfactuals for treated cells and average the gaps.

    Group and period effects (optionally plus group-specific linear trends)
    are fitted by weighted least squares on never-yet-treated cells only;
    each treated cell's effect estimate is its outcome minus the prediction.
    Aggregations are population-weighted means over treated cells, overall,
    by horizon, and by (cohort, horizon).

    Raises
    ------
    UnidentifiedFixedEffect
        A treated cell's group or period effect cannot be pinned down by the
        untreated cells (named in the message).
    InsufficientPretrendData
        With ``trends="group_linear"``, a group has fewer than two untreated
        periods.
    """
    if trends not in ("none", "group_linear"):
        raise UnsupportedFeature(f"unknown trends option {trends!r}")
    design = derive_design(data)
    if not design.is_binary:
        raise NotBinaryTreatment("imputation requires a binary treatment")

    clean = _clean_mask(data, design)
    treated = data.treatment == 1.0
    if not treated.any():
        raise CohortEmpty("no treated cell to impute")

    G, T = data.n_groups, data.n_periods
    tv = data.time_values
    clean_groups = set(data.group_code[clean].tolist())
    clean_periods = set(data.time_code[clean].tolist())
    uf = _UnionFind(G + T)
    for i in np.flatnonzero(clean):
        uf.union(data.group_code[i], G + data.time_code[i])
    for i in np.flatnonzero(treated):
        g, t = int(data.group_code[i]), int(data.time_code[i])
        if g not in clean_groups:
            raise UnidentifiedFixedEffect(
                f"group {data.groups[g]!r} has no untreated observation; "
                f"its effect cannot be imputed"
            )
        if t not in clean_periods:
            raise UnidentifiedFixedEffect(
                f"period {data.periods[t]} has no untreated observation; "
                f"effects at that period cannot be imputed"
            )
        if uf.find(g) != uf.find(G + t):
            raise UnidentifiedFixedEffect(
                f"group {data.groups[g]!r} and period {data.periods[t]} are not connected "
                f"through untreated cells"
            )

    idx = np.flatnonzero(clean)
    gc, tc = data.group_code[idx], data.time_code[idx]
    y, w = data.outcome[idx], data.weight[idx]
    t_val = tv[idx].astype(float)

    slope = np.zeros(G)
    if trends == "group_linear":
        present = sorted(clean_groups)
        for g in present:
            if len(set(tc[gc == g].tolist())) < 2:
                raise InsufficientPretrendData(
                    f"group {data.groups[g]!r} has fewer than two untreated periods; "
                    f"its linear trend is not identified"
                )
        ref = present[0]
        names, cols = [], []
        for g in present:
            if g == ref:
                continue
            names.append(f"trend_{data.groups[g]}")
            cols.append(np.where(gc == g, t_val, 0.0))
        if names:
            sub = PanelDataset._from_parts(
                data.groups, data.periods, gc, tc, data.treatment[idx], y, w, None,
                data.weight_mode,
            )
            order = np.lexsort((tc, gc))  # _from_parts re-sorts; align columns the same way
            fit = absorb_and_fit(
                sub, dict(zip(names, [c[order] for c in cols])),
                absorb=("group", "time"), cluster="group", compute_vcov=False,
            )
            for g, name in zip((g for g in present if g != ref), names):
                slope[g] = fit.coefficients[name]

    z = y - slope[gc] * t_val
    alpha, gamma = recover_two_way_effects(z, gc, G, tc, T, w)

    cell_effects, keys, horizons, cohorts, w_list, te_list = {}, [], [], [], [], []
    F = design.first_switch_code
    for i in np.flatnonzero(treated):
        g, t = int(data.group_code[i]), int(data.time_code[i])
        pred = alpha[g] + gamma[t] + slope[g] * float(tv[i])
        te = float(data.outcome[i] - pred)
        key = (data.groups[g], int(tv[i]))
        cell_effects[key] = te
        keys.append(key)
        w_list.append(data.weight[i])
        te_list.append(te)
        horizons.append(int(tv[i] - F[g]) if math.isfinite(F[g]) else None)
        cohorts.append(int(F[g]) if math.isfinite(F[g]) else None)

    w_arr = np.asarray(w_list)
    te_arr = np.asarray(te_list)
    att = _wmean(te_arr, w_arr)

    by_h = []
    for ell in sorted({h for h in horizons if h is not None}):
        sel = np.array([h == ell for h in horizons])
        by_h.append(HorizonEstimate(
            horizon=ell,
            estimate=_wmean(te_arr[sel], w_arr[sel]),
            n_treated=int(sel.sum()),
            weight=float(w_arr[sel].sum()),
        ))
    by_ch = {}
    for pair in sorted({(c, h) for c, h in zip(cohorts, horizons) if c is not None}):
        sel = np.array([(c, h) == pair for c, h in zip(cohorts, horizons)])
        by_ch[pair] = _wmean(te_arr[sel], w_arr[sel])

    return ImputationResult(
        cell_effects=cell_effects,
        att=float(att),
        by_horizon=tuple(by_h),
        by_cohort_horizon=by_ch,
        trends=trends,
        n_treated_cells=int(treated.sum()),
    )


@dataclass(frozen=True)
class ImputationPlacebo:
    """Treatment-lead coefficients fitted on never-yet-treated cells.

    ``estimates[k]`` is the coefficient on the indicator for being
    ``leads[k]`` periods before the first switch, relative to cells at least
    ``max(leads) + 1`` periods before it; all should be zero under parallel
    trends."""

    leads: tuple
    estimates: tuple
    se: tuple
    dropped: tuple
    fit: object


def imputation_placebo(data: PanelDataset, leads: int) -> ImputationPlacebo:
    """Regression of untreated outcomes on group/period effects plus lead dummies."""
    if leads < 0:
        raise WrongShape("the number of leads must be >= 0")
    if leads == 0:
        return ImputationPlacebo(leads=(), estimates=(), se=(), dropped=(), fit=None)
    design = derive_design(data)
    if not design.is_binary:
        raise NotBinaryTreatment("imputation requires a binary treatment")
    clean = _clean_mask(data, design)
    idx = np.flatnonzero(clean)
    gc, tc = data.group_code[idx], data.time_code[idx]
    F = design.first_switch_code[data.group_code[idx]]
    tv = data.time_values[idx].astype(float)

    names, cols, dropped = [], [], []
    for k in range(1, leads + 1):
        col = np.where(np.isfinite(F), (tv == F - k).astype(float), 0.0)
        if col.any():
            names.append(f"lead_{k}")
            cols.append(col)
        else:
            dropped.append(k)
    if not names:
        return ImputationPlacebo(leads=(), estimates=(), se=(), dropped=tuple(dropped), fit=None)

    sub = PanelDataset._from_parts(
        data.groups, data.periods, gc, tc, data.treatment[idx], data.outcome[idx],
        data.weight[idx], None, data.weight_mode,
    )
    order = np.lexsort((tc, gc))
    fit = absorb_and_fit(
        sub, dict(zip(names, [c[order] for c in cols])),
        absorb=("group", "time"), cluster="group",
    )
    ks = tuple(int(n.split("_")[1]) for n in fit.term_names)
    return ImputationPlacebo(
        leads=ks,
        estimates=tuple(fit.coefficients[n] for n in fit.term_names),
        se=tuple(fit.se.get(n) for n in fit.term_names),
        dropped=tuple(dropped),
        fit=fit,
    )


# --------------------------------------------------------------------------
# first-switch estimators for general designs
# --------------------------------------------------------------------------

def first_switch_effect(data: PanelDataset, group, horizon: int) -> float:
    """Outcome change of one switcher versus same-baseline groups that have
    not yet switched, from the period before its first switch to ``horizon``
    periods after.

    Works for any dose path: the contrast estimates the deviation from the
    group's status-quo outcome, not a per-unit effect.
    """
    design = derive_design(data)
    if group not in design.first_switch:
        raise WrongShape(f"unknown group {group!r}")
    F = design.first_switch[group]
    if F == NEVER:
        raise HorizonOutOfRange(f"group {group!r} never switches; horizons are undefined")
    if horizon < 0:
        raise HorizonOutOfRange("horizon must be >= 0")
    target, base = F + horizon, F - 1
    j_target, j_base = _column(data, target), _column(data, base)
    if j_target is None or j_base is None:
        raise HorizonOutOfRange(f"periods {base} and {target} must both exist in the panel")

    g = data.groups.index(group)
    grids = data.grids
    obs = grids["observed"]
    if not (obs[g, j_base] and obs[g, j_target]):
        raise HorizonOutOfRange(
            f"group {group!r} is not observed at both periods {base} and {target}"
        )
    baseline = design.baseline_code[g]
    Fall = design.first_switch_code
    controls = np.flatnonzero(
        (design.baseline_code == baseline) & (Fall > target)
    )
    controls = controls[obs[controls, j_base] & obs[controls, j_target]]
    controls = controls[controls != g]
    if len(controls) == 0:
        raise NoControls(
            f"no group with baseline dose {baseline} is still unswitched at period {target}"
        )
    dy = grids["outcome"][:, j_target] - grids["outcome"][:, j_base]
    w = grids["weight"][:, j_target]
    return float(dy[g] - _wmean(dy[controls], w[controls]))


def first_switch_event_study(data: PanelDataset, max_horizon: int = 0,
                             placebos: int = 0, bootstrap=None,
                             threads: int = 1,
                             horizon_weights: str = "switcher_cells") -> EventStudyResult:
    """Aggregate first-switch contrasts into an event-study for general designs.

    At each horizon the per-group contrasts are averaged with switcher
    population weights, multiplying by minus one the groups whose first
    change lowered their dose, so every term measures the effect of weakly
    more treatment.  ``first_stage`` reports the matching average absolute
    dose change, and ``normalized_effect`` is the ratio of the
    horizon-averaged effects to the horizon-averaged first stage, averaging
    across horizons with the switcher-cell populations observed at each
    horizon (``horizon_weights="switcher_cells"``, the default) or equally
    (``"equal"``).  Placebo ``p`` (displayed at horizon ``-(p + 2)``)
    applies the same contrast to the window from ``p + 1`` periods before
    the switch to the last pre-switch period.
    """
    if horizon_weights not in ("switcher_cells", "equal"):
        raise UnsupportedFeature(f"unknown horizon_weights option {horizon_weights!r}")
    design = derive_design(data)
    grids = data.grids
    obs = grids["observed"]
    F = design.first_switch_code
    baseline = design.baseline_code
    switchers = np.flatnonzero(np.isfinite(F))

    def contrast(g, j_from, j_to, target_for_controls):
        ctrl = np.flatnonzero(
            (baseline == baseline[g]) & (F > target_for_controls)
        )
        ctrl = ctrl[obs[ctrl, j_from] & obs[ctrl, j_to]]
        ctrl = ctrl[ctrl != g]
        if len(ctrl) == 0:
            return None
        dy = grids["outcome"][:, j_to] - grids["outcome"][:, j_from]
        w = grids["weight"][:, j_to]
        return float(dy[g] - _wmean(dy[ctrl], w[ctrl]))

    effects, gaps, first_stage, horizon_weight_of, horizon_fs = [], [], [], {}, {}
    for ell in range(0, max_horizon + 1):
        num = wsum = fs_num = 0.0
        n_used = 0
        for g in switchers:
            target, base = int(F[g]) + ell, int(F[g]) - 1
            j_t, j_b = _column(data, target), _column(data, base)
            if j_t is None or j_b is None or not (obs[g, j_t] and obs[g, j_b]):
                continue
            value = contrast(g, j_b, j_t, target)
            if value is None:
                continue
            sign = -1.0 if grids["treatment"][g, data.periods.index(int(F[g]))] < baseline[g] else 1.0
            wgt = grids["weight"][g, j_t]
            num += wgt * sign * value
            fs_num += wgt * abs(grids["treatment"][g, j_t] - baseline[g])
            wsum += wgt
            n_used += 1
        if n_used:
            effects.append(HorizonEstimate(ell, num / wsum, n_treated=n_used, weight=wsum))
            first_stage.append((ell, fs_num / wsum))
            horizon_weight_of[ell] = wsum
            horizon_fs[ell] = fs_num / wsum
        else:
            gaps.append(ell)
    if not effects or effects[0].horizon != 0:
        raise EmptyHorizon("no switcher has a computable contrast at horizon 0")

    omega = {ell: (w if horizon_weights == "switcher_cells" else 1.0)
             for ell, w in horizon_weight_of.items()}
    num = sum(omega[e.horizon] * e.estimate for e in effects)
    den = sum(omega[ell] * horizon_fs[ell] for ell in omega)
    normalized = (num / den if den != 0.0 else math.nan, None)

    placebo_list, placebo_gaps = [], []
    for p in range(0, placebos):
        num = wsum = 0.0
        n_used = 0
        for g in switchers:
            start, end = int(F[g]) - p - 2, int(F[g]) - 1
            j_s, j_e = _column(data, start), _column(data, end)
            if j_s is None or j_e is None or not (obs[g, j_s] and obs[g, j_e]):
                continue
            value = contrast(g, j_s, j_e, int(F[g]) + p)
            if value is None:
                continue
            sign = -1.0 if grids["treatment"][g, data.periods.index(int(F[g]))] < baseline[g] else 1.0
            wgt = grids["weight"][g, j_e]
            num += wgt * sign * value
            wsum += wgt
            n_used += 1
        if n_used:
            placebo_list.append(HorizonEstimate(-(p + 2), num / wsum, n_treated=n_used, weight=wsum))
        else:
            placebo_gaps.append(-(p + 2))

    result = EventStudyResult(
        effects=tuple(effects),
        placebos=tuple(placebo_list),
        first_stage=tuple(first_stage),
        normalized_effect=normalized,
        gaps=tuple(gaps),
        placebo_gaps=tuple(placebo_gaps),
    )
    if bootstrap is not None:
        result = _attach_bootstrap(
            result, data, bootstrap, threads,
            lambda d: first_switch_event_study(d, max_horizon, placebos,
                                               horizon_weights=horizon_weights),
            has_normalized=True,
        )
    return result


# --------------------------------------------------------------------------
# bootstrap wiring shared by the event-study builders
# --------------------------------------------------------------------------

def _result_vector(result: EventStudyResult, effect_hs, placebo_hs, has_normalized):
    values = []
    eff = {e.horizon: e.estimate for e in result.effects}
    plc = {e.horizon: e.estimate for e in result.placebos}
    for h in effect_hs:
        if h not in eff:
            raise EmptyHorizon(f"replicate lost horizon {h}")
        values.append(eff[h])
    for h in placebo_hs:
        if h not in plc:
            raise EmptyHorizon(f"replicate lost placebo horizon {h}")
        values.append(plc[h])
    if has_normalized:
        values.append(result.normalized_effect[0])
    return np.asarray(values)


def _attach_bootstrap(result, data, spec, threads, rebuild, has_normalized):
    from .inference import DegenerateCovariance, cluster_bootstrap, joint_placebo_test

    effect_hs = [e.horizon for e in result.effects]
    placebo_hs = [e.horizon for e in result.placebos]

    def closure(d):
        return _result_vector(rebuild(d), effect_hs, placebo_hs, has_normalized)

    boot = cluster_bootstrap(data, closure, spec, threads=threads)
    se = np.atleast_1d(boot.se)
    n_eff = len(effect_hs)
    n_plc = len(placebo_hs)
    effects = tuple(replace(e, se=float(se[i])) for i, e in enumerate(result.effects))
    placebos = tuple(replace(e, se=float(se[n_eff + i])) for i, e in enumerate(result.placebos))
    normalized = result.normalized_effect
    if has_normalized and normalized is not None:
        normalized = (normalized[0], float(se[n_eff + n_plc]))

    joint = None
    if n_plc:
        draws = np.atleast_2d(boot.replicates)[:, n_eff:n_eff + n_plc]
        point = np.array([e.estimate for e in result.placebos])
        try:
            joint = joint_placebo_test(point, draws)
        except DegenerateCovariance:
            joint = None
    return replace(
        result, effects=effects, placebos=placebos,
        normalized_effect=normalized, joint_placebo=joint,
    )
