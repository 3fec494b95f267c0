"""Heterogeneity-robust estimators that rule out dynamic effects.

Each period-to-period treatment change is compared against groups whose
dose stayed exactly at the switchers' baseline value, and the comparison
is scaled by the switchers' average absolute dose change, so the estimand
is a per-unit-of-treatment effect averaged over switching cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientPreperiods,
    NoControls,
    NoSwitchersIn,
    NoSwitchersOut,
    NotBinaryTreatment,
    NoValidComparisons,
    WrongShape,
    ZeroDenominator,
)
from .panel import PanelDataset


@dataclass(frozen=True)
class PeriodComponents:
    time: int
    did_plus: float | None
    did_minus: float | None
    n_switchers_in: int
    n_switchers_out: int


@dataclass(frozen=True)
class DidMResult:
    """Average per-unit effect across switching cells, with per-period detail.

    Periods where no valid control group exists contribute nothing: they are
    absent from ``per_period`` rather than entered as zero.
    """

    estimate: float
    per_period: tuple
    n_switching_cells: int
    placebo_estimates: tuple = ()


def _pairs_at(data: PanelDataset, t: int):
    """Rows of groups observed at both t-1 and t, keyed by group code."""
    if t not in data.periods or (t - 1) not in data.periods:
        raise WrongShape(f"periods {t - 1} and {t} are not both present in the panel")
    j_prev = data.periods.index(t - 1)
    j_curr = data.periods.index(t)
    grids = data.grids
    obs = grids["observed"]
    have = obs[:, j_prev] & obs[:, j_curr]
    codes = np.flatnonzero(have)
    d_prev = grids["treatment"][codes, j_prev]
    d_curr = grids["treatment"][codes, j_curr]
    dy = grids["outcome"][codes, j_curr] - grids["outcome"][codes, j_prev]
    w = grids["weight"][codes, j_curr]
    return codes, d_prev, d_curr, dy, w


def _wmean(values, weights):
    return float(np.sum(values * weights) / np.sum(weights))


def did_plus(data: PanelDataset, t: int) -> float:
    """Outcome-change contrast at period t: switchers into treatment vs stable untreated."""
    codes, d_prev, d_curr, dy, w = _pairs_at(data, t)
    if not np.all(np.isin(d_prev, (0.0, 1.0))) or not np.all(np.isin(d_curr, (0.0, 1.0))):
        raise NotBinaryTreatment(f"treatment is not binary at periods {t - 1} and {t}")
    sw = (d_prev == 0.0) & (d_curr == 1.0)
    ctrl = (d_prev == 0.0) & (d_curr == 0.0)
    if not sw.any():
        raise NoSwitchersIn(f"no group switches into treatment between {t - 1} and {t}")
    if not ctrl.any():
        raise NoControls(f"no group is untreated at both {t - 1} and {t}")
    return _wmean(dy[sw], w[sw]) - _wmean(dy[ctrl], w[ctrl])


def did_minus(data: PanelDataset, t: int) -> float:
    """Outcome-change contrast at period t: stable treated vs switchers out of treatment."""
    codes, d_prev, d_curr, dy, w = _pairs_at(data, t)
    if not np.all(np.isin(d_prev, (0.0, 1.0))) or not np.all(np.isin(d_curr, (0.0, 1.0))):
        raise NotBinaryTreatment(f"treatment is not binary at periods {t - 1} and {t}")
    sw = (d_prev == 1.0) & (d_curr == 0.0)
    ctrl = (d_prev == 1.0) & (d_curr == 1.0)
    if not sw.any():
        raise NoSwitchersOut(f"no group switches out of treatment between {t - 1} and {t}")
    if not ctrl.any():
        raise NoControls(f"no group is treated at both {t - 1} and {t}")
    return _wmean(dy[ctrl], w[ctrl]) - _wmean(dy[sw], w[sw])


@dataclass(frozen=True)
class _Component:
    """One (period, baseline dose, direction) switcher-vs-stayer comparison."""

    time: int
    baseline: float
    direction: int            # +1 switch up, -1 switch down
    estimate: float
    weight: float             # population weight of the switching cells
    n_switchers: int
    switcher_codes: np.ndarray
    stayer_codes: np.ndarray


def _components(data: PanelDataset):
    """All computable switcher-vs-stayer comparisons between consecutive periods."""
    out = []
    for t_prev, t in zip(data.periods[:-1], data.periods[1:]):
        if t != t_prev + 1:
            continue
        codes, d_prev, d_curr, dy, w = _pairs_at(data, t)
        delta = d_curr - d_prev
        for d in np.unique(d_prev):
            from_d = d_prev == d
            stay = from_d & (delta == 0.0)
            if not stay.any():
                continue
            base_change = _wmean(dy[stay], w[stay])
            for direction in (+1, -1):
                sw = from_d & (direction * delta > 0)
                if not sw.any():
                    continue
                intensity = _wmean(np.abs(delta[sw]), w[sw])
                gap = _wmean(dy[sw], w[sw]) - base_change
                out.append(_Component(
                    time=t,
                    baseline=float(d),
                    direction=direction,
                    estimate=direction * gap / intensity,
                    weight=float(np.sum(w[sw])),
                    n_switchers=int(np.sum(sw)),
                    switcher_codes=codes[sw],
                    stayer_codes=codes[stay],
                ))
    return out


def did_m(data: PanelDataset, placebos: int = 0) -> DidMResult:
    """Per-unit effect averaged over all switching cells, binary or discrete dose.

    For every pair of consecutive periods and every baseline dose, groups
    leaving the dose are compared with groups staying exactly at it, scaled
    by the switchers' mean absolute dose change; up- and down-switchers form
    separate comparisons so the per-unit orientation is preserved.
    Components are averaged with population-weighted switching-cell counts.
    """
    comps = _components(data)
    if not comps:
        raise NoValidComparisons("no period offers both switchers and same-dose stayers")
    total_w = sum(c.weight for c in comps)
    estimate = sum(c.weight * c.estimate for c in comps) / total_w

    per_period = []
    for t in data.periods[1:]:
        here = [c for c in comps if c.time == t]
        if not here:
            continue
        ups = [c for c in here if c.direction > 0]
        downs = [c for c in here if c.direction < 0]
        per_period.append(PeriodComponents(
            time=t,
            did_plus=(sum(c.weight * c.estimate for c in ups) / sum(c.weight for c in ups)) if ups else None,
            did_minus=(sum(c.weight * c.estimate for c in downs) / sum(c.weight for c in downs)) if downs else None,
            n_switchers_in=sum(c.n_switchers for c in ups),
            n_switchers_out=sum(c.n_switchers for c in downs),
        ))

    placebo_estimates = tuple(did_m_placebo(data, placebos)) if placebos else ()
    return DidMResult(
        estimate=float(estimate),
        per_period=tuple(per_period),
        n_switching_cells=sum(c.n_switchers for c in comps),
        placebo_estimates=placebo_estimates,
    )


def _stable_over(data: PanelDataset, codes: np.ndarray, dose: float, t_from: int, t_to: int):
    """Subset of group codes observed at every period of [t_from, t_to] with dose held fixed."""
    grids = data.grids
    cols = [j for j, p in enumerate(data.periods) if t_from <= p <= t_to]
    if len(cols) != (t_to - t_from + 1):
        return np.array([], dtype=np.int64)
    fully_observed = grids["observed"][np.ix_(codes, cols)].all(axis=1)
    codes = codes[fully_observed]
    tr = grids["treatment"][np.ix_(codes, cols)]
    same = np.abs(tr - dose).max(axis=1) == 0.0 if len(codes) else np.array([], dtype=bool)
    return codes[same]


def did_m_placebo(data: PanelDataset, horizon: int) -> list:
    """Pre-switch trend contrasts mirroring each comparison behind :func:`did_m`.

    For each placebo lag p in 1..horizon, the switchers and stayers of every
    component are compared over the strictly pre-switch window
    [t-1-p, t-1], requiring the dose to sit at the baseline value throughout;
    results are aggregated with the same weights as the effects and scaled by
    the same switch intensity.  All placebos are zero under exactly parallel
    trends.
    """
    if horizon < 1:
        raise WrongShape("placebo horizon must be a positive integer")
    comps = _components(data)
    if not comps:
        raise NoValidComparisons("no period offers both switchers and same-dose stayers")

    grids = data.grids
    period_col = {p: j for j, p in enumerate(data.periods)}
    out = []
    for p in range(1, horizon + 1):
        acc_num = acc_w = 0.0
        for comp in comps:
            t_from = comp.time - 1 - p
            t_to = comp.time - 1
            if t_from < data.periods[0]:
                continue
            sw = _stable_over(data, comp.switcher_codes, comp.baseline, t_from, t_to)
            st = _stable_over(data, comp.stayer_codes, comp.baseline, t_from, t_to)
            if len(sw) == 0 or len(st) == 0:
                continue
            j_from, j_to, j_t = period_col[t_from], period_col[t_to], period_col[comp.time]
            dy_sw = grids["outcome"][sw, j_to] - grids["outcome"][sw, j_from]
            dy_st = grids["outcome"][st, j_to] - grids["outcome"][st, j_from]
            w_sw = grids["weight"][sw, j_t]
            w_st = grids["weight"][st, j_t]
            # intensity of the switch these groups will make at comp.time
            dj_prev = grids["treatment"][sw, period_col[comp.time - 1]]
            dj_curr = grids["treatment"][sw, j_t]
            intensity = _wmean(np.abs(dj_curr - dj_prev), w_sw)
            est = comp.direction * (_wmean(dy_sw, w_sw) - _wmean(dy_st, w_st)) / intensity
            weight = float(np.sum(w_sw))
            acc_num += weight * est
            acc_w += weight
        if acc_w == 0.0:
            raise InsufficientPreperiods(
                f"no comparison has {p + 1} pre-switch periods for placebo lag {p}"
            )
        out.append(acc_num / acc_w)
    return out


def wald_did(data: PanelDataset) -> float:
    """Outcome-change DID scaled by the treatment-change DID on a 2x2 panel."""
    if data.n_groups != 2 or data.n_periods != 2 or data.n_rows != 4:
        raise WrongShape(
            f"the Wald-DID needs exactly 2 groups x 2 periods, "
            f"got {data.n_groups} x {data.n_periods}"
        )
    grids = data.grids
    dy = grids["outcome"][:, 1] - grids["outcome"][:, 0]
    dd = grids["treatment"][:, 1] - grids["treatment"][:, 0]
    num = dy[0] - dy[1]
    den = dd[0] - dd[1]
    scale = max(np.max(np.abs(grids["treatment"])), 1.0)
    if abs(den) <= 1e-12 * scale:
        raise ZeroDenominator("both groups' treatments change by the same amount")
    return float(num / den)
