"""Robustness diagnostics for two-way fixed-effects regressions.

Three decompositions of regression coefficients into treatment effects:

* per-cell weights attached to the static coefficient (which may be
  negative, enabling sign reversals),
* the exhaustive set of 2x2 difference-in-differences comparisons between
  treatment-timing cohorts, with the share placed on comparisons whose
  control is treated at both window endpoints ("forbidden" comparisons),
* own-horizon and cross-horizon ("contamination") weights attached to each
  event-study coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .errors import (
    MissingProxy,
    NotBinaryStaggered,
    NoValidComparisons,
    UnbalancedPanel,
    UnsupportedFeature,
    ZeroVariance,
)
from .lsq import (
    EventStudySpec,
    fit_event_study,
    fit_first_difference,
    fit_twfe,
    relative_time,
    residualize,
)
from .panel import PanelDataset, derive_design


@dataclass(frozen=True)
class WeightTable:
    """Per-cell decomposition weights of a static regression coefficient.

    Entries cover exactly the cells with nonzero treatment; the weights sum
    to one, but individual weights may be negative.
    """

    entries: tuple  # of (group, time, weight)
    positive_count: int
    negative_count: int
    positive_sum: float
    negative_sum: float
    estimand_kind: str

    @property
    def total(self) -> float:
        return self.positive_sum + self.negative_sum

    def as_dict(self) -> dict:
        return {(g, t): w for g, t, w in self.entries}


def _make_weight_table(cells, kind) -> WeightTable:
    weights = np.array([w for _, _, w in cells])
    return WeightTable(
        entries=tuple(cells),
        positive_count=int(np.sum(weights > 0)),
        negative_count=int(np.sum(weights < 0)),
        positive_sum=float(weights[weights > 0].sum()),
        negative_sum=float(weights[weights < 0].sum()),
        estimand_kind=kind,
    )


def static_weights(data: PanelDataset, target: str = "fe") -> WeightTable:
    """Decomposition weights of the static coefficient over treated cells.

    For ``target="fe"`` the weight on cell (g, t) is the coefficient's
    influence on that cell times its treatment dose; on a balanced
    uniform-weight panel this reduces to the classic closed form
    ``w * (D_gt - D_g. - D_.t + D_..) * D_gt``, normalized to sum to one.
    For ``target="fd"`` the influence of the first-difference regression is
    telescoped back to cell level before multiplying by the dose.

    The ``"feS"``/``"fdS"`` variants (decompositions valid only when effects
    are constant over time) are reserved but not implemented.
    """
    if target in ("feS", "fdS"):
        raise UnsupportedFeature(f"weight variant {target!r} is reserved but not implemented")
    if target not in ("fe", "fd"):
        raise UnsupportedFeature(f"unknown weight target {target!r}; use 'fe' or 'fd'")

    if target == "fe":
        fit = fit_twfe(data, compute_vcov=False)
        c = fit.influence["treatment"]
        cells = []
        for i, (g, t) in enumerate(fit.row_keys):
            d = data.treatment[i]
            if d != 0.0:
                cells.append((g, t, float(c[i] * d)))
        return _make_weight_table(cells, "static_fe")

    fit = fit_first_difference(data, compute_vcov=False)
    c_pair = {key: fit.influence["treatment"][i] for i, key in enumerate(fit.row_keys)}
    cells = []
    tv = data.time_values
    for i in range(data.n_rows):
        d = data.treatment[i]
        if d == 0.0:
            continue
        g = data.groups[data.group_code[i]]
        t = int(tv[i])
        c_here = c_pair.get((g, t), 0.0)
        c_next = c_pair.get((g, t + 1), 0.0)
        w = (c_here - c_next) * d
        cells.append((g, t, float(w)))
    return _make_weight_table(cells, "static_fd")


def _weighted_corr(x, y, w):
    w = w / w.sum()
    mx = float(np.sum(w * x))
    my = float(np.sum(w * y))
    vx = float(np.sum(w * (x - mx) ** 2))
    vy = float(np.sum(w * (y - my) ** 2))
    if vx <= 1e-300 * max(1.0, mx * mx) or vy <= 1e-300 * max(1.0, my * my):
        raise ZeroVariance("correlation undefined: a variable is constant over the weighted cells")
    cov = float(np.sum(w * (x - mx) * (y - my)))
    return cov / math.sqrt(vx * vy)


def _table_cells(weights: WeightTable, data: PanelDataset):
    index = {(data.groups[data.group_code[i]], int(data.time_values[i])): i for i in range(data.n_rows)}
    rows = [index[(g, t)] for g, t, _ in weights.entries]
    w_vals = np.array([w for _, _, w in weights.entries])
    return np.asarray(rows, dtype=np.int64), w_vals


def weight_proxy_correlation(weights: WeightTable, data: PanelDataset) -> float:
    """Population-weighted correlation between decomposition weights and the proxy.

    A strong correlation signals that the regression systematically up- or
    down-weights cells whose effects the proxy tracks.
    """
    rows, w_vals = _table_cells(weights, data)
    if data.proxy is None:
        raise MissingProxy("the panel has no proxy column")
    proxy = data.proxy[rows]
    if np.any(np.isnan(proxy)):
        g, t, _ = weights.entries[int(np.argmax(np.isnan(proxy)))]
        raise MissingProxy(f"proxy missing on weighted cell (group={g!r}, time={t})")
    return _weighted_corr(w_vals, proxy, data.weight[rows])


def weight_time_correlation(weights: WeightTable, data: PanelDataset) -> float:
    """Population-weighted correlation between decomposition weights and the period."""
    rows, w_vals = _table_cells(weights, data)
    return _weighted_corr(w_vals, data.time_values[rows].astype(float), data.weight[rows])


# --------------------------------------------------------------------------
# 2x2 comparisons between timing cohorts
# --------------------------------------------------------------------------

VS_UNTREATED = "vs_untreated"
VS_NOT_YET_TREATED = "vs_not_yet_treated"
VS_ALREADY_TREATED = "vs_already_treated"


@dataclass(frozen=True)
class Comparison:
    treated: object          # cohort label: switch period, "never_treated", "always_treated"
    control: object
    window: tuple            # inclusive (start period, end period)
    weight: float
    did: float
    kind: str


@dataclass(frozen=True)
class DecompositionReport:
    """The static coefficient written as a convex combination of 2x2 DIDs."""

    comparisons: tuple
    forbidden_share: float
    reconstruction: float
    beta_fe: float


def _collapse_cohorts(data: PanelDataset, design):
    """Aggregate groups into timing cohorts; valid because treatment paths are
    identical within a cohort and weights are constant over time."""
    F = design.first_switch_code
    base = design.baseline_code
    cohort_of = {}
    for g in range(data.n_groups):
        if math.isfinite(F[g]):
            cohort_of[g] = int(F[g])
        elif base[g] == 0.0:
            cohort_of[g] = "never_treated"
        else:
            cohort_of[g] = "always_treated"
    labels = sorted({v for v in cohort_of.values() if isinstance(v, int)})
    labels += [s for s in ("never_treated", "always_treated") if s in cohort_of.values()]

    T = data.n_periods
    grids = data.grids
    Y, W = grids["outcome"], grids["weight"]
    out = {}
    for lab in labels:
        members = [g for g, v in cohort_of.items() if v == lab]
        wsub = W[members, :]
        ysub = Y[members, :]
        n_t = wsub.sum(axis=0)
        ybar = (wsub * ysub).sum(axis=0) / n_t
        if lab == "never_treated":
            dose = np.zeros(T)
        elif lab == "always_treated":
            dose = np.ones(T)
        else:
            dose = grids["treatment"][members[0], :]
        out[lab] = {"ybar": ybar, "n": n_t, "d": dose}
    return labels, out


def _two_by_two(a, b, stats, window_mask):
    """TWFE coefficient and demeaned-treatment variance on a 2-cohort window."""
    cols = np.flatnonzero(window_mask)
    m = len(cols)
    y = np.concatenate([stats[a]["ybar"][cols], stats[b]["ybar"][cols]])
    d = np.concatenate([stats[a]["d"][cols], stats[b]["d"][cols]])
    w = np.concatenate([stats[a]["n"][cols], stats[b]["n"][cols]])
    gcode = np.repeat(np.array([0, 1]), m)
    tcode = np.tile(np.arange(m), 2)
    d_tilde = residualize(d, [(gcode, 2), (tcode, m)], w)
    denom = float(np.sum(w * d_tilde * d))
    beta = float(np.sum(w * d_tilde * y) / denom)
    variance = float(np.sum(w * d_tilde * d_tilde) / np.sum(w))
    size = float(np.sum(w))
    return beta, variance, size


def decompose_2x2(data: PanelDataset) -> DecompositionReport:
    """Enumerate the 2x2 DID comparisons behind the static coefficient.

    Requires a binary staggered design on a balanced panel whose weights are
    constant within each group over time (the decomposition identity needs
    the panel to behave like population-weighted groups).  Each comparison's
    value is the two-way fixed-effects coefficient on its two-cohort
    subsample; its weight is ``share**2 * variance`` of the demeaned
    treatment within the subsample, normalized across comparisons.
    """
    design = derive_design(data)
    if not (design.is_binary and design.is_staggered):
        raise NotBinaryStaggered("the 2x2 decomposition requires a binary staggered design")
    if not data.is_balanced:
        raise UnbalancedPanel("the 2x2 decomposition requires a balanced panel")
    W = data.grids["weight"]
    if np.max(np.abs(W - W[:, :1])) > 1e-12 * np.max(W):
        raise UnbalancedPanel(
            "the 2x2 decomposition requires weights constant within each group over time"
        )

    labels, stats = _collapse_cohorts(data, design)
    switch_cohorts = [lab for lab in labels if isinstance(lab, int)]
    if not switch_cohorts:
        raise NoValidComparisons("no group ever switches treatment")

    periods = np.asarray(data.periods)
    total_w = float(data.weight.sum())
    raw = []
    for a in switch_cohorts:
        for x in labels:
            if x == a:
                continue
            if x == "never_treated":
                window = np.ones(len(periods), dtype=bool)
                kind = VS_UNTREATED
            elif x == "always_treated":
                window = np.ones(len(periods), dtype=bool)
                kind = VS_ALREADY_TREATED
            elif x > a:
                window = periods < x  # control not yet treated anywhere in the window
                kind = VS_NOT_YET_TREATED
            else:
                window = periods >= x  # control treated throughout the window
                kind = VS_ALREADY_TREATED
            did, variance, size = _two_by_two(a, x, stats, window)
            share = size / total_w
            wsel = periods[window]
            raw.append((a, x, (int(wsel[0]), int(wsel[-1])), kind, did, share * share * variance))

    total = sum(r[-1] for r in raw)
    comparisons = tuple(
        Comparison(treated=a, control=x, window=win, weight=num / total, did=did, kind=kind)
        for a, x, win, kind, did, num in raw
    )
    forbidden = sum(c.weight for c in comparisons if c.kind == VS_ALREADY_TREATED)
    reconstruction = sum(c.weight * c.did for c in comparisons)
    beta = fit_twfe(data, compute_vcov=False).coefficients["treatment"]
    return DecompositionReport(
        comparisons=comparisons,
        forbidden_share=float(forbidden),
        reconstruction=float(reconstruction),
        beta_fe=float(beta),
    )


# --------------------------------------------------------------------------
# event-study own and contamination weights
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ContaminationTable:
    """Weights an event-study coefficient places on effects at each horizon.

    ``own_weights`` (summing to one) multiply effects at the coefficient's
    own horizon; ``contamination[h]`` (each summing to zero when the
    regression includes an exact indicator for every observed horizon)
    multiply effects at other nonnegative horizons.
    """

    target: int
    own_weights: dict
    own_sum: float
    contamination: dict          # horizon -> {group: weight}
    contamination_sums: dict     # horizon -> float


def event_study_weights(data: PanelDataset, spec: EventStudySpec, target: int) -> ContaminationTable:
    """Per-group weights that the coefficient at ``target`` puts on every horizon.

    Works for effect targets (>= 0) and placebo targets (<= -2).  Weights
    are summed from the coefficient's influence representation over each
    group's cells at each nonnegative relative time.
    """
    fit = fit_event_study(data, spec, compute_vcov=False)
    term = next(
        (name for name, (mode, ell) in (fit.term_meta or {}).items()
         if ell == target and mode == "eq"),
        None,
    )
    if term is None:
        term = next(
            (name for name, (mode, ell) in (fit.term_meta or {}).items() if ell == target),
            None,
        )
    if term is None:
        raise UnsupportedFeature(
            f"relative time {target} is not a coefficient of this event-study specification"
        )

    c = fit.influence[term]
    rel = relative_time(data)
    horizons = sorted({int(r) for r in rel[np.isfinite(rel)] if r >= 0})

    by_h = {}
    for h in horizons:
        acc = {}
        mask = rel == h
        for i in np.flatnonzero(mask):
            g = data.groups[data.group_code[i]]
            acc[g] = acc.get(g, 0.0) + float(c[i])
        by_h[h] = acc
    if target < 0:
        own = {}
        mask = rel == target
        for i in np.flatnonzero(mask):
            g = data.groups[data.group_code[i]]
            own[g] = own.get(g, 0.0) + float(c[i])
        contamination = by_h
    else:
        own = by_h.pop(target, {})
        contamination = by_h

    return ContaminationTable(
        target=target,
        own_weights=own,
        own_sum=float(sum(own.values())),
        contamination={h: d for h, d in contamination.items()},
        contamination_sums={h: float(sum(d.values())) for h, d in contamination.items()},
    )
