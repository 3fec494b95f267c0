"""Synthetic panel generators with exact ground truth.

Every generator builds untreated potential outcomes with exactly common
period effects (optionally plus group trends and additive noise), then adds
treatment effects on top, so the returned ground truth is exact regardless
of the noise draw.  Two deterministic textbook designs are provided: an
early/late adoption panel on which the two-way fixed-effects coefficient is
negative although every effect is positive, and a two-period more-/less-dose
panel with the same sign reversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import EmptySelection, InvalidSpec
from .panel import NEVER, PanelDataset

_KINDS = ("fig1_early_late", "fig2_more_less", "staggered", "parallel_custom")

_ALLOWED = {
    "fig1_early_late": {"te_early", "te_late", "never_treated", "noise_sd"},
    "fig2_more_less": {"slope_more", "slope_less", "dose_more", "dose_less", "noise_sd"},
    "staggered": {
        "n_periods", "cohorts", "never_treated", "effect", "effect_fn", "noise_sd",
        "group_effects", "period_effects", "weights", "switcher_trend",
    },
    "parallel_custom": {
        "n_groups", "n_periods", "doses", "change_prob", "effect_scale",
        "effect_offset", "noise_sd", "weights",
    },
}


@dataclass(frozen=True)
class DgpSpec:
    """Recipe for one synthetic panel: a kind, its parameters, and a seed."""

    kind: str
    parameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidSpec(f"unknown DGP kind {self.kind!r}; choose from {_KINDS}")
        unknown = set(self.parameters) - _ALLOWED[self.kind]
        if unknown:
            raise InvalidSpec(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        if float(self.parameters.get("noise_sd", 0.0)) < 0:
            raise InvalidSpec("noise_sd must be >= 0")


@dataclass(frozen=True)
class GroundTruth:
    """Exact effects behind a generated panel.

    ``cell_effects`` maps treated (group, time) cells to the per-unit effect
    embedded in the outcome; ``cohort_effects`` maps (cohort, horizon) to the
    effect level where the design has one.
    """

    cell_effects: dict
    cell_weights: dict
    first_switch: dict
    cohort_effects: dict | None = None


def generate(spec: DgpSpec):
    """Build the panel described by ``spec``.

    Returns
    -------
    (PanelDataset, GroundTruth)
    """
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "fig1_early_late":
        return _gen_fig1(spec.parameters, rng)
    if spec.kind == "fig2_more_less":
        return _gen_fig2(spec.parameters, rng)
    if spec.kind == "staggered":
        return _gen_staggered(spec.parameters, rng)
    return _gen_parallel_custom(spec.parameters, rng)


def _finish(groups, periods, D, Y, W, effects, first_switch, cohort_effects=None):
    G, T = D.shape
    data = PanelDataset.from_arrays(
        group=[g for g in groups for _ in periods],
        time=[t for _ in groups for t in periods],
        treatment=D.ravel(),
        outcome=Y.ravel(),
        weight=W.ravel(),
        weight_mode="supplied" if not np.all(W == 1.0) else "uniform",
    )
    cell_weights = {
        (groups[i], periods[j]): float(W[i, j]) for i in range(G) for j in range(T)
    }
    truth = GroundTruth(
        cell_effects=effects,
        cell_weights=cell_weights,
        first_switch=first_switch,
        cohort_effects=cohort_effects,
    )
    return data, truth


def _gen_fig1(params, rng):
    te_early = tuple(float(v) for v in params.get("te_early", (1.0, 4.0)))
    te_late = tuple(float(v) for v in params.get("te_late", (1.0,)))
    n_never = int(params.get("never_treated", 0))
    noise_sd = float(params.get("noise_sd", 0.0))
    if len(te_early) != 2 or len(te_late) != 1:
        raise InvalidSpec("fig1 needs two early-group effects and one late-group effect")

    groups = ["early", "late"] + [f"never_{i + 1}" for i in range(n_never)]
    periods = [1, 2, 3]
    G = len(groups)
    D = np.zeros((G, 3))
    D[0, 1:] = 1.0
    D[1, 2] = 1.0
    Y0 = noise_sd * rng.standard_normal((G, 3)) if noise_sd else np.zeros((G, 3))
    Y = Y0.copy()
    Y[0, 1] += te_early[0]
    Y[0, 2] += te_early[1]
    Y[1, 2] += te_late[0]
    effects = {
        ("early", 2): te_early[0],
        ("early", 3): te_early[1],
        ("late", 3): te_late[0],
    }
    first_switch = {"early": 2, "late": 3, **{g: NEVER for g in groups[2:]}}
    cohort_effects = {(2, 0): te_early[0], (2, 1): te_early[1], (3, 0): te_late[0]}
    return _finish(groups, periods, D, Y, np.ones((G, 3)), effects, first_switch, cohort_effects)


def _gen_fig2(params, rng):
    slope_more = float(params.get("slope_more", 1.0))
    slope_less = float(params.get("slope_less", 3.0))
    dose_more = float(params.get("dose_more", 2.0))
    dose_less = float(params.get("dose_less", 1.0))
    noise_sd = float(params.get("noise_sd", 0.0))

    groups = ["more", "less"]
    periods = [1, 2]
    D = np.array([[0.0, dose_more], [0.0, dose_less]])
    Y0 = noise_sd * rng.standard_normal((2, 2)) if noise_sd else np.zeros((2, 2))
    Y = Y0 + np.array([[0.0, slope_more * dose_more], [0.0, slope_less * dose_less]])
    effects = {("more", 2): slope_more, ("less", 2): slope_less}
    first_switch = {"more": 2, "less": 2}
    return _finish(groups, periods, D, Y, np.ones((2, 2)), effects, first_switch)


def _effect_function(params) -> Callable[[int, int], float]:
    fn = params.get("effect_fn")
    if fn is not None:
        return fn
    effect = params.get("effect", {"profile": "event_linear", "base": 1.0, "slope": 1.0})
    profile = effect.get("profile", "event_linear")
    if profile == "event_linear":
        base = float(effect.get("base", 1.0))
        slope = float(effect.get("slope", 1.0))
        return lambda c, ell: base + slope * ell
    if profile == "constant":
        value = float(effect.get("value", 1.0))
        return lambda c, ell: value
    if profile == "table":
        table = {tuple(k): float(v) for k, v in effect["values"].items()}
        return lambda c, ell: table[(c, ell)]
    raise InvalidSpec(f"unknown effect profile {profile!r}")


def _group_weights(params, rng, n):
    mode = params.get("weights", "uniform")
    if isinstance(mode, Mapping):
        return np.array([float(mode[i]) for i in range(n)])
    if mode == "uniform":
        return np.ones(n)
    if mode == "random":
        return np.exp(rng.normal(0.0, 0.5, size=n))
    raise InvalidSpec(f"unknown weights option {mode!r}")


def _gen_staggered(params, rng):
    T = int(params.get("n_periods", 6))
    cohorts = {int(c): int(k) for c, k in params.get("cohorts", {2: 1, 3: 1}).items()}
    n_never = int(params.get("never_treated", 1))
    noise_sd = float(params.get("noise_sd", 0.0))
    trend = float(params.get("switcher_trend", 0.0))
    effect_at = _effect_function(params)
    for c, k in cohorts.items():
        if not (2 <= c <= T):
            raise InvalidSpec(f"cohort start {c} outside the panel's periods 2..{T}")
        if k < 1:
            raise InvalidSpec("each cohort needs at least one group")

    periods = list(range(1, T + 1))
    groups, starts = [], []
    for c in sorted(cohorts):
        for i in range(cohorts[c]):
            groups.append(f"c{c}_{i + 1}")
            starts.append(c)
    for i in range(n_never):
        groups.append(f"never_{i + 1}")
        starts.append(None)
    G = len(groups)
    if G < 2:
        raise InvalidSpec("need at least two groups")

    alpha = rng.normal(size=G) if params.get("group_effects", "random") == "random" else np.zeros(G)
    gamma = rng.normal(size=T) if params.get("period_effects", "random") == "random" else np.zeros(T)
    wg = _group_weights(params, rng, G)

    D = np.zeros((G, T))
    Y = np.zeros((G, T))
    W = np.repeat(wg[:, None], T, axis=1)
    effects, first_switch, cohort_effects = {}, {}, {}
    for i, (g, c) in enumerate(zip(groups, starts)):
        first_switch[g] = NEVER if c is None else c
        for j, t in enumerate(periods):
            y = alpha[i] + gamma[j]
            if trend and c is not None:
                y += trend * t
            if noise_sd:
                y += noise_sd * rng.standard_normal()
            if c is not None and t >= c:
                ell = t - c
                te = float(effect_at(c, ell))
                D[i, j] = 1.0
                y += te
                effects[(g, t)] = te
                cohort_effects[(c, ell)] = te
            Y[i, j] = y
    return _finish(groups, periods, D, Y, W, effects, first_switch, cohort_effects)


def _gen_parallel_custom(params, rng):
    G = int(params.get("n_groups", 6))
    T = int(params.get("n_periods", 5))
    doses = tuple(float(d) for d in params.get("doses", (0.0, 1.0, 2.0, 3.0)))
    change_prob = float(params.get("change_prob", 0.4))
    effect_scale = float(params.get("effect_scale", 1.0))
    effect_offset = float(params.get("effect_offset", 0.0))
    noise_sd = float(params.get("noise_sd", 0.0))
    if G < 2 or T < 2:
        raise InvalidSpec("need at least 2 groups and 2 periods")

    periods = list(range(1, T + 1))
    groups = [f"g{i + 1:02d}" for i in range(G)]
    D = np.zeros((G, T))
    for i in range(G):
        dose = rng.choice(doses)
        for j in range(T):
            if j > 0 and rng.random() < change_prob:
                dose = rng.choice(doses)
            D[i, j] = dose
    # the treatment must vary within at least one group, else no regression exists
    if np.all(D == D[:, :1]):
        alt = [d for d in doses if d != D[0, 0]]
        D[0, -1] = alt[0] if alt else D[0, 0] + 1.0

    alpha = rng.normal(size=G)
    gamma = rng.normal(size=T)
    wg = _group_weights(params, rng, G)
    TE = effect_offset + effect_scale * rng.standard_normal((G, T))

    Y = alpha[:, None] + gamma[None, :] + TE * D
    if noise_sd:
        Y = Y + noise_sd * rng.standard_normal((G, T))
    W = np.repeat(wg[:, None], T, axis=1)

    effects = {
        (groups[i], periods[j]): float(TE[i, j])
        for i in range(G) for j in range(T) if D[i, j] != 0.0
    }
    first_switch = {}
    for i, g in enumerate(groups):
        changed = np.flatnonzero(D[i] != D[i, 0])
        first_switch[g] = int(periods[changed[0]]) if changed.size else NEVER
    return _finish(groups, periods, D, Y, W, effects, first_switch)


def ground_truth_att(truth: GroundTruth, selector=None) -> float:
    """Population-weighted average of per-cell effects over selected cells.

    ``selector`` may be None/"all" (every effect cell), a (cohort, horizon)
    pair, a predicate ``f(group, time) -> bool``, or an iterable of
    (group, time) keys.
    """
    cells = truth.cell_effects
    if selector is None or selector == "all":
        keys = list(cells)
    elif callable(selector):
        keys = [k for k in cells if selector(*k)]
    elif isinstance(selector, tuple) and len(selector) == 2 and not isinstance(selector[0], str):
        c, ell = selector
        keys = [
            (g, t) for (g, t) in cells
            if truth.first_switch.get(g) == c and t == c + ell
        ]
    else:
        wanted = set(selector)
        keys = [k for k in cells if k in wanted]
    if not keys:
        raise EmptySelection("no ground-truth cells match the selector")
    w = np.array([truth.cell_weights[k] for k in keys])
    v = np.array([cells[k] for k in keys])
    return float(np.sum(w * v) / np.sum(w))
