import numpy as np
import pytest

import didpanel as dp


@pytest.fixture
def fig1():
    """Early/late adoption panel: effects (1, 4, 1), untreated outcome 0."""
    data, truth = dp.generate(dp.DgpSpec("fig1_early_late"))
    return data, truth


@pytest.fixture
def fig1_never():
    """Same panel plus one never-treated group."""
    data, truth = dp.generate(dp.DgpSpec("fig1_early_late", {"never_treated": 1}))
    return data, truth


@pytest.fixture
def fig2():
    """Two-period dose panel: more-treated slope 1, less-treated slope 3."""
    data, truth = dp.generate(dp.DgpSpec("fig2_more_less"))
    return data, truth


@pytest.fixture
def hom_staggered():
    """Noiseless staggered panel, cohorts at 2 and 4, effect l + 1 at horizon l."""
    spec = dp.DgpSpec(
        "staggered",
        {"n_periods": 6, "cohorts": {2: 2, 4: 2}, "never_treated": 2},
        seed=7,
    )
    return dp.generate(spec)


@pytest.fixture
def noisy_staggered():
    spec = dp.DgpSpec(
        "staggered",
        {"n_periods": 8, "cohorts": {3: 2, 5: 3}, "never_treated": 2, "noise_sd": 1.0},
        seed=21,
    )
    return dp.generate(spec)


def make_panel(D, Y, weights=None, groups=None, periods=None, proxy=None):
    """Matrix shorthand: rows are groups, columns are consecutive periods."""
    D = np.asarray(D, dtype=float)
    Y = np.asarray(Y, dtype=float)
    G, T = D.shape
    groups = groups or [f"g{i + 1}" for i in range(G)]
    periods = periods or list(range(1, T + 1))
    W = np.ones((G, T)) if weights is None else np.asarray(weights, dtype=float)
    return dp.PanelDataset.from_arrays(
        group=[g for g in groups for _ in periods],
        time=[t for _ in groups for t in periods],
        treatment=D.ravel(),
        outcome=Y.ravel(),
        weight=W.ravel(),
        proxy=None if proxy is None else np.asarray(proxy, dtype=float).ravel(),
        weight_mode=None if weights is not None else "uniform",
    )
