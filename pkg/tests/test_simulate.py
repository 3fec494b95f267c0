import numpy as np
import pytest

import didpanel as dp
from didpanel.errors import EmptySelection, InvalidSpec


def test_fig1_sign_reversal(fig1):
    data, truth = fig1
    assert all(v > 0 for v in truth.cell_effects.values())
    beta = dp.fit_twfe(data).coefficients["treatment"]
    assert beta == pytest.approx(-0.5, abs=1e-10)


def test_fig2_sign_reversal(fig2):
    data, truth = fig2
    assert all(v > 0 for v in truth.cell_effects.values())
    beta = dp.fit_twfe(data).coefficients["treatment"]
    assert beta == pytest.approx(-1.0, abs=1e-10)
    assert dp.wald_did(data) == pytest.approx(2 * 1.0 - 3.0, abs=1e-12)


def test_ground_truth_att_selectors(fig1):
    _, truth = fig1
    assert dp.ground_truth_att(truth) == pytest.approx(2.0)
    assert dp.ground_truth_att(truth, (2, 1)) == pytest.approx(4.0)
    assert dp.ground_truth_att(truth, lambda g, t: g == "late") == pytest.approx(1.0)
    with pytest.raises(EmptySelection):
        dp.ground_truth_att(truth, lambda g, t: False)


def test_homogeneous_selector(hom_staggered):
    _, truth = hom_staggered
    assert dp.ground_truth_att(truth, (2, 1)) == pytest.approx(2.0)


def test_parallel_trends_exact_when_noiseless(hom_staggered):
    data, truth = hom_staggered
    grids = data.grids
    Y0 = grids["outcome"] - np.array(
        [[truth.cell_effects.get((g, t), 0.0) for t in data.periods] for g in data.groups]
    )
    changes = np.diff(Y0, axis=1)
    assert np.max(np.ptp(changes, axis=0)) <= 1e-12


def test_generation_deterministic():
    spec = dp.DgpSpec("staggered", {"n_periods": 7, "cohorts": {3: 2}, "noise_sd": 1.0}, seed=5)
    d1, t1 = dp.generate(spec)
    d2, t2 = dp.generate(spec)
    assert np.array_equal(d1.outcome, d2.outcome)
    assert t1.cell_effects == t2.cell_effects


def test_noise_does_not_touch_effects():
    base = dict(n_periods=6, cohorts={2: 2, 4: 1}, never_treated=1)
    _, clean = dp.generate(dp.DgpSpec("staggered", base, seed=3))
    _, noisy = dp.generate(dp.DgpSpec("staggered", {**base, "noise_sd": 2.0}, seed=3))
    assert clean.cell_effects == noisy.cell_effects


def test_invalid_specs():
    with pytest.raises(InvalidSpec):
        dp.DgpSpec("unknown_kind")
    with pytest.raises(InvalidSpec):
        dp.DgpSpec("fig1_early_late", {"bogus": 1})
    with pytest.raises(InvalidSpec):
        dp.DgpSpec("staggered", {"noise_sd": -1.0})
    with pytest.raises(InvalidSpec):
        dp.generate(dp.DgpSpec("staggered", {"cohorts": {1: 1}}))


def test_parallel_custom_has_effect_cells_and_weights():
    spec = dp.DgpSpec("parallel_custom", {"n_groups": 5, "n_periods": 4, "weights": "random"}, seed=2)
    data, truth = dp.generate(spec)
    assert data.weight_mode == "supplied"
    assert truth.cell_effects
    for (g, t), w in truth.cell_weights.items():
        assert w > 0


def test_custom_weights_constant_within_group():
    spec = dp.DgpSpec("staggered", {"n_periods": 5, "cohorts": {3: 2}, "weights": "random"}, seed=8)
    data, _ = dp.generate(spec)
    W = data.grids["weight"]
    assert np.max(np.abs(W - W[:, :1])) == 0.0


def test_noiseless_estimators_recover_truth_exactly(hom_staggered):
    data, truth = hom_staggered
    assert dp.did_m(data).estimate == pytest.approx(
        dp.ground_truth_att(truth, lambda g, t: t == truth.first_switch[g]), abs=1e-10)
