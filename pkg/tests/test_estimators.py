import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import didpanel as dp


def test_get_params_round_trip():
    est = dp.CohortDid(control_rule="not_yet_treated", max_horizon=3, placebos=2)
    params = est.get_params()
    assert params["control_rule"] == "not_yet_treated"
    rebuilt = dp.CohortDid(**params)
    assert rebuilt.get_params() == params


def test_clone_is_unfitted(hom_staggered):
    data, _ = hom_staggered
    est = dp.DidM().fit(data)
    assert hasattr(est, "estimate_")
    fresh = clone(est)
    assert not hasattr(fresh, "estimate_")
    with pytest.raises(NotFittedError):
        fresh.estimate_vector_


def test_twfe_regression_class(fig1):
    data, _ = fig1
    est = dp.TwfeRegression().fit(data)
    assert est.coefficient_ == pytest.approx(-0.5, abs=1e-10)
    assert est.weights_.negative_count == 1
    fd = dp.TwfeRegression(estimand="fd").fit(data)
    assert np.isfinite(fd.coefficient_)


def test_event_study_regression_auto_span(hom_staggered):
    data, _ = hom_staggered
    est = dp.EventStudyRegression().fit(data)
    assert est.coefficients_[0] == pytest.approx(1.0, abs=1e-9)
    assert est.coefficients_[2] == pytest.approx(3.0, abs=1e-9)
    table = est.contamination(data, 0)
    assert table.own_sum == pytest.approx(1.0, abs=1e-9)


def test_didm_class_matches_function(hom_staggered):
    data, _ = hom_staggered
    est = dp.DidM(placebos=1).fit(data)
    assert est.estimate_ == dp.did_m(data).estimate
    assert len(est.placebos_) == 1
    assert est.estimate_vector_.shape == (2,)


def test_cohort_did_class(hom_staggered):
    data, _ = hom_staggered
    est = dp.CohortDid(control_rule="not_yet_treated", max_horizon=2).fit(data)
    assert est.effects_[1] == pytest.approx(2.0, abs=1e-9)


def test_imputation_class(hom_staggered):
    data, _ = hom_staggered
    est = dp.ImputationDid(leads=1).fit(data)
    assert est.by_horizon_[0] == pytest.approx(1.0, abs=1e-9)
    assert est.placebos_.estimates[0] == pytest.approx(0.0, abs=1e-9)


def test_first_switch_class(hom_staggered):
    data, _ = hom_staggered
    est = dp.FirstSwitchDid(max_horizon=2, placebos=1).fit(data)
    assert est.effects_[2] == pytest.approx(3.0, abs=1e-9)
    assert est.normalized_effect_ == pytest.approx(2.0, abs=1e-9)


def test_fit_accepts_column_mapping(fig1):
    data, _ = fig1
    frame = {
        "group": [c.group for c in data.rows],
        "time": [c.time for c in data.rows],
        "treatment": data.treatment.tolist(),
        "outcome": data.outcome.tolist(),
    }
    est = dp.TwfeRegression().fit(frame)
    assert est.coefficient_ == pytest.approx(-0.5, abs=1e-10)


def test_fit_accepts_dataframe_when_pandas_available(fig1):
    pd = pytest.importorskip("pandas")
    data, _ = fig1
    df = pd.DataFrame({
        "state": [c.group for c in data.rows],
        "year": [c.time for c in data.rows],
        "law": data.treatment,
        "rate": data.outcome,
    })
    est = dp.TwfeRegression(schema={"group": "state", "time": "year",
                                    "treatment": "law", "outcome": "rate"}).fit(df)
    assert est.coefficient_ == pytest.approx(-0.5, abs=1e-10)
