"""Scikit-learn style wrappers around the functional estimators.

Each class takes its configuration in ``__init__``, computes everything in
``fit(data)``, and exposes results as trailing-underscore attributes, so the
estimators compose with ``sklearn.base.clone``, ``get_params``/``set_params``
and with this package's cluster bootstrap (which clones and refits them on
resampled panels).  ``fit`` accepts a :class:`~didpanel.panel.PanelDataset`
or any column mapping (e.g. a DataFrame) plus an optional column schema.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import diagnostics, dynamic, lsq, static
from .panel import PanelDataset


def as_panel(data, schema=None) -> PanelDataset:
    """Validation helper: pass panels through, convert column mappings."""
    if isinstance(data, PanelDataset):
        return data
    return PanelDataset.from_columns(data, schema=schema)


class _PanelEstimator(BaseEstimator):
    schema = None

    def _panel(self, data):
        return as_panel(data, schema=self.schema)

    @property
    def estimate_vector_(self) -> np.ndarray:
        check_is_fitted(self)
        return self._vector()


class TwfeRegression(_PanelEstimator):
    """Static two-way fixed-effects regression with its weight diagnostic.

    Parameters
    ----------
    estimand : {"fe", "fd"}
        Level regression with group and period effects, or first-difference
        regression with period effects.
    small_sample : bool
        Apply the finite-sample factor to the clustered covariance.

    Attributes
    ----------
    coefficient_ : float
    se_ : float
    result_ : FitResult
    weights_ : WeightTable
        Decomposition of the coefficient over treated cells.
    """

    def __init__(self, estimand="fe", small_sample=False, schema=None):
        self.estimand = estimand
        self.small_sample = small_sample
        self.schema = schema

    def fit(self, data, y=None):
        panel = self._panel(data)
        if self.estimand == "fe":
            self.result_ = lsq.fit_twfe(panel, small_sample=self.small_sample)
        elif self.estimand == "fd":
            self.result_ = lsq.fit_first_difference(panel, small_sample=self.small_sample)
        else:
            raise ValueError(f"estimand must be 'fe' or 'fd', got {self.estimand!r}")
        self.coefficient_ = self.result_.coefficients["treatment"]
        self.se_ = self.result_.se.get("treatment")
        self.weights_ = diagnostics.static_weights(panel, self.estimand)
        self.n_obs_ = self.result_.n_obs
        return self

    def _vector(self):
        return np.array([self.coefficient_])


class EventStudyRegression(_PanelEstimator):
    """Relative-time indicator regression for binary staggered designs.

    ``leads``/``lags`` default to the widest span observed in the data.

    Attributes
    ----------
    coefficients_ : dict
        Relative time -> estimate (binned endpoints keyed by their term name).
    se_ : dict
    result_ : FitResult
    dropped_ : tuple
        Requested indicator bins with no observations.
    """

    def __init__(self, leads=None, lags=None, binning="none", omitted=-1, schema=None):
        self.leads = leads
        self.lags = lags
        self.binning = binning
        self.omitted = omitted
        self.schema = schema

    def fit(self, data, y=None):
        panel = self._panel(data)
        leads, lags = self.leads, self.lags
        if leads is None or lags is None:
            rel = lsq.relative_time(panel)
            finite = rel[np.isfinite(rel)]
            if leads is None:
                leads = max(0, -int(finite.min())) if finite.size else 0
            if lags is None:
                lags = max(0, int(finite.max())) if finite.size else 0
        spec = lsq.EventStudySpec(
            leads=leads, lags=lags, binning=self.binning,
            omitted_relative_time=self.omitted,
        )
        self.result_ = lsq.fit_event_study(panel, spec)
        self.spec_ = spec
        meta = self.result_.term_meta or {}
        self.coefficients_ = {
            (ell if mode == "eq" else name): self.result_.coefficients[name]
            for name, (mode, ell) in meta.items()
        }
        self.se_ = {
            (ell if mode == "eq" else name): self.result_.se.get(name)
            for name, (mode, ell) in meta.items()
        }
        self.dropped_ = self.result_.dropped_terms
        return self

    def contamination(self, data, target: int):
        """Own/cross-horizon weight table for one coefficient on this spec."""
        check_is_fitted(self)
        return diagnostics.event_study_weights(self._panel(data), self.spec_, target)

    def _vector(self):
        return self.result_.coefficient_vector()


class DidM(_PanelEstimator):
    """Per-unit switcher effect, ruling out dynamic effects.

    Attributes
    ----------
    estimate_ : float
    result_ : DidMResult
    placebos_ : tuple
    """

    def __init__(self, placebos=0, schema=None):
        self.placebos = placebos
        self.schema = schema

    def fit(self, data, y=None):
        self.result_ = static.did_m(self._panel(data), placebos=self.placebos)
        self.estimate_ = self.result_.estimate
        self.placebos_ = self.result_.placebo_estimates
        return self

    def _vector(self):
        return np.array([self.estimate_, *self.placebos_])


class CohortDid(_PanelEstimator):
    """Cohort-horizon DIDs with a selectable control group.

    Attributes
    ----------
    result_ : EventStudyResult
    effects_ : dict
        Horizon -> aggregated estimate.
    """

    def __init__(self, control_rule="never_treated", max_horizon=None, placebos=0, schema=None):
        self.control_rule = control_rule
        self.max_horizon = max_horizon
        self.placebos = placebos
        self.schema = schema

    def fit(self, data, y=None):
        self.result_ = dynamic.cohort_event_study(
            self._panel(data), max_horizon=self.max_horizon,
            control_rule=self.control_rule, placebos=self.placebos,
        )
        self.effects_ = {e.horizon: e.estimate for e in self.result_.effects}
        return self

    def _vector(self):
        return np.array(
            [e.estimate for e in self.result_.effects]
            + [e.estimate for e in self.result_.placebos]
        )


class ImputationDid(_PanelEstimator):
    """Counterfactual-imputation estimator with optional group trends.

    Attributes
    ----------
    att_ : float
    result_ : ImputationResult
    cell_effects_ : dict
    placebos_ : ImputationPlacebo
    """

    def __init__(self, trends="none", leads=0, schema=None):
        self.trends = trends
        self.leads = leads
        self.schema = schema

    def fit(self, data, y=None):
        panel = self._panel(data)
        self.result_ = dynamic.imputation_fit(panel, trends=self.trends)
        self.att_ = self.result_.att
        self.cell_effects_ = self.result_.cell_effects
        self.by_horizon_ = {e.horizon: e.estimate for e in self.result_.by_horizon}
        self.placebos_ = dynamic.imputation_placebo(panel, self.leads)
        return self

    def _vector(self):
        return np.array([self.att_, *self.placebos_.estimates])


class FirstSwitchDid(_PanelEstimator):
    """First-switch event-study for general designs (doses, on/off paths).

    Attributes
    ----------
    result_ : EventStudyResult
    effects_ : dict
    normalized_effect_ : float
    """

    def __init__(self, max_horizon=0, placebos=0, schema=None):
        self.max_horizon = max_horizon
        self.placebos = placebos
        self.schema = schema

    def fit(self, data, y=None):
        self.result_ = dynamic.first_switch_event_study(
            self._panel(data), max_horizon=self.max_horizon, placebos=self.placebos,
        )
        self.effects_ = {e.horizon: e.estimate for e in self.result_.effects}
        self.normalized_effect_ = self.result_.normalized_effect[0]
        return self

    def _vector(self):
        return np.array(
            [e.estimate for e in self.result_.effects]
            + [e.estimate for e in self.result_.placebos]
            + [self.normalized_effect_]
        )
