"""Brute-force least-squares oracles, independent of the package's engine.

Everything here builds explicit dummy design matrices and calls
``numpy.linalg.lstsq`` / ``pinv`` directly, so engine results can be checked
against an implementation that shares no code with the absorption path.
"""

import numpy as np


def dummy_design(factor_codes_list, X):
    """Intercept + reference-dropped dummies for each factor + regressors."""
    n = X.shape[0] if X.size else len(factor_codes_list[0][0])
    cols = [np.ones(n)]
    for codes, nlev in factor_codes_list:
        for lev in range(1, nlev):
            cols.append((codes == lev).astype(float))
    k_pre = len(cols)
    for j in range(X.shape[1]):
        cols.append(X[:, j])
    return np.column_stack(cols), k_pre


def dummy_ols(y, w, factor_codes_list, X):
    """Weighted OLS coefficients on the explicit regressors, via lstsq."""
    Z, k_pre = dummy_design(factor_codes_list, np.atleast_2d(X.T).T)
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(Z * sw[:, None], y * sw, rcond=None)
    return beta[k_pre:]


def dummy_influence(w, factor_codes_list, X, j):
    """Influence vector of regressor j: coefficient == influence @ y."""
    Z, k_pre = dummy_design(factor_codes_list, np.atleast_2d(X.T).T)
    sw = np.sqrt(w)
    P = np.linalg.pinv(Z * sw[:, None])
    return P[k_pre + j, :] * sw


def oracle_twfe(data):
    """Two-way fixed-effects treatment coefficient by explicit dummy OLS."""
    factors = [(data.group_code, data.n_groups), (data.time_code, data.n_periods)]
    return float(dummy_ols(data.outcome, data.weight, factors, data.treatment[:, None])[0])


def oracle_event_study(data, terms):
    """Event-study coefficients by explicit dummy OLS.

    ``terms`` is a list of (name, indicator_column); returns name -> value.
    """
    X = np.column_stack([col for _, col in terms])
    factors = [(data.group_code, data.n_groups), (data.time_code, data.n_periods)]
    beta = dummy_ols(data.outcome, data.weight, factors, X)
    return {name: float(beta[i]) for i, (name, _) in enumerate(terms)}
