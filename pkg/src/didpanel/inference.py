"""Cluster bootstrap standard errors and joint placebo tests.

The resampling scheme is a pairs bootstrap over clusters (groups by
default): clusters are drawn with replacement, every drawn copy is relabeled
so the replicate remains a valid panel, and the estimator is re-run.
Replicate seeds derive deterministically from (seed, replicate index), so
results are bit-identical however many worker threads are used.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sstats

from .errors import (
    AllReplicatesFailed,
    DegenerateCovariance,
    DidPanelError,
    InvalidSpec,
    TooFewClusters,
)
from .panel import PanelDataset

__all__ = [
    "BootstrapSpec",
    "BootstrapResult",
    "JointTestResult",
    "cluster_bootstrap",
    "joint_placebo_test",
    "DegenerateCovariance",
]


@dataclass(frozen=True)
class BootstrapSpec:
    """Resampling plan: replication count, seed, cluster factor, CI level."""

    replications: int = 200
    seed: int = 0
    cluster: str = "group"
    ci_level: float = 0.95

    def __post_init__(self):
        if self.replications < 2:
            raise InvalidSpec("at least 2 bootstrap replications are needed for a variance")
        if not (0.0 < self.ci_level < 1.0):
            raise InvalidSpec("ci_level must lie strictly between 0 and 1")
        if self.replications < 50:
            warnings.warn(
                f"only {self.replications} bootstrap replications; standard errors "
                f"will be noisy (>= 50 recommended)",
                stacklevel=2,
            )


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimate with bootstrap spread; scalar in, scalar out."""

    point: object
    se: object
    ci_lower: object
    ci_upper: object
    replicates: np.ndarray
    n_failed: int
    spec: BootstrapSpec


@dataclass(frozen=True)
class JointTestResult:
    statistic: float
    p_value: float
    rank: int


def _run_estimator(estimator, data):
    if callable(estimator):
        return np.atleast_1d(np.asarray(estimator(data), dtype=float))
    if hasattr(estimator, "fit"):
        from sklearn.base import clone

        fitted = clone(estimator).fit(data)
        return np.atleast_1d(np.asarray(fitted.estimate_vector_, dtype=float))
    raise InvalidSpec("estimator must be a callable or an object with .fit")


def cluster_bootstrap(data: PanelDataset, estimator, spec: BootstrapSpec,
                      threads: int = 1) -> BootstrapResult:
    """Pairs bootstrap over clusters for any estimator of this package.

    ``estimator`` is either a callable mapping a panel to a float or float
    vector, or an unfitted estimator object exposing ``fit`` and
    ``estimate_vector_``.  Replicates on which the estimator raises a
    package error are dropped and counted; more than 20% failures triggers a
    warning, and all replicates failing is an error.

    The confidence interval is the normal approximation
    ``point +/- z * se`` at the spec's level.
    """
    if spec.cluster == "group":
        cluster_code = data.group_code
        n_clusters = data.n_groups
    else:
        raise InvalidSpec(
            f"unsupported cluster factor {spec.cluster!r}: resampling is defined over groups"
        )
    if n_clusters < 2:
        raise TooFewClusters(f"bootstrap needs >= 2 clusters, found {n_clusters}")

    point = _run_estimator(estimator, data)
    k = point.shape[0]

    all_draws = [
        np.random.default_rng([spec.seed, i]).integers(0, n_clusters, size=n_clusters)
        for i in range(spec.replications)
    ]

    def one(i):
        replicate = data.resample_clusters(all_draws[i], cluster_code)
        try:
            value = _run_estimator(estimator, replicate)
        except DidPanelError:
            return None
        if value.shape != (k,) or not np.all(np.isfinite(value)):
            return None
        return value

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(spec.replications)))
    else:
        results = [one(i) for i in range(spec.replications)]

    kept = [r for r in results if r is not None]
    n_failed = spec.replications - len(kept)
    if not kept:
        raise AllReplicatesFailed("the estimator failed on every bootstrap replicate")
    if n_failed > 0.2 * spec.replications:
        warnings.warn(
            f"{n_failed}/{spec.replications} bootstrap replicates failed and were dropped",
            stacklevel=2,
        )

    draws = np.vstack(kept)
    se = draws.std(axis=0, ddof=1)
    z = float(sstats.norm.ppf(0.5 + spec.ci_level / 2.0))
    lo = point - z * se
    hi = point + z * se

    if k == 1:
        return BootstrapResult(
            point=float(point[0]), se=float(se[0]),
            ci_lower=float(lo[0]), ci_upper=float(hi[0]),
            replicates=draws[:, 0], n_failed=n_failed, spec=spec,
        )
    return BootstrapResult(
        point=point, se=se, ci_lower=lo, ci_upper=hi,
        replicates=draws, n_failed=n_failed, spec=spec,
    )


def joint_placebo_test(placebos, replicate_draws) -> JointTestResult:
    """Wald test that a placebo vector is jointly zero.

    The covariance comes from the bootstrap replicate draws; a singular
    covariance falls back to its pseudo-inverse with the rank reported, and
    the statistic is referred to a chi-square at that rank.
    """
    p = np.atleast_1d(np.asarray(placebos, dtype=float))
    draws = np.atleast_2d(np.asarray(replicate_draws, dtype=float))
    if draws.shape[1] != p.shape[0]:
        draws = draws.T
    if draws.shape[1] != p.shape[0]:
        raise InvalidSpec("replicate draws do not align with the placebo vector")
    cov = np.cov(draws, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    eigs = np.linalg.eigvalsh(cov)
    tol = max(eigs[-1], 0.0) * 1e-12
    rank = int(np.sum(eigs > max(tol, 0.0)))
    if rank == 0:
        raise DegenerateCovariance("the placebo vector has zero variance across replicates")
    stat = float(p @ np.linalg.pinv(cov, rcond=1e-12) @ p)
    p_value = float(sstats.chi2.sf(stat, df=rank))
    return JointTestResult(statistic=stat, p_value=p_value, rank=rank)
