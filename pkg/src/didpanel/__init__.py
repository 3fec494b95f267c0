"""didpanel: panel-data DID toolkit.

Diagnostics for two-way fixed-effects regressions (decomposition weights,
2x2 comparison shares, event-study contamination weights) and
heterogeneity-robust difference-in-differences estimators, with cluster
bootstrap inference and synthetic data generators.
"""

from . import errors
from .diagnostics import (
    ContaminationTable,
    DecompositionReport,
    WeightTable,
    decompose_2x2,
    event_study_weights,
    static_weights,
    weight_proxy_correlation,
    weight_time_correlation,
)
from .dynamic import (
    CohortHorizonEffect,
    EventStudyResult,
    HorizonEstimate,
    ImputationPlacebo,
    ImputationResult,
    aggregate_cohort_effects,
    cohort_effect,
    cohort_event_study,
    cohort_placebo,
    first_switch_effect,
    first_switch_event_study,
    imputation_fit,
    imputation_placebo,
)
from .estimators import (
    CohortDid,
    DidM,
    EventStudyRegression,
    FirstSwitchDid,
    ImputationDid,
    TwfeRegression,
    as_panel,
)
from .inference import (
    BootstrapResult,
    BootstrapSpec,
    JointTestResult,
    cluster_bootstrap,
    joint_placebo_test,
)
from .lsq import (
    EventStudySpec,
    FitResult,
    absorb_and_fit,
    fit_event_study,
    fit_first_difference,
    fit_twfe,
    relative_time,
    residualize,
)
from .panel import (
    NEVER,
    BalanceReport,
    Cell,
    DesignInfo,
    PanelDataset,
    balance_report,
    derive_design,
    load_csv,
)
from .simulate import DgpSpec, GroundTruth, generate, ground_truth_att
from .static import (
    DidMResult,
    did_m,
    did_m_placebo,
    did_minus,
    did_plus,
    wald_did,
)

__version__ = "0.1.0"
