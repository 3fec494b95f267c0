"""Exception types raised by the didpanel toolkit.

Two broad families matter for callers (and for the CLI's exit codes):
``UserDataError`` means the input data or the requested configuration cannot
support the computation; ``NumericalError`` means the computation itself
broke down (collinearity, rank deficiency, failed convergence).
"""


class DidPanelError(Exception):
    """Base class for every error raised by this package."""


class UserDataError(DidPanelError):
    """The data or configuration cannot support the request (CLI exit 2)."""


class NumericalError(DidPanelError):
    """Numerical failure while fitting or resampling (CLI exit 3)."""


# --- panel loading / validation ---

class MissingColumn(UserDataError):
    pass


class DuplicateCell(UserDataError):
    pass


class NonFiniteValue(UserDataError):
    pass


class NonPositiveWeight(UserDataError):
    pass


class WrongShape(UserDataError):
    pass


# --- design requirements ---

class NotBinaryStaggered(UserDataError):
    pass


class NotBinaryTreatment(UserDataError):
    pass


class UnbalancedPanel(UserDataError):
    pass


class UnsupportedFeature(UserDataError):
    pass


# --- least-squares engine ---

class CollinearRegressor(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class TooFewClusters(UserDataError):
    pass


class ConvergenceFailure(NumericalError):
    pass


# --- estimators ---

class NoSwitchersIn(UserDataError):
    pass


class NoSwitchersOut(UserDataError):
    pass


class NoControls(UserDataError):
    pass


class NoValidComparisons(UserDataError):
    pass


class InsufficientPreperiods(UserDataError):
    pass


class ZeroDenominator(UserDataError):
    pass


class CohortEmpty(UserDataError):
    pass


class HorizonOutOfRange(UserDataError):
    pass


class EmptyHorizon(UserDataError):
    pass


class UnidentifiedFixedEffect(UserDataError):
    pass


class InsufficientPretrendData(UserDataError):
    pass


# --- diagnostics ---

class MissingProxy(UserDataError):
    pass


class ZeroVariance(UserDataError):
    pass


# --- inference ---

class AllReplicatesFailed(NumericalError):
    pass


class DegenerateCovariance(NumericalError):
    pass


# --- simulation ---

class InvalidSpec(UserDataError):
    pass


class EmptySelection(UserDataError):
    pass
