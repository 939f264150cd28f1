"""Exception types shared across the package.

The CLI maps these onto its exit codes, so library code raises them rather
than generic exceptions whenever the failure is user-facing.
"""


class QpolError(Exception):
    """Base class for package errors."""


class NotHermitianError(QpolError, ValueError):
    def __init__(self, defect: float, tol: float):
        self.defect = defect
        super().__init__(f"matrix is not Hermitian: max|H - H^dag| = {defect:.3e} > {tol:.1e}")


class DimensionError(QpolError, ValueError):
    pass


class UnphysicalStateError(QpolError, ValueError):
    pass


class FullyBlockedError(QpolError, ValueError):
    """The channel transmits (numerically) nothing of the input state."""


class UnsupportedScenarioError(QpolError, ValueError):
    pass


class ConfigError(QpolError, ValueError):
    pass


class DataError(QpolError, ValueError):
    pass


class ConvergenceError(QpolError, RuntimeError):
    pass
