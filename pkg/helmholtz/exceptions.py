"""Errors raised by the solver library.

Guards on singular or resonant parameters share the ``NumericalGuardError``
base so the commands can map them to their own exit status.
"""


class HelmholtzError(Exception):
    """Base class for every error raised by the helmholtz app."""


class NumericalGuardError(HelmholtzError):
    """A parameter sits too close to a singular or resonant value."""


class SingularParameter(NumericalGuardError):
    pass


class NearNyquist(NumericalGuardError):
    def __init__(self, kh, multiple, tol):
        self.kh = kh
        self.multiple = multiple
        self.tol = tol
        super().__init__(
            f"kh={kh!r} is within {tol:g} (relative to pi) of {multiple}*pi"
        )


class ResonantSource(NumericalGuardError):
    pass


class ResonantWavenumber(NumericalGuardError):
    pass


class ModalResonance(NumericalGuardError):
    pass


class NearResonantFrequency(NumericalGuardError):
    pass


class InvalidGrid(HelmholtzError, ValueError):
    pass


class NonFiniteSample(HelmholtzError, ValueError):
    pass


class NonNestedGrids(HelmholtzError, ValueError):
    pass


class InvalidProblem(HelmholtzError, ValueError):
    pass


class SingularSystem(HelmholtzError):
    def __init__(self, row, pivot, threshold):
        self.row = row
        self.pivot = pivot
        self.threshold = threshold
        super().__init__(
            f"pivot {abs(pivot):.3e} at row {row} is below {threshold:.3e}"
        )


class SolveQualityWarning(UserWarning):
    """The post-solve residual exceeded the acceptance threshold."""
