"""
Direct solution of complex tridiagonal systems by the Thomas algorithm.

Row i of the system reads

    lower[i-1] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1] = rhs[i]

so ``lower`` and ``upper`` have one entry fewer than ``diag``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularSystem

logger = logging.getLogger(__name__)

PIVOT_RTOL = 1e-14


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    lower: np.ndarray = field(repr=False)
    diag: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("lower", "diag", "upper", "rhs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.complex128))
        size = self.diag.shape[0]
        if self.diag.ndim != 1 or size < 1:
            raise ValueError("diag must be a non-empty 1D array")
        if self.lower.shape != (size - 1,) or self.upper.shape != (size - 1,):
            raise ValueError(
                f"off-diagonals need length {size - 1}, got "
                f"{self.lower.shape} and {self.upper.shape}"
            )
        if self.rhs.shape != (size,):
            raise ValueError(f"rhs needs length {size}, got {self.rhs.shape}")

    @property
    def size(self):
        return self.diag.shape[0]

    def row_scales(self):
        """Largest coefficient magnitude of every row."""
        scales = np.abs(self.diag)
        scales[1:] = np.maximum(scales[1:], np.abs(self.lower))
        scales[:-1] = np.maximum(scales[:-1], np.abs(self.upper))
        return scales

    def equilibrated(self):
        """The same equations with every row divided by its largest coefficient."""
        scales = self.row_scales()
        scales[scales == 0] = 1.0
        return TridiagonalSystem(
            lower=self.lower / scales[1:],
            diag=self.diag / scales,
            upper=self.upper / scales[:-1],
            rhs=self.rhs / scales,
        )

    def matvec(self, x):
        x = np.asarray(x, dtype=np.complex128)
        y = self.diag * x
        y[1:] += self.lower * x[:-1]
        y[:-1] += self.upper * x[1:]
        return y


def solve_tridiagonal(system):
    """Forward elimination and back substitution without row exchanges.

    Each pivot is compared with PIVOT_RTOL times the largest input
    coefficient; a smaller pivot raises SingularSystem.
    """
    size = system.size
    scale = max(
        float(np.max(np.abs(system.diag))),
        float(np.max(np.abs(system.lower), initial=0.0)),
        float(np.max(np.abs(system.upper), initial=0.0)),
    )
    threshold = PIVOT_RTOL * scale

    # Plain Python complex arithmetic is several times faster than indexing
    # numpy scalars one at a time.
    lower = system.lower.tolist()
    diag = system.diag.tolist()
    upper = system.upper.tolist()
    rhs = system.rhs.tolist()

    c_prime = [0j] * size
    d_prime = [0j] * size

    pivot = diag[0]
    if abs(pivot) <= threshold:
        raise SingularSystem(0, pivot, threshold)
    if size > 1:
        c_prime[0] = upper[0] / pivot
    d_prime[0] = rhs[0] / pivot

    for i in range(1, size):
        pivot = diag[i] - lower[i - 1] * c_prime[i - 1]
        if abs(pivot) <= threshold:
            raise SingularSystem(i, pivot, threshold)
        if i < size - 1:
            c_prime[i] = upper[i] / pivot
        d_prime[i] = (rhs[i] - lower[i - 1] * d_prime[i - 1]) / pivot

    x = [0j] * size
    x[-1] = d_prime[-1]
    for i in range(size - 2, -1, -1):
        x[i] = d_prime[i] - c_prime[i] * x[i + 1]

    return np.array(x, dtype=np.complex128)


def residual_inf_norm(system, x):
    return float(np.max(np.abs(system.matvec(x) - system.rhs)))
