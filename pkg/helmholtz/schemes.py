"""
Assembly of the tridiagonal systems for the three finite difference schemes.

All schemes discretise u'' + k^2 u = f on (0, L) with the impedance data

    u'(0) - ik u(0) = g0,    u'(L) + ik u(L) = gL.

The BPF interior row is the product of the one-way operators D_k^- D_k^+,
which equals theta(kh) * Delta_h u + k^2 u.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from .exceptions import InvalidProblem, SolveQualityWarning
from .grid import GridFunction, discrete_laplacian, make_grid
from .numerics import (
    GUARD_TOL,
    bernoulli,
    nyquist_guard,
    shifted_wavenumber,
    theta,
)
from .trisolve import TridiagonalSystem, residual_inf_norm, solve_tridiagonal

logger = logging.getLogger(__name__)

SOLVE_RTOL = 1e-10


class SchemeKind(Enum):
    BPF = "bpf"
    CLASSICAL_FD = "fd"
    DISPERSION_CORRECTED_FD = "fd-dc"

    @property
    def label(self):
        return {
            SchemeKind.BPF: "BPF",
            SchemeKind.CLASSICAL_FD: "classical FD",
            SchemeKind.DISPERSION_CORRECTED_FD: "dispersion-corrected FD",
        }[self]


@dataclass(frozen=True)
class HelmholtzProblem:
    """Source, wavenumber and impedance data of one boundary value problem.

    ``name`` identifies a named benchmark for the reference cache; problems
    built ad hoc leave it empty and are never cached. ``f_derivatives``
    optionally holds (f', f'', f''') for the residual bounds.
    """

    k: float
    L: float
    f: Callable
    g0: complex
    gL: complex
    name: str = ""
    exact: Optional[object] = None
    f_derivatives: Optional[Tuple[Callable, Callable, Callable]] = None

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidProblem(f"wavenumber must be positive, got {self.k!r}")
        if not self.L > 0:
            raise InvalidProblem(f"length must be positive, got {self.L!r}")

    def source_values(self, grid):
        nodes = grid.nodes
        return np.broadcast_to(np.asarray(self.f(nodes), dtype=np.complex128), nodes.shape)

    def with_homogeneous_radiation(self):
        """Same source and wavenumber with g0 = gL = 0."""
        return HelmholtzProblem(
            k=self.k,
            L=self.L,
            f=self.f,
            g0=0j,
            gL=0j,
            name=f"{self.name}:homogeneous" if self.name else "",
            f_derivatives=self.f_derivatives,
        )


def _one_way_weights(k, h):
    s = k * h
    theta(s)  # B(+-is) has poles on 2*pi*Z
    return bernoulli(1j * s), bernoulli(-1j * s)


def apply_one_way_plus(v, k):
    """(D_k^+ v)_i for i = 0..n-1; annihilates sampled e^{ikx}."""
    b_plus, b_minus = _one_way_weights(k, v.grid.h)
    u = v.values
    return (b_plus * u[1:] - b_minus * u[:-1]) / v.grid.h


def apply_one_way_minus(v, k):
    """(D_k^- v)_i for i = 1..n; annihilates sampled e^{-ikx}."""
    b_plus, b_minus = _one_way_weights(k, v.grid.h)
    u = v.values
    return (b_minus * u[1:] - b_plus * u[:-1]) / v.grid.h


def apply_factorized_operator(v, k):
    """(D_k^- D_k^+ v)_i at the interior nodes i = 1..n-1."""
    b_plus, b_minus = _one_way_weights(k, v.grid.h)
    flux = apply_one_way_plus(v, k)
    return (b_minus * flux[1:] - b_plus * flux[:-1]) / v.grid.h


def apply_bpf_interior(v, k, tol=GUARD_TOL):
    """theta(kh) * (Delta_h v)_i + k^2 v_i at the interior nodes."""
    return theta(k * v.grid.h, tol) * discrete_laplacian(v) + k * k * v.values[1:-1]


def assemble_bpf(problem, n, tol=GUARD_TOL, boundary_correction=False):
    """Bernoulli phase-fitted system.

    Interior rows theta(kh) * Delta_h u + k^2 u = f, boundary rows
    (k/sin kh)(u_1 - e^{ikh} u_0) = g0 and (k/sin kh)(e^{ikh} u_n - u_{n-1}) = gL.
    With ``boundary_correction`` the data become g0 + (h/2) f(0) and
    gL - (h/2) f(L), removing the first-order boundary residual when f does
    not vanish at the endpoints.
    """
    grid = make_grid(problem.L, n)
    k, h = problem.k, grid.h
    s = k * h
    nyquist_guard(k, h, tol)

    weight = theta(s, tol) / h ** 2
    impedance = k / math.sin(s)
    rotation = complex(math.cos(s), math.sin(s))

    lower = np.full(n, weight, dtype=np.complex128)
    upper = np.full(n, weight, dtype=np.complex128)
    diag = np.full(n + 1, -2.0 * weight + k * k, dtype=np.complex128)
    rhs = problem.source_values(grid).copy()

    diag[0] = -impedance * rotation
    upper[0] = impedance
    diag[n] = impedance * rotation
    lower[n - 1] = -impedance
    rhs[0] = problem.g0
    rhs[n] = problem.gL
    if boundary_correction:
        source = problem.source_values(grid)
        rhs[0] += 0.5 * h * source[0]
        rhs[n] -= 0.5 * h * source[n]

    logger.debug("assembled BPF system k=%g n=%d kh=%.6g", k, n, s)
    return TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)


def _assemble_three_point(problem, n, interior_k2):
    """Standard stencil Delta_h u + interior_k2 * u = f with ghost-point impedance rows.

    The ghost value u_{-1} is eliminated with the centred impedance condition
    (u_1 - u_{-1}) / (2h) - ik u_0 = g0, which turns the PDE row at i = 0 into
    (2/h^2)(u_1 - u_0) + (interior_k2 - 2ik/h) u_0 = f_0 + (2/h) g0; the row
    at i = n is the mirror image with -(2/h) gL.
    """
    grid = make_grid(problem.L, n)
    k, h = problem.k, grid.h
    stencil = 1.0 / h ** 2

    lower = np.full(n, stencil, dtype=np.complex128)
    upper = np.full(n, stencil, dtype=np.complex128)
    diag = np.full(n + 1, -2.0 * stencil + interior_k2, dtype=np.complex128)
    rhs = problem.source_values(grid).copy()

    boundary_diag = -2.0 * stencil + interior_k2 - 2j * k / h
    diag[0] = boundary_diag
    upper[0] = 2.0 * stencil
    rhs[0] += 2.0 / h * problem.g0
    diag[n] = boundary_diag
    lower[n - 1] = 2.0 * stencil
    rhs[n] -= 2.0 / h * problem.gL

    return TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)


def assemble_classical_fd(problem, n):
    logger.debug("assembled classical FD system k=%g n=%d", problem.k, n)
    return _assemble_three_point(problem, n, problem.k ** 2)


def assemble_dispersion_corrected_fd(problem, n, tol=GUARD_TOL):
    """Three-point scheme with the shifted wavenumber in the interior stencil only."""
    h = problem.L / n
    nyquist_guard(problem.k, h, tol)
    k_hat = shifted_wavenumber(problem.k, h, tol)
    logger.debug(
        "assembled dispersion-corrected FD system k=%g k_hat=%g n=%d", problem.k, k_hat, n
    )
    return _assemble_three_point(problem, n, k_hat ** 2)


def assemble(problem, n, kind, tol=GUARD_TOL, boundary_correction=False):
    if kind is SchemeKind.BPF:
        return assemble_bpf(problem, n, tol=tol, boundary_correction=boundary_correction)
    if boundary_correction:
        raise InvalidProblem("boundary correction only applies to the BPF scheme")
    if kind is SchemeKind.CLASSICAL_FD:
        return assemble_classical_fd(problem, n)
    return assemble_dispersion_corrected_fd(problem, n, tol=tol)


def solve_scheme(problem, n, kind=SchemeKind.BPF, tol=GUARD_TOL, boundary_correction=False):
    """Assemble and solve; warn with SolveQualityWarning if the residual is poor.

    The residual is measured on the row-equilibrated system: interior rows
    scale like 1/h^2 and boundary rows like 1/h, so raw residuals of fine
    grids are dominated by round-off in the largest coefficients.
    """
    system = assemble(problem, n, kind, tol=tol, boundary_correction=boundary_correction)
    values = solve_tridiagonal(system)

    scaled = system.equilibrated()
    residual = residual_inf_norm(scaled, values)
    limit = SOLVE_RTOL * (float(np.max(np.abs(scaled.rhs))) + 1.0)
    if residual > limit:
        message = (
            f"{kind.label} solve for k={problem.k:g}, n={n} left residual "
            f"{residual:.3e} above {limit:.3e}"
        )
        logger.warning(message)
        warnings.warn(message, SolveQualityWarning, stacklevel=2)

    return GridFunction(make_grid(problem.L, n), values)
