"""
Uniform grids, complex grid functions, difference operators and discrete norms.

The discrete L2 norm sums the interior nodes 1..n-1 only; boundary values
enter through the H1 seminorm and the maximum norm.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidGrid, NonFiniteSample, NonNestedGrids

logger = logging.getLogger(__name__)

NORMS = ("linf", "l2h", "h1", "v")


@dataclass(frozen=True)
class UniformGrid:
    L: float
    n: int

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidGrid(f"grid length must be positive, got {self.L!r}")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidGrid(f"grid needs an integer n >= 2, got {self.n!r}")

    @property
    def h(self):
        return self.L / self.n

    @property
    def nodes(self):
        # i/n is correctly rounded, so nested grids share bitwise-identical nodes.
        return self.L * (np.arange(self.n + 1) / self.n)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: UniformGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n + 1,):
            raise ValueError(
                f"expected {self.grid.n + 1} nodal values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteSample("grid function contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __sub__(self, other):
        if other.grid != self.grid:
            raise ValueError("grid functions live on different grids")
        return GridFunction(self.grid, self.values - other.values)


@dataclass(frozen=True)
class ErrorReport:
    absolute: dict
    relative: dict


def make_grid(L, n):
    return UniformGrid(L=float(L), n=n)


def sample(fn, grid):
    """Evaluate a vectorised function of position at every node."""
    nodes = grid.nodes
    values = np.broadcast_to(np.asarray(fn(nodes), dtype=np.complex128), nodes.shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteSample(f"{getattr(fn, '__name__', fn)!r} is not finite on the grid")
    return GridFunction(grid, values)


def forward_diff(v):
    return np.diff(v.values) / v.grid.h


def discrete_laplacian(v):
    u = v.values
    return (u[2:] - 2.0 * u[1:-1] + u[:-2]) / v.grid.h ** 2


def inner_product_h(v, w):
    """(v, w)_h = h * sum over interior nodes of v_i * conj(w_i)."""
    return v.grid.h * np.vdot(w.values[1:-1], v.values[1:-1])


def norm_l2h(v):
    return float(np.sqrt(v.grid.h * np.sum(np.abs(v.values[1:-1]) ** 2)))


def seminorm_h1h(v):
    return float(np.sqrt(v.grid.h * np.sum(np.abs(forward_diff(v)) ** 2)))


def norm_v(v, k):
    return float(np.hypot(k * norm_l2h(v), seminorm_h1h(v)))


def norm_linf(v):
    return float(np.max(np.abs(v.values)))


def grid_norms(v, k):
    return {
        "linf": norm_linf(v),
        "l2h": norm_l2h(v),
        "h1": seminorm_h1h(v),
        "v": norm_v(v, k),
    }


def restrict(fine, coarse):
    """Copy the fine values at the nodes shared with a nested coarse grid."""
    fine_grid = fine.grid
    if abs(fine_grid.L - coarse.L) > 1e-14 * coarse.L or fine_grid.n % coarse.n:
        raise NonNestedGrids(
            f"grid (L={fine_grid.L}, n={fine_grid.n}) does not contain "
            f"(L={coarse.L}, n={coarse.n})"
        )
    ratio = fine_grid.n // coarse.n
    return GridFunction(coarse, fine.values[::ratio])


def error_report(approx, reference, k):
    """Absolute and relative errors of ``approx``, both norms taken on its grid."""
    if reference.grid != approx.grid:
        reference = restrict(reference, approx.grid)
    absolute = grid_norms(approx - reference, k)
    scale = grid_norms(reference, k)
    relative = {}
    for name in NORMS:
        if scale[name] > 0:
            relative[name] = absolute[name] / scale[name]
        else:
            relative[name] = 0.0 if absolute[name] == 0 else float("inf")
    return ErrorReport(absolute=absolute, relative=relative)
