"""
Numerical checks of the BPF error analysis and the convergence-study driver.

Residuals are taken in the orientation of the scheme, theta * Delta_h u +
k^2 u = f, so for an exact solution u

    tau_i  = theta(kh) (Delta_h u)(x_i) - u''(x_i)
    beta_0 = (k / sin kh)(u(h) - e^{ikh} u(0)) - (u'(0) - ik u(0))
    beta_L = (k / sin kh)(e^{ikh} u(L) - u(L - h)) - (u'(L) + ik u(L)).

In that orientation the modal relations read tau_n = M_h(xi_n) f_n,
beta_0 = -sum B_h(xi_n) f_n and beta_L = -sum (-1)^n B_h(xi_n) f_n.
"""

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dst
from scipy.integrate import simpson

from .exceptions import (
    InvalidGrid,
    InvalidProblem,
    ModalResonance,
    NearResonantFrequency,
    NonNestedGrids,
    ResonantWavenumber,
)
from .grid import (
    NORMS,
    discrete_laplacian,
    error_report,
    inner_product_h,
    make_grid,
    norm_l2h,
    sample,
    seminorm_h1h,
)
from .numerics import GUARD_TOL, nyquist_guard, phase_factor_m, stability_constant_a0, theta
from .reference import build_benchmark, fine_grid_reference
from .schemes import (
    SchemeKind,
    apply_bpf_interior,
    apply_factorized_operator,
    apply_one_way_minus,
    apply_one_way_plus,
    assemble_bpf,
    solve_scheme,
)

logger = logging.getLogger(__name__)

RESONANCE_TOL = 1e-8
FREQUENCY_RTOL = 1e-12
REMOVABLE_BAND = 1e-4
NORM_PANELS = 2 ** 14
RATE_FLOOR = 1e-11
CHECK_RTOL = 1e-10

_EPS = np.finfo(float).eps


def _sinc(x):
    return float(np.sinc(x / math.pi))


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float
    rtol: float = CHECK_RTOL
    atol: float = 1e-12

    @property
    def holds(self):
        return self.lhs <= self.rhs * (1.0 + self.rtol) + self.atol

    def __str__(self):
        verdict = "ok" if self.holds else "VIOLATED"
        return f"{self.name}: {self.lhs:.6e} <= {self.rhs:.6e} {verdict}"


@dataclass(frozen=True)
class IdentityCheck:
    """Both sides of an identity and the scale their difference is measured against."""

    name: str
    lhs: object
    rhs: object
    scale: float

    @property
    def relative_error(self):
        defect = float(np.max(np.abs(np.asarray(self.lhs) - np.asarray(self.rhs))))
        return defect / self.scale if self.scale > 0 else defect

    def holds(self, rtol):
        return self.relative_error <= rtol


@dataclass(frozen=True)
class ResidualReport:
    tau_norm: float
    beta0: complex
    betaL: complex
    tau_bound: float
    beta_bound: float

    @property
    def within_bounds(self):
        return (
            self.tau_norm <= self.tau_bound * (1.0 + CHECK_RTOL)
            and abs(self.beta0) + abs(self.betaL) <= self.beta_bound * (1.0 + CHECK_RTOL)
        )


@dataclass(frozen=True)
class MultiplierSample:
    xi: float
    value: float
    bound: float

    def within_bound(self, rtol=CHECK_RTOL):
        return abs(self.value) <= self.bound * (1.0 + rtol)


@dataclass(frozen=True)
class ConvergenceRow:
    kind: SchemeKind
    k: float
    n: int
    h: float
    report: object

    def error(self, norm, relative=True):
        errors = self.report.relative if relative else self.report.absolute
        return errors[norm]


@dataclass(frozen=True)
class ConvergenceTable:
    benchmark: str
    kind: SchemeKind
    k: float
    rows: tuple
    rates: dict


def _synthesize(coefficients, frequencies, L, x, chunk=512):
    """sum_n c_n sqrt(2/L) sin(xi_n x), accumulated over blocks of modes."""
    points = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(points.shape, dtype=np.complex128)
    for start in range(0, len(coefficients), chunk):
        block = slice(start, start + chunk)
        total += np.sin(np.outer(points, frequencies[block])) @ coefficients[block]
    total *= math.sqrt(2.0 / L)
    return total[0] if np.ndim(x) == 0 else total


@dataclass(frozen=True, eq=False)
class ModalExpansion:
    """Coefficients of a function in the sine basis sqrt(2/L) sin(n pi x / L), n >= 1."""

    L: float
    coefficients: np.ndarray = field(repr=False)

    @property
    def count(self):
        return len(self.coefficients)

    @property
    def frequencies(self):
        return np.arange(1, self.count + 1) * math.pi / self.L

    def __call__(self, x):
        return _synthesize(self.coefficients, self.frequencies, self.L, x)

    def parseval_partial_sums(self):
        return np.cumsum(np.abs(self.coefficients) ** 2)


@dataclass(frozen=True)
class KernelLifting:
    """b(x) = A cos(kx) + B sin(kx), a solution of b'' + k^2 b = 0."""

    k: float
    cos_coefficient: complex
    sin_coefficient: complex

    def __call__(self, x):
        return self.cos_coefficient * np.cos(self.k * x) + self.sin_coefficient * np.sin(self.k * x)

    def derivative(self, x):
        return self.k * (
            self.sin_coefficient * np.cos(self.k * x) - self.cos_coefficient * np.sin(self.k * x)
        )

    def second_derivative(self, x):
        return -self.k * self.k * self(x)


@dataclass(frozen=True)
class ModalDecomposition:
    """u = w + b with w a sine series vanishing at both ends and b a kernel lifting."""

    w: ModalExpansion
    lifting: KernelLifting

    def __call__(self, x):
        return self.w(x) + self.lifting(x)


@dataclass(frozen=True)
class ModalResidualReport:
    tau_norm: float
    tau_mismatch: float
    tau_tail: float
    tau_floor: float
    beta0: complex
    beta0_modal: complex
    betaL: complex
    betaL_modal: complex
    beta_tail: float
    beta_floor: float
    rtol: float

    @staticmethod
    def _relative(defect, size):
        return defect / size if size > 0 else defect

    @property
    def tau_relative_mismatch(self):
        return self._relative(self.tau_mismatch, self.tau_norm)

    @property
    def beta0_relative_mismatch(self):
        return self._relative(abs(self.beta0_modal - self.beta0), abs(self.beta0))

    @property
    def betaL_relative_mismatch(self):
        return self._relative(abs(self.betaL_modal - self.betaL), abs(self.betaL))

    def _comparisons(self):
        """(mismatch, allowance) for tau, beta_0 and beta_L."""
        beta_slack = 2.0 * self.beta_tail + self.beta_floor
        return (
            (self.tau_mismatch, self.rtol * self.tau_norm + 2.0 * self.tau_tail + self.tau_floor),
            (abs(self.beta0_modal - self.beta0), self.rtol * abs(self.beta0) + beta_slack),
            (abs(self.betaL_modal - self.betaL), self.rtol * abs(self.betaL) + beta_slack),
        )

    @property
    def allowance_ratio(self):
        """Largest mismatch-to-allowance ratio; at most 1 when consistent."""
        ratios = []
        for mismatch, allowance in self._comparisons():
            if allowance > 0:
                ratios.append(mismatch / allowance)
            else:
                ratios.append(0.0 if mismatch == 0 else math.inf)
        return max(ratios)

    @property
    def consistent(self):
        """Modal and direct residuals agree once tail and round-off allowances are added to rtol."""
        return all(mismatch <= allowance for mismatch, allowance in self._comparisons())


@dataclass(frozen=True)
class LeadingTermsReport:
    tau: np.ndarray = field(repr=False)
    tau_predicted: np.ndarray = field(repr=False)
    beta0: complex = 0j
    beta0_predicted: complex = 0j
    betaL: complex = 0j
    betaL_predicted: complex = 0j

    @property
    def beta0_relative_mismatch(self):
        return abs(self.beta0 - self.beta0_predicted) / max(abs(self.beta0_predicted), _EPS)

    @property
    def betaL_relative_mismatch(self):
        return abs(self.betaL - self.betaL_predicted) / max(abs(self.betaL_predicted), _EPS)

    @property
    def tau_relative_mismatch(self):
        scale = float(np.max(np.abs(self.tau_predicted), initial=0.0))
        return float(np.max(np.abs(self.tau - self.tau_predicted), initial=0.0)) / max(scale, _EPS)


def _require_exact(problem):
    if problem.exact is None:
        raise InvalidProblem(f"problem {problem.name or '<unnamed>'} has no exact solution")
    return problem.exact


# Residuals


def interior_residual(exact, k, grid, tol=GUARD_TOL):
    """tau_i at the interior nodes and its discrete L2 norm."""
    nyquist_guard(k, grid.h, tol)
    u = sample(exact.u, grid)
    second = np.asarray(exact.u_doubleprime(grid.nodes[1:-1]), dtype=np.complex128)
    tau = theta(k * grid.h, tol) * discrete_laplacian(u) - second
    return tau, float(np.sqrt(grid.h * np.sum(np.abs(tau) ** 2)))


def boundary_residuals(exact, k, h, L, tol=GUARD_TOL):
    nyquist_guard(k, h, tol)
    s = k * h
    impedance = k / math.sin(s)
    rotation = cmath.exp(1j * s)
    u0, u_first = complex(exact.u(0.0)), complex(exact.u(h))
    uL, u_last = complex(exact.u(L)), complex(exact.u(L - h))
    beta0 = impedance * (u_first - rotation * u0) - (complex(exact.u_prime(0.0)) - 1j * k * u0)
    betaL = impedance * (rotation * uL - u_last) - (complex(exact.u_prime(L)) + 1j * k * uL)
    return beta0, betaL


def source_derivative_norms(problem, panels=NORM_PANELS):
    """(||f''||, ||f'''||) in L2(0, L) by composite Simpson on the analytic derivatives."""
    if problem.f_derivatives is None:
        raise InvalidProblem(f"problem {problem.name or '<unnamed>'} carries no source derivatives")
    x = problem.L * (np.arange(panels + 1) / panels)

    def norm(fn):
        values = np.broadcast_to(np.asarray(fn(x), dtype=np.complex128), x.shape)
        return float(np.sqrt(simpson(np.abs(values) ** 2, x=x)))

    _, second, third = problem.f_derivatives
    return norm(second), norm(third)


def residual_report(problem, n, tol=GUARD_TOL):
    """Residual sizes next to their explicit bounds for f in H^3 with f, f' zero at the ends."""
    exact = _require_exact(problem)
    grid = make_grid(problem.L, n)
    k, L, h = problem.k, problem.L, grid.h
    _, tau_norm = interior_residual(exact, k, grid, tol)
    beta0, betaL = boundary_residuals(exact, k, h, L, tol)
    f2, f3 = source_derivative_norms(problem)
    weight = theta(k * h, tol)
    sec = abs(1.0 / math.cos(0.5 * k * h))
    return ResidualReport(
        tau_norm=tau_norm,
        beta0=beta0,
        betaL=betaL,
        tau_bound=L * weight * h * h / 12.0 * f3,
        beta_bound=2.0 * math.sqrt(L * weight) * sec * h * h / 6.0 * f2,
    )


def leading_residual_terms(problem, n, tol=GUARD_TOL):
    """Compare the residuals with their leading Taylor terms.

    tau_i ~ (h^2/12) f''(x_i), beta_0 ~ (h/2) f(0) + (h^2/6) f'(0) and
    beta_L ~ -(h/2) f(L) - (h^2/6) f'(L). A source that does not vanish at
    an endpoint leaves a first-order boundary residual there.
    """
    exact = _require_exact(problem)
    if problem.f_derivatives is None:
        raise InvalidProblem(f"problem {problem.name or '<unnamed>'} carries no source derivatives")
    grid = make_grid(problem.L, n)
    k, L, h = problem.k, problem.L, grid.h
    first, second, _ = problem.f_derivatives
    tau, _ = interior_residual(exact, k, grid, tol)
    beta0, betaL = boundary_residuals(exact, k, h, L, tol)

    interior = grid.nodes[1:-1]
    tau_predicted = h * h / 12.0 * np.broadcast_to(
        np.asarray(second(interior), dtype=np.complex128), interior.shape
    )
    f0, fL = complex(problem.f(0.0)), complex(problem.f(L))
    return LeadingTermsReport(
        tau=tau,
        tau_predicted=tau_predicted,
        beta0=beta0,
        beta0_predicted=0.5 * h * f0 + h * h / 6.0 * complex(first(0.0)),
        betaL=betaL,
        betaL_predicted=-0.5 * h * fL - h * h / 6.0 * complex(first(L)),
    )


# Kernel lifting and the sine basis


def kernel_lifting(u0, uL, k, L, tol=RESONANCE_TOL):
    sin_kl = math.sin(k * L)
    if abs(sin_kl) <= tol:
        raise ResonantWavenumber(f"sin(kL) = {sin_kl:.3e} for k={k!r}, L={L!r}")
    u0 = complex(u0)
    return KernelLifting(
        k=k,
        cos_coefficient=u0,
        sin_coefficient=(complex(uL) - u0 * math.cos(k * L)) / sin_kl,
    )


def sine_coefficients(f, L, N, quad_points_per_mode=16):
    """f_n = (f, phi_n) for n = 1..N by composite Simpson.

    One uniform grid with max(q * N, 64) panels serves every mode; the
    Simpson sums of all modes are a single type-I DST of the weighted
    samples.
    """
    if N < 1:
        raise ValueError(f"need at least one mode, got N={N}")
    if quad_points_per_mode < 2:
        raise ValueError(f"need at least 2 panels per mode, got {quad_points_per_mode}")
    panels = max(quad_points_per_mode * N, 64)
    panels += panels % 2
    x = L * (np.arange(panels + 1) / panels)
    values = np.broadcast_to(np.asarray(f(x), dtype=np.complex128), x.shape)

    weights = np.where(np.arange(1, panels) % 2 == 1, 4.0, 2.0) * (L / panels / 3.0)
    weighted = values[1:-1] * weights

    def sine_sums(a):
        # dst type 1 returns 2 * sum_j a_j sin(pi m j / panels) for m = 1..panels-1
        return 0.5 * dst(a, type=1)[:N]

    sums = sine_sums(weighted.real) + 1j * sine_sums(weighted.imag)
    return ModalExpansion(L=float(L), coefficients=math.sqrt(2.0 / L) * sums)


def dirichlet_modal_solution(fhat, k, tol=RESONANCE_TOL):
    """Sine series of the solution of -w'' - k^2 w = f with w(0) = w(L) = 0."""
    symbol = fhat.frequencies ** 2 - k * k
    nearest = int(np.argmin(np.abs(symbol)))
    if abs(symbol[nearest]) <= tol * k * k:
        raise ModalResonance(f"k={k!r} resonates with sine mode {nearest + 1}")
    return ModalExpansion(L=fhat.L, coefficients=fhat.coefficients / symbol)


def modal_decomposition(problem, modes=400, quad_points_per_mode=16, tol=RESONANCE_TOL):
    """Rebuild the exact solution as a Dirichlet sine series plus a kernel lifting."""
    exact = _require_exact(problem)
    k, L = problem.k, problem.L
    lifting = kernel_lifting(exact.u(0.0), exact.u(L), k, L, tol)
    # w = u - b solves w'' + k^2 w = f, i.e. -w'' - k^2 w = -f.
    minus_f = sine_coefficients(lambda x: -np.asarray(problem.f(x)), L, modes, quad_points_per_mode)
    return ModalDecomposition(w=dirichlet_modal_solution(minus_f, k, tol), lifting=lifting)


# Fourier multipliers


def interior_multiplier(xi, h, k, tol=GUARD_TOL):
    """M_h = (theta(kh) (4/h^2) sin^2(xi h/2) - xi^2) / (xi^2 - k^2).

    Evaluated as theta * sinc((xi+k)h/2) * sinc((xi-k)h/2) - 1, which is the
    same quantity without the cancellation near xi = k.
    """
    if abs(xi * xi - k * k) <= FREQUENCY_RTOL * k * k:
        raise NearResonantFrequency(f"xi={xi!r} is resonant with k={k!r}")
    nyquist_guard(k, h, tol)
    weight = theta(k * h, tol)
    return weight * _sinc(0.5 * (xi + k) * h) * _sinc(0.5 * (xi - k) * h) - 1.0


def boundary_multiplier(xi, h, k, L, tol=GUARD_TOL):
    """B_h = sqrt(2/L) (h / sin kh) (kh sin(xi h) - xi h sin(kh)) / ((xi h)^2 - (kh)^2)."""
    nyquist_guard(k, h, tol)
    a, b = xi * h, k * h
    prefactor = math.sqrt(2.0 / L) * h / math.sin(b)
    d = a - b
    if abs(d) < REMOVABLE_BAND:
        # numerator / d written without the 0/0 at a = b
        half = 0.5 * d
        quotient = (
            -b * math.sin(b) * math.sin(half) * _sinc(half)
            + b * math.cos(b) * _sinc(d)
            - math.sin(b)
        )
        return prefactor * quotient / (2.0 * b + d)
    return prefactor * (b * math.sin(a) - a * math.sin(b)) / (a * a - b * b)


def interior_multiplier_bound(xi, h, k, tol=GUARD_TOL):
    return theta(k * h, tol) * h * h * xi * xi / 12.0


def boundary_multiplier_bound(xi, h, k, L, tol=GUARD_TOL):
    sec = abs(1.0 / math.cos(0.5 * k * h))
    return math.sqrt(2.0 * theta(k * h, tol) / L) * xi * h * h / 6.0 * sec


def multiplier_samples(which, k, h, L=1.0, xi=None, count=1000, tol=GUARD_TOL):
    """Multiplier values and bounds on a log grid of xi in [pi/L, 10^3 k].

    Frequencies resonant with k are left out of the interior samples.
    """
    if xi is None:
        xi = np.geomspace(math.pi / L, 1e3 * k, count)
    samples = []
    for value in np.asarray(xi, dtype=float):
        value = float(value)
        if which == "interior":
            if abs(value * value - k * k) <= FREQUENCY_RTOL * k * k:
                continue
            samples.append(MultiplierSample(
                xi=value,
                value=interior_multiplier(value, h, k, tol),
                bound=interior_multiplier_bound(value, h, k, tol),
            ))
        elif which == "boundary":
            samples.append(MultiplierSample(
                xi=value,
                value=boundary_multiplier(value, h, k, L, tol),
                bound=boundary_multiplier_bound(value, h, k, L, tol),
            ))
        else:
            raise ValueError(f"unknown multiplier {which!r}; expected 'interior' or 'boundary'")
    return tuple(samples)


def modal_residual_representation_check(problem, n, modes=400, quad_points_per_mode=16,
                                        rtol=1e-4, tol=GUARD_TOL):
    """Rebuild tau, beta_0 and beta_L from their sine-mode sums and compare.

    The next ``modes`` sine modes are summed in absolute value as an
    estimate of the truncation tail.
    """
    exact = _require_exact(problem)
    grid = make_grid(problem.L, n)
    k, L, h = problem.k, problem.L, grid.h
    tau, tau_norm = interior_residual(exact, k, grid, tol)
    beta0, betaL = boundary_residuals(exact, k, h, L, tol)

    fhat = sine_coefficients(problem.f, L, 2 * modes, quad_points_per_mode)
    xi = fhat.frequencies
    m_h = np.array([interior_multiplier(value, h, k, tol) for value in xi])
    b_h = np.array([boundary_multiplier(value, h, k, L, tol) for value in xi])
    signs = np.where(np.arange(1, len(xi) + 1) % 2 == 0, 1.0, -1.0)

    interior = grid.nodes[1:-1]
    tau_terms = m_h * fhat.coefficients
    tau_modal = _synthesize(tau_terms[:modes], xi[:modes], L, interior)
    beta_terms = b_h * fhat.coefficients

    def norm_h(values):
        return float(np.sqrt(h * np.sum(np.abs(values) ** 2)))

    u_scale = float(np.max(np.abs(sample(exact.u, grid).values)))
    weight = theta(k * h, tol)
    report = ModalResidualReport(
        tau_norm=tau_norm,
        tau_mismatch=norm_h(tau_modal - tau),
        # sup-norm bound of the omitted modes, times sqrt(L) for the L2 norm
        tau_tail=math.sqrt(2.0) * float(np.sum(np.abs(tau_terms[modes:]))),
        tau_floor=16.0 * _EPS * (4.0 * weight / h ** 2 + k * k) * u_scale * math.sqrt(L),
        beta0=beta0,
        beta0_modal=-complex(np.sum(beta_terms[:modes])),
        betaL=betaL,
        betaL_modal=-complex(np.sum((signs * beta_terms)[:modes])),
        beta_tail=float(np.sum(np.abs(beta_terms[modes:]))),
        beta_floor=16.0 * _EPS * (2.0 * k / abs(math.sin(k * h)) + k) * u_scale,
        rtol=rtol,
    )
    logger.debug(
        "modal residual check %s k=%g n=%d modes=%d: tau %.3e, beta0 %.3e, betaL %.3e",
        problem.name, k, n, modes, report.tau_relative_mismatch,
        report.beta0_relative_mismatch, report.betaL_relative_mismatch,
    )
    return report


# Stability, energy and error identities


def stability_bound_check(problem, u_h, tol=GUARD_TOL):
    """Both sides of the k-explicit L2 and H1 stability estimates for a BPF solution."""
    grid = u_h.grid
    k, L, h = problem.k, problem.L, grid.h
    source = norm_l2h(sample(problem.f, grid))
    rhs = (
        stability_constant_a0(k * h, k * L, L, tol) * source
        + 0.5 * math.sqrt(L) * (abs(problem.g0) + abs(problem.gL))
    )
    weight = theta(k * h, tol)
    return (
        InequalityCheck("k*|u|_0,h", k * norm_l2h(u_h), rhs),
        InequalityCheck("sqrt(theta)*|u|_1,h", math.sqrt(weight) * seminorm_h1h(u_h), rhs),
    )


def _flux_norms(u_h, k):
    h = u_h.grid.h
    plus = apply_one_way_plus(u_h, k)
    minus = apply_one_way_minus(u_h, k)
    return h * float(np.sum(np.abs(plus) ** 2)), h * float(np.sum(np.abs(minus) ** 2))


def _require_homogeneous(problem):
    if problem.g0 != 0 or problem.gL != 0:
        raise InvalidProblem("this check needs homogeneous impedance data g0 = gL = 0")


def flux_estimate_check(problem, u_h, tol=GUARD_TOL):
    """Flux estimate, plus the auxiliary energy bound when kh < pi/2."""
    _require_homogeneous(problem)
    grid = u_h.grid
    k, L, h = problem.k, problem.L, grid.h
    weight = theta(k * h, tol)
    source = norm_l2h(sample(problem.f, grid)) ** 2
    plus, minus = _flux_norms(u_h, k)
    checks = [InequalityCheck("|D+u|^2+|D-u|^2", plus + minus, L * L / weight * source)]
    if k * h < 0.5 * math.pi:
        values = u_h.values
        auxiliary = (
            weight * math.cos(k * h) * seminorm_h1h(u_h) ** 2
            + k * k * norm_l2h(u_h) ** 2
            + 0.5 * k * k * h * (abs(values[0]) ** 2 + abs(values[-1]) ** 2)
        )
        checks.append(InequalityCheck("auxiliary energy", auxiliary, L * L / (2.0 * weight) * source))
    return tuple(checks)


def flux_energy_check(v, k, tol=GUARD_TOL):
    """|D+v|^2 + |D-v|^2 against 2 theta cos(kh)|v|_1^2 + 2k^2|v|_0^2 + k^2 h(|v_n|^2 + |v_0|^2)."""
    h = v.grid.h
    weight = theta(k * h, tol)
    plus, minus = _flux_norms(v, k)
    terms = (
        2.0 * weight * math.cos(k * h) * seminorm_h1h(v) ** 2,
        2.0 * k * k * norm_l2h(v) ** 2,
        k * k * h * (abs(v.values[-1]) ** 2 + abs(v.values[0]) ** 2),
    )
    return IdentityCheck(
        "flux-energy", plus + minus, sum(terms), max(plus + minus, *map(abs, terms))
    )


def factorization_check(v, k, tol=GUARD_TOL):
    """D_k^- D_k^+ v against theta * Delta_h v + k^2 v at the interior nodes."""
    composed = apply_factorized_operator(v, k)
    direct = apply_bpf_interior(v, k, tol)
    return IdentityCheck("factorization", composed, direct, float(np.max(np.abs(direct))))


def boundary_rewrite_check(v, k, tol=GUARD_TOL):
    """(D+v)_0 / m(kh) and (D-v)_n / m(kh) against the impedance rows of the scheme."""
    h = v.grid.h
    s = k * h
    nyquist_guard(k, h, tol)
    factor = phase_factor_m(s)
    impedance = k / math.sin(s)
    rotation = cmath.exp(1j * s)
    values = v.values
    lhs = np.array([
        apply_one_way_plus(v, k)[0] / factor,
        apply_one_way_minus(v, k)[-1] / factor,
    ])
    rhs = np.array([
        impedance * (values[1] - rotation * values[0]),
        impedance * (rotation * values[-1] - values[-2]),
    ])
    return IdentityCheck("boundary rewrite", lhs, rhs, abs(impedance) * float(np.max(np.abs(values))))


def energy_identity_check(problem, u_h, tol=GUARD_TOL):
    """theta|u|_1^2 - (k^2 h/2)(|u_0|^2 + |u_n|^2) - k^2|u|_0^2 = -Re (f, u)_h for g0 = gL = 0."""
    _require_homogeneous(problem)
    grid = u_h.grid
    k, h = problem.k, grid.h
    weight = theta(k * h, tol)
    values = u_h.values
    terms = (
        weight * seminorm_h1h(u_h) ** 2,
        0.5 * k * k * h * (abs(values[0]) ** 2 + abs(values[-1]) ** 2),
        k * k * norm_l2h(u_h) ** 2,
    )
    rhs = -inner_product_h(sample(problem.f, grid), u_h).real
    return IdentityCheck(
        "energy identity",
        terms[0] - terms[1] - terms[2],
        rhs,
        max(*terms, abs(rhs), np.finfo(float).tiny),
    )


def error_equation_check(problem, n, u_h=None, tol=GUARD_TOL):
    """The grid error must satisfy the BPF rows with data (-beta_0, -tau, -beta_L).

    Rows are compared after dividing by their largest coefficient, so the
    relative error is a row-equilibrated residual.
    """
    exact = _require_exact(problem)
    system = assemble_bpf(problem, n, tol)
    if u_h is None:
        u_h = solve_scheme(problem, n, SchemeKind.BPF, tol=tol)
    grid = u_h.grid
    error = u_h.values - sample(exact.u, grid).values
    tau, _ = interior_residual(exact, problem.k, grid, tol)
    beta0, betaL = boundary_residuals(exact, problem.k, grid.h, problem.L, tol)
    target = -np.concatenate(([beta0], tau, [betaL]))
    scales = system.row_scales()
    return IdentityCheck("error equation", system.matvec(error) / scales, target / scales, 1.0)


def convergence_bound_check(problem, n, u_h=None, tol=GUARD_TOL):
    """k|e|_0,h and sqrt(theta)|e|_1,h against theta A_0 (L h^2/12 |f'''| + h^2/3 |f''|)."""
    exact = _require_exact(problem)
    if u_h is None:
        u_h = solve_scheme(problem, n, SchemeKind.BPF, tol=tol)
    grid = u_h.grid
    k, L, h = problem.k, problem.L, grid.h
    error = u_h - sample(exact.u, grid)
    f2, f3 = source_derivative_norms(problem)
    weight = theta(k * h, tol)
    rhs = weight * stability_constant_a0(k * h, k * L, L, tol) * (
        L * h * h / 12.0 * f3 + h * h / 3.0 * f2
    )
    return (
        InequalityCheck("k*|e|_0,h", k * norm_l2h(error), rhs),
        InequalityCheck("sqrt(theta)*|e|_1,h", math.sqrt(weight) * seminorm_h1h(error), rhs),
    )


# Convergence studies


def fit_rate(h_values, errors, floor=RATE_FLOOR):
    """Least-squares slope of log(error) against log(h); None below the error floor."""
    points = [(h, e) for h, e in zip(h_values, errors) if np.isfinite(e) and e > floor]
    if len(points) < 2:
        return None
    h, e = np.array(points).T
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def error_sweep(benchmark, cells, n_ref=None, workers=1, cache=None, tol=GUARD_TOL,
                boundary_correction=False, reference_kind=SchemeKind.BPF):
    """Solve every (kind, k, n) cell and measure it against its reference.

    With ``n_ref`` the reference is a fine-grid solve shared by all cells of
    one wavenumber; otherwise the benchmark's exact solution is sampled.
    Rows come back in the order of ``cells``.
    """
    cells = [(kind, float(k), int(n)) for kind, k, n in cells]
    problems = {}
    for _, k, _ in cells:
        if k not in problems:
            problems[k] = build_benchmark(benchmark, k)

    references = {}
    if n_ref is not None:
        coarse = sorted({n for _, _, n in cells})
        misfits = [n for n in coarse if n_ref % n]
        if misfits:
            raise NonNestedGrids(f"n_ref={n_ref} is not a multiple of {misfits}")
        for k, problem in problems.items():
            references[k] = fine_grid_reference(problem, n_ref, reference_kind, cache=cache, tol=tol)
    else:
        for problem in problems.values():
            _require_exact(problem)

    def run(cell):
        kind, k, n = cell
        problem = problems[k]
        u_h = solve_scheme(problem, n, kind, tol=tol, boundary_correction=boundary_correction)
        reference = references.get(k)
        if reference is None:
            reference = sample(problem.exact.u, u_h.grid)
        report = error_report(u_h, reference, k)
        logger.info(
            "%s %s k=%g n=%d: rel linf %.3e, rel V %.3e",
            benchmark, kind.label, k, n, report.relative["linf"], report.relative["v"],
        )
        return ConvergenceRow(kind=kind, k=k, n=n, h=u_h.grid.h, report=report)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(run, cells))


def convergence_study(benchmark, kind, k, n_list, n_ref=None, workers=1, cache=None,
                      tol=GUARD_TOL, boundary_correction=False):
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise InvalidGrid("a convergence study needs at least one grid")
    if any(later <= earlier for earlier, later in zip(n_list, n_list[1:])):
        raise InvalidGrid(f"grid sizes must be strictly increasing, got {n_list}")

    rows = error_sweep(
        benchmark,
        [(kind, k, n) for n in n_list],
        n_ref=n_ref,
        workers=workers,
        cache=cache,
        tol=tol,
        boundary_correction=boundary_correction,
    )
    h_values = [row.h for row in rows]
    rates = {norm: fit_rate(h_values, [row.error(norm) for row in rows]) for norm in NORMS}
    return ConvergenceTable(benchmark=benchmark, kind=kind, k=float(k), rows=tuple(rows), rates=rates)


def fixed_kh_diagonals(rows, norm="v"):
    """Group rows by kh (rounded to 12 digits) and order each group by k."""
    groups = {}
    for row in rows:
        groups.setdefault(round(row.k * row.h, 12), []).append(row)
    return {
        kh: [(row.k, row.error(norm)) for row in sorted(group, key=lambda r: r.k)]
        for kh, group in sorted(groups.items())
    }


def decreasing_with_exceptions(values, allowed=0):
    """True if ``values`` decreases strictly except for at most ``allowed`` steps."""
    rises = sum(1 for earlier, later in zip(values, values[1:]) if later >= earlier)
    return rises <= allowed


def grid_count_for_kh(k, kh, L=1.0):
    """Number of cells giving k*h = kh on (0, L); rejects a non-integral count."""
    n = k * L / kh
    rounded = int(round(n))
    if rounded < 2 or abs(n - rounded) > 1e-9 * n:
        raise InvalidGrid(f"k={k:g}, kh={kh:g} on L={L:g} does not give an integer n >= 2")
    return rounded


def comparison_sweep(benchmark, kinds, k_list, kh_list, n_ref=None, workers=1, cache=None,
                     tol=GUARD_TOL):
    """Every scheme at every k for each fixed kh; rows ordered by kh, scheme, k."""
    cells = [
        (kind, k, grid_count_for_kh(k, kh))
        for kh in kh_list
        for kind in kinds
        for k in k_list
    ]
    return error_sweep(benchmark, cells, n_ref=n_ref, workers=workers, cache=cache, tol=tol)
