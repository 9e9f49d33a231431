"""
Exact, semi-analytic and fine-grid reference solutions for the benchmarks.

Every benchmark lives on (0, 1). The builders return the problem together
with its exact solution (also attached as ``problem.exact``); the box source
has no closed form and is compared against a fine-grid solve instead.
"""

import hashlib
import logging
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np
from django.db import DatabaseError, transaction
from numpy.polynomial import Polynomial

from .exceptions import ResonantSource
from .grid import GridFunction, make_grid
from .models import FineReference
from .numerics import GUARD_TOL
from .schemes import HelmholtzProblem, SchemeKind, solve_scheme

logger = logging.getLogger(__name__)

RESONANCE_RTOL = 1e-8


@dataclass(frozen=True)
class ExactSolution:
    u: Callable
    u_prime: Callable
    u_doubleprime: Callable

    def __add__(self, other):
        return ExactSolution(
            u=lambda x: self.u(x) + other.u(x),
            u_prime=lambda x: self.u_prime(x) + other.u_prime(x),
            u_doubleprime=lambda x: self.u_doubleprime(x) + other.u_doubleprime(x),
        )


@dataclass(frozen=True)
class PlaneWaveCoefficients:
    """Coefficients of alpha e^{ikx} + beta e^{-ikx}."""

    alpha: complex
    beta: complex

    @classmethod
    def from_impedance(cls, k, L, g0, gL):
        return cls(
            alpha=gL / (2j * k * np.exp(1j * k * L)),
            beta=-g0 / (2j * k),
        )

    def impedance_data(self, k, L):
        return -2j * k * self.beta, 2j * k * np.exp(1j * k * L) * self.alpha

    def solution(self, k):
        alpha, beta = self.alpha, self.beta

        def u(x):
            return alpha * np.exp(1j * k * x) + beta * np.exp(-1j * k * x)

        def u_prime(x):
            return 1j * k * (alpha * np.exp(1j * k * x) - beta * np.exp(-1j * k * x))

        def u_doubleprime(x):
            return -k * k * u(x)

        return ExactSolution(u=u, u_prime=u_prime, u_doubleprime=u_doubleprime)


def _homogeneous_part(k, L, particular, g0, gL):
    """Plane-wave coefficients that complete ``particular`` to meet the impedance data.

    The two impedance conditions decouple: the left one only sees beta and
    the right one only sees alpha.
    """
    defect_0 = particular.u_prime(0.0) - 1j * k * particular.u(0.0)
    defect_L = particular.u_prime(L) + 1j * k * particular.u(L)
    return PlaneWaveCoefficients.from_impedance(k, L, g0 - defect_0, gL - defect_L)


def plane_wave_problem(k, alpha, beta, L=1.0):
    coefficients = PlaneWaveCoefficients(alpha=complex(alpha), beta=complex(beta))
    g0, gL = coefficients.impedance_data(k, L)
    exact = coefficients.solution(k)
    problem = HelmholtzProblem(
        k=k,
        L=L,
        f=lambda x: np.zeros_like(x, dtype=np.complex128),
        g0=complex(g0),
        gL=complex(gL),
        name="planewave",
        exact=exact,
        f_derivatives=(lambda x: 0.0 * x, lambda x: 0.0 * x, lambda x: 0.0 * x),
    )
    return problem, exact


def smooth_manufactured_problem(k):
    """u = e^{ikx} + x^4 (1-x)^4 with f = r'' + k^2 r."""
    r = Polynomial([0, 0, 0, 0, 1]) * Polynomial([1, -1]) ** 4
    r1, r2 = r.deriv(1), r.deriv(2)
    f = r2 + k * k * r
    f1, f2, f3 = f.deriv(1), f.deriv(2), f.deriv(3)

    exact = ExactSolution(
        u=lambda x: np.exp(1j * k * x) + r(x),
        u_prime=lambda x: 1j * k * np.exp(1j * k * x) + r1(x),
        u_doubleprime=lambda x: -k * k * np.exp(1j * k * x) + r2(x),
    )
    problem = HelmholtzProblem(
        k=k,
        L=1.0,
        f=f,
        g0=0j,
        gL=2j * k * np.exp(1j * k),
        name="smooth",
        exact=exact,
        f_derivatives=(f1, f2, f3),
    )
    return problem, exact


def sine_squared_problem(k):
    """f = sin^2(pi x) with impedance data (2, i), solved by undetermined coefficients."""
    four_pi2 = 4.0 * math.pi ** 2
    if k < 1e-8 or abs(k * k - four_pi2) < RESONANCE_RTOL * k * k:
        raise ResonantSource(f"k={k!r} resonates with the cos(2 pi x) part of the source")

    a = 1.0 / (2.0 * k * k)
    c = -1.0 / (2.0 * (k * k - four_pi2))
    two_pi = 2.0 * math.pi
    particular = ExactSolution(
        u=lambda x: a + c * np.cos(two_pi * x),
        u_prime=lambda x: -c * two_pi * np.sin(two_pi * x),
        u_doubleprime=lambda x: -c * four_pi2 * np.cos(two_pi * x),
    )
    g0, gL = 2.0 + 0j, 1j
    exact = particular + _homogeneous_part(k, 1.0, particular, g0, gL).solution(k)

    pi = math.pi
    problem = HelmholtzProblem(
        k=k,
        L=1.0,
        f=lambda x: np.sin(pi * x) ** 2,
        g0=g0,
        gL=gL,
        name="sine2",
        exact=exact,
        f_derivatives=(
            lambda x: pi * np.sin(two_pi * x),
            lambda x: 2.0 * pi ** 2 * np.cos(two_pi * x),
            lambda x: -4.0 * pi ** 3 * np.sin(two_pi * x),
        ),
    )
    return problem, exact


def box_source_problem(k):
    """f = 50 on |x - 1/2| <= 1/9 (support endpoints included), 0 elsewhere."""
    half_width = 1.0 / 9.0 + 4.0 * np.finfo(float).eps

    def f(x):
        return np.where(np.abs(np.asarray(x) - 0.5) <= half_width, 50.0, 0.0)

    return HelmholtzProblem(k=k, L=1.0, f=f, g0=2.0 + 0j, gL=1j, name="box")


def constant_source_problem(k, c=1.0):
    """f = c with impedance data (2, i); the source does not vanish at the endpoints."""
    particular = ExactSolution(
        u=lambda x: c / (k * k) + 0.0 * x,
        u_prime=lambda x: 0.0 * x,
        u_doubleprime=lambda x: 0.0 * x,
    )
    g0, gL = 2.0 + 0j, 1j
    exact = particular + _homogeneous_part(k, 1.0, particular, g0, gL).solution(k)
    problem = HelmholtzProblem(
        k=k,
        L=1.0,
        f=lambda x: c + 0.0 * x,
        g0=g0,
        gL=gL,
        name=f"constant:{c!r}",
        exact=exact,
        f_derivatives=(lambda x: 0.0 * x, lambda x: 0.0 * x, lambda x: 0.0 * x),
    )
    return problem, exact


BENCHMARKS = {
    "planewave": lambda k: plane_wave_problem(k, 2.0, 1.0)[0],
    "smooth": lambda k: smooth_manufactured_problem(k)[0],
    "box": box_source_problem,
    "sine2": lambda k: sine_squared_problem(k)[0],
    "constant": lambda k: constant_source_problem(k)[0],
}


def build_benchmark(name, k):
    try:
        builder = BENCHMARKS[name]
    except KeyError:
        raise ValueError(
            f"unknown benchmark {name!r}; expected one of {', '.join(sorted(BENCHMARKS))}"
        ) from None
    return builder(k)


def exact_solution_defects(problem, exact, samples=100, seed=0):
    """Largest PDE residual at random points and the two impedance residuals."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, problem.L, samples)
    k = problem.k
    pde = exact.u_doubleprime(x) + k * k * exact.u(x) - problem.f(x)
    left = exact.u_prime(0.0) - 1j * k * exact.u(0.0) - problem.g0
    right = exact.u_prime(problem.L) + 1j * k * exact.u(problem.L) - problem.gL
    return float(np.max(np.abs(pde))), abs(left), abs(right)


def problem_key(problem):
    identity = "|".join(
        repr(value) for value in (problem.name, float(problem.k), float(problem.L),
                                  complex(problem.g0), complex(problem.gL))
    )
    return hashlib.sha256(identity.encode()).hexdigest()


class FineReferenceCache:
    """Fine-grid solutions keyed by (problem identity, n_ref, scheme).

    The in-process map is filled insert-if-absent under a lock. With
    ``persist`` the solutions are also read from and written to the
    FineReference table; a database failure switches persistence off.
    """

    def __init__(self, persist=False):
        self.persist = persist
        self._lock = threading.Lock()
        self._entries = {}

    def __len__(self):
        with self._lock:
            return len(self._entries)

    def get_or_solve(self, problem, n_ref, kind=SchemeKind.BPF, tol=GUARD_TOL):
        if not problem.name:
            logger.debug("problem has no benchmark name; solving n_ref=%d uncached", n_ref)
            return solve_scheme(problem, n_ref, kind, tol=tol)

        key = (problem_key(problem), n_ref, kind.value)
        with self._lock:
            cached = self._entries.get(key)
        if cached is not None:
            logger.info("reference cache hit: %s k=%g n_ref=%d", problem.name, problem.k, n_ref)
            return cached

        reference = self._load(problem, key) if self.persist else None
        if reference is None:
            logger.info("reference cache miss: solving %s k=%g n_ref=%d (%s)",
                        problem.name, problem.k, n_ref, kind.label)
            reference = solve_scheme(problem, n_ref, kind, tol=tol)
            if self.persist:
                self._store(problem, key, reference)

        with self._lock:
            return self._entries.setdefault(key, reference)

    def _load(self, problem, key):
        digest, n_ref, scheme = key
        try:
            row = FineReference.objects.filter(
                problem_key=digest, n_ref=n_ref, scheme=scheme
            ).first()
        except DatabaseError as exc:
            logger.warning("reference cache unavailable, keeping references in memory: %s", exc)
            self.persist = False
            return None
        if row is None:
            return None
        logger.info("reference loaded from database: %s", row)
        return GridFunction(make_grid(problem.L, n_ref), row.as_array())

    def _store(self, problem, key, reference):
        digest, n_ref, scheme = key
        try:
            with transaction.atomic():
                FineReference.objects.get_or_create(
                    problem_key=digest,
                    n_ref=n_ref,
                    scheme=scheme,
                    defaults={
                        "benchmark": problem.name,
                        "wavenumber": problem.k,
                        "length": problem.L,
                        "values": reference.values.tobytes(),
                    },
                )
        except DatabaseError as exc:
            logger.warning("could not persist reference for %s: %s", problem.name, exc)
            self.persist = False


default_cache = FineReferenceCache()


def fine_grid_reference(problem, n_ref, kind=SchemeKind.BPF, cache=None, tol=GUARD_TOL):
    return (cache or default_cache).get_or_solve(problem, n_ref, kind, tol=tol)
