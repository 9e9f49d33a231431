"""
Invariant suites run by ``manage.py run_verify``.

Each suite returns a list of CheckResult; randomized inputs come from a
numpy Generator seeded by the caller so reruns are reproducible.
"""

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np

from .analysis import (
    boundary_rewrite_check,
    convergence_bound_check,
    energy_identity_check,
    error_equation_check,
    factorization_check,
    flux_energy_check,
    flux_estimate_check,
    modal_residual_representation_check,
    multiplier_samples,
    residual_report,
    stability_bound_check,
)
from .grid import GridFunction, make_grid, norm_linf, sample
from .numerics import (
    SERIES_THRESHOLD,
    bernoulli,
    envelope_derivative_sup,
    phase_factor_m,
    theta,
)
from .reference import build_benchmark, plane_wave_problem, smooth_manufactured_problem
from .schemes import SchemeKind, solve_scheme

logger = logging.getLogger(__name__)

SUITES = ("identities", "multipliers", "residuals", "stability")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def summary_line(self):
        status = "PASS" if self.passed else "FAIL"
        line = f"{status} {self.suite}.{self.name} value={self.value:.6e} threshold={self.threshold:.6e}"
        return f"{line} {self.detail}" if self.detail else line


def _worst(suite, name, values, threshold, detail=""):
    worst = float(max(values)) if len(values) else 0.0
    return CheckResult(suite, name, worst <= threshold, worst, threshold, detail)


def _random_grid_function(rng, n, L=1.0):
    values = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    return GridFunction(make_grid(L, n), values)


def _admissible_pair(rng, k_range=(1.0, 300.0), n_range=(4, 400), kh_max=3.0):
    """A random (k, n) on L = 1 with kh in (0.05, kh_max)."""
    while True:
        k = float(rng.uniform(*k_range))
        n = int(rng.integers(*n_range))
        if 0.05 < k / n < kh_max:
            return k, n


def identity_suite(rng):
    suite = "identities"
    results = []

    radius = 10.0 * np.sqrt(rng.uniform(0.0, 1.0, 10_000))
    angle = rng.uniform(0.0, 2.0 * math.pi, 10_000)
    reflection, difference = [], []
    for z in radius * np.exp(1j * angle):
        b_plus, b_minus = bernoulli(z), bernoulli(-z)
        scale = max(abs(b_plus), abs(b_minus), abs(z), 1.0)
        reflection.append(abs(b_minus - cmath.exp(z) * b_plus) / max(scale, abs(cmath.exp(z) * b_plus)))
        difference.append(abs(b_minus - b_plus - z) / scale)
    results.append(_worst(suite, "bernoulli_reflection", reflection, 1e-12, "B(-z) = e^z B(z)"))
    results.append(_worst(suite, "bernoulli_difference", difference, 1e-12, "B(-z) - B(z) = z"))

    s_values = rng.uniform(1e-3, 2.0 * math.pi - 1e-2, 2000)
    results.append(_worst(
        suite, "theta_modulus",
        [abs(theta(s) - abs(bernoulli(1j * s)) ** 2) / theta(s) for s in s_values], 1e-13,
    ))
    bracket = np.linspace(0.0, math.pi, 2001)
    results.append(_worst(
        suite, "theta_range",
        [max(1.0 - theta(s), theta(s) - math.pi ** 2 / 4.0) for s in bracket], 1e-15,
        "1 <= theta <= pi^2/4 on [0, pi]",
    ))
    s_values = rng.uniform(1e-2, math.pi - 1e-2, 2000)
    results.append(_worst(
        suite, "key_identity",
        [abs(bernoulli(1j * s) / phase_factor_m(s) - s / math.sin(s)) / (s / math.sin(s))
         for s in s_values], 1e-13, "B(is)/m(s) = s/sin(s)",
    ))
    crossover = []
    for phase in np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False):
        z = SERIES_THRESHOLD * cmath.exp(1j * phase)
        crossover.append(abs(bernoulli(z * (1 - 1e-12)) - bernoulli(z * (1 + 1e-12))) / abs(bernoulli(z)))
    results.append(_worst(suite, "series_crossover", crossover, 1e-14))

    factorization, rewrite, flux = [], [], []
    for _ in range(50):
        k, n = _admissible_pair(rng)
        v = _random_grid_function(rng, n)
        factorization.append(factorization_check(v, k).relative_error)
        rewrite.append(boundary_rewrite_check(v, k).relative_error)
        flux.append(flux_energy_check(v, k).relative_error)
    results.append(_worst(suite, "factorization", factorization, 1e-12))
    results.append(_worst(suite, "boundary_rewrite", rewrite, 1e-13))
    results.append(_worst(suite, "flux_energy", flux, 1e-12))

    exactness = []
    for _ in range(20):
        k, n = _admissible_pair(rng)
        alpha, beta = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        problem, exact = plane_wave_problem(k, alpha, beta)
        u_h = solve_scheme(problem, n, SchemeKind.BPF)
        exactness.append(norm_linf(u_h - sample(exact.u, u_h.grid)))
    results.append(_worst(suite, "plane_wave_exactness", exactness, 1e-11))

    energy = []
    for name in ("smooth", "sine2", "box"):
        for k, n in ((32.0, 256), (64.0, 512), (100.0, 128)):
            problem = build_benchmark(name, k).with_homogeneous_radiation()
            u_h = solve_scheme(problem, n, SchemeKind.BPF)
            energy.append(energy_identity_check(problem, u_h).relative_error)
    results.append(_worst(suite, "energy_identity", energy, 1e-10))

    results.append(_worst(suite, "envelope_g_derivative", [envelope_derivative_sup("g")],
                          1.0 / 3.0 + 1e-6))
    results.append(_worst(suite, "envelope_h_derivative", [envelope_derivative_sup("h")],
                          1.0 / 6.0 + 1e-6))
    return results


def multiplier_suite(rng, pairs=20, count=1000):
    suite = "multipliers"
    interior_ratio, boundary_ratio = [], []
    violations = 0
    for _ in range(pairs):
        k = float(rng.uniform(10.0, 1000.0))
        h = float(rng.uniform(0.1, 3.0)) / k
        for which, ratios in (("interior", interior_ratio), ("boundary", boundary_ratio)):
            for item in multiplier_samples(which, k, h, count=count):
                violations += not item.within_bound()
                ratios.append(abs(item.value) / item.bound)
    return [
        CheckResult(suite, "bound_violations", violations == 0, float(violations), 0.0,
                    f"{pairs} (k, h) pairs x {count} frequencies"),
        _worst(suite, "interior_bound_ratio", interior_ratio, 1.0 + 1e-10),
        _worst(suite, "boundary_bound_ratio", boundary_ratio, 1.0 + 1e-10),
    ]


def residual_suite(rng, modes=400):
    suite = "residuals"
    results = []
    bound_failures, cases = 0, 0
    for k in (16.0, 32.0, 64.0, 128.0, 256.0):
        problem, _ = smooth_manufactured_problem(k)
        for n in (3 ** 5, 3 ** 6, 3 ** 7, 3 ** 8):
            if k / n >= math.pi:
                continue
            cases += 1
            bound_failures += not residual_report(problem, n).within_bounds
    results.append(CheckResult(suite, "residual_bounds", bound_failures == 0,
                               float(bound_failures), 0.0, f"{cases} cases"))

    problem, _ = smooth_manufactured_problem(32.0)
    report = modal_residual_representation_check(problem, 3 ** 5, modes=modes)
    results.append(CheckResult(
        suite, "modal_representation", report.consistent, report.allowance_ratio, 1.0,
        f"mismatch/allowance; relative tau {report.tau_relative_mismatch:.3e}, "
        f"beta0 {report.beta0_relative_mismatch:.3e}, betaL {report.betaL_relative_mismatch:.3e}",
    ))

    equation, bound_failures = [], 0
    for n in (3 ** 5, 3 ** 6, 3 ** 7):
        u_h = solve_scheme(problem, n, SchemeKind.BPF)
        equation.append(error_equation_check(problem, n, u_h=u_h).relative_error)
        bound_failures += not all(check.holds for check in convergence_bound_check(problem, n, u_h=u_h))
    results.append(_worst(suite, "error_equation", equation, 1e-9))
    results.append(CheckResult(suite, "convergence_bound", bound_failures == 0,
                               float(bound_failures), 0.0))
    return results


def stability_suite(rng):
    suite = "stability"
    failures = {"stability": 0, "flux": 0, "auxiliary": 0}
    cases = 0
    for name in ("planewave", "smooth", "box", "sine2"):
        for k in (32.0, 64.0, 128.0, 256.0):
            problem = build_benchmark(name, k)
            homogeneous = problem.with_homogeneous_radiation()
            for n in (128, 256, 512, 1024):
                cases += 1
                u_h = solve_scheme(problem, n, SchemeKind.BPF)
                failures["stability"] += not all(c.holds for c in stability_bound_check(problem, u_h))
                u_0 = solve_scheme(homogeneous, n, SchemeKind.BPF)
                for check in flux_estimate_check(homogeneous, u_0):
                    key = "auxiliary" if check.name == "auxiliary energy" else "flux"
                    failures[key] += not check.holds
    return [
        CheckResult(suite, f"{key}_violations", count == 0, float(count), 0.0, f"{cases} cases")
        for key, count in failures.items()
    ]


_RUNNERS = {
    "identities": identity_suite,
    "multipliers": multiplier_suite,
    "residuals": residual_suite,
    "stability": stability_suite,
}


def run_suite(name, seed, modes=400):
    """Run one suite; ``modes`` is the sine-series length of the residuals suite."""
    try:
        runner = _RUNNERS[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}") from None
    logger.info("running %s suite with seed %d", name, seed)
    rng = np.random.default_rng(seed)
    results = runner(rng, modes=modes) if name == "residuals" else runner(rng)
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.warning("%s suite failed: %s", name, ", ".join(failed))
    return results
