import cmath
import logging
import math
import os
import tempfile
from dataclasses import replace
from io import StringIO
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import DatabaseError
from django.test import SimpleTestCase, TestCase, override_settings

from .analysis import (
    ModalResidualReport,
    boundary_multiplier,
    boundary_rewrite_check,
    convergence_bound_check,
    convergence_study,
    decreasing_with_exceptions,
    dirichlet_modal_solution,
    energy_identity_check,
    error_equation_check,
    error_sweep,
    factorization_check,
    fit_rate,
    fixed_kh_diagonals,
    flux_energy_check,
    flux_estimate_check,
    grid_count_for_kh,
    interior_multiplier,
    kernel_lifting,
    leading_residual_terms,
    modal_decomposition,
    modal_residual_representation_check,
    multiplier_samples,
    residual_report,
    sine_coefficients,
    stability_bound_check,
)
from .exceptions import (
    InvalidGrid,
    InvalidProblem,
    ModalResonance,
    NearNyquist,
    NearResonantFrequency,
    NonFiniteSample,
    NonNestedGrids,
    ResonantSource,
    ResonantWavenumber,
    SingularParameter,
    SingularSystem,
)
from .forms import RunConfigForm, n_from_h, parse_number
from .grid import (
    GridFunction,
    discrete_laplacian,
    error_report,
    forward_diff,
    grid_norms,
    make_grid,
    norm_linf,
    restrict,
    sample,
    seminorm_h1h,
)
from .management.commands import run_convergence
from .models import FineReference
from .numerics import (
    WaveParameters,
    bernoulli,
    envelope_derivative_sup,
    nyquist_guard,
    phase_factor_m,
    shifted_wavenumber,
    stability_constant_a0,
    theta,
)
from .reference import (
    FineReferenceCache,
    box_source_problem,
    build_benchmark,
    constant_source_problem,
    exact_solution_defects,
    plane_wave_problem,
    problem_key,
    sine_squared_problem,
    smooth_manufactured_problem,
)
from .schemes import HelmholtzProblem, SchemeKind, assemble, solve_scheme
from .trisolve import TridiagonalSystem, solve_tridiagonal
from .verification import CheckResult, run_suite

# Create a logger object
logger = logging.getLogger('helmholtz')


def random_grid_function(rng, n, L=1.0):
    values = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    return GridFunction(make_grid(L, n), values)


class NumericsTestCase(SimpleTestCase):

    def test_bernoulli_at_zero_and_small_arguments(self):
        self.assertEqual(bernoulli(0), 1.0)
        # Series branch: B(z) = 1 - z/2 + z^2/12 + O(z^4)
        z = 1e-4 + 2e-4j
        self.assertAlmostEqual(abs(bernoulli(z) - (1 - z / 2 + z * z / 12)), 0.0, places=15)

    def test_bernoulli_at_one(self):
        self.assertLess(abs(bernoulli(1.0) - 0.58197670686932642), 1e-15)

    def test_bernoulli_identities(self):
        for z in (0.3 + 0.1j, -2.0 + 5.0j, 7.5j, 4.0, 1e-3 + 1e-3j):
            b_plus, b_minus = bernoulli(z), bernoulli(-z)
            self.assertLess(abs(b_minus - cmath.exp(z) * b_plus), 1e-12 * max(1.0, abs(b_minus)))
            self.assertLess(abs(b_minus - b_plus - z), 1e-12 * max(1.0, abs(z)))

    def test_bernoulli_rejects_poles(self):
        with self.assertRaises(SingularParameter):
            bernoulli(2j * math.pi)
        with self.assertRaises(SingularParameter):
            bernoulli(complex(float('nan'), 0.0))

    def test_theta_values(self):
        self.assertEqual(theta(0.0), 1.0)
        self.assertAlmostEqual(theta(math.pi), math.pi ** 2 / 4)
        # theta(s) = |B(is)|^2
        self.assertAlmostEqual(theta(1.3), abs(bernoulli(1.3j)) ** 2, places=14)
        with self.assertRaises(SingularParameter):
            theta(2.0 * math.pi)

    def test_key_identity_and_shifted_wavenumber(self):
        s = 0.7
        self.assertAlmostEqual(abs(bernoulli(1j * s) / phase_factor_m(s) - s / math.sin(s)), 0.0, places=14)
        k, h = 40.0, 0.01
        self.assertAlmostEqual(shifted_wavenumber(k, h), k / math.sqrt(theta(k * h)), places=12)

    def test_nyquist_guard(self):
        nyquist_guard(10.0, 0.1)  # kh = 1 is fine
        nyquist_guard(1.0, 0.0)  # the zero multiple is not a Nyquist point
        with self.assertRaises(NearNyquist):
            nyquist_guard(4.0 * math.pi, 0.25)
        with self.assertRaises(NearNyquist):
            WaveParameters.for_grid(16.0 * math.pi, 1.0, 8)
        params = WaveParameters.for_grid(32.0, 2.0, 64)
        self.assertAlmostEqual(params.s, 1.0)
        self.assertAlmostEqual(params.t, 64.0)

    def test_stability_constant(self):
        # Small kh: A_0 ~ L/sqrt(2) + L/(2t)
        self.assertAlmostEqual(stability_constant_a0(1e-6, 10.0, 1.0), 1 / math.sqrt(2) + 0.05, places=6)
        with self.assertRaises(SingularParameter):
            stability_constant_a0(math.pi, 10.0, 1.0)
        with self.assertRaises(ValueError):
            stability_constant_a0(0.5, 0.0, 1.0)

    def test_envelope_derivatives(self):
        self.assertLessEqual(envelope_derivative_sup('g'), 1.0 / 3.0 + 1e-6)
        self.assertLessEqual(envelope_derivative_sup('h'), 1.0 / 6.0 + 1e-6)
        with self.assertRaises(ValueError):
            envelope_derivative_sup('q')
        with self.assertRaises(ValueError):
            envelope_derivative_sup('g', samples=10)


class GridTestCase(SimpleTestCase):

    def test_invalid_grids(self):
        with self.assertRaises(InvalidGrid):
            make_grid(1.0, 1)
        with self.assertRaises(InvalidGrid):
            make_grid(0.0, 4)
        with self.assertRaises(InvalidGrid):
            make_grid(1.0, 2.5)

    def test_nested_nodes_match_bitwise(self):
        fine, coarse = make_grid(1.0, 27), make_grid(1.0, 9)
        self.assertTrue(np.array_equal(fine.nodes[::3], coarse.nodes))

    def test_grid_function_validation(self):
        grid = make_grid(1.0, 4)
        with self.assertRaises(ValueError):
            GridFunction(grid, np.zeros(4))
        with self.assertRaises(NonFiniteSample):
            GridFunction(grid, [0, 1, np.inf, 0, 0])
        with self.assertRaises(NonFiniteSample):
            sample(lambda x: np.log(x), grid)

    def test_norms_of_a_constant(self):
        v = sample(lambda x: np.ones_like(x), make_grid(1.0, 4))
        norms = grid_norms(v, 2.0)
        self.assertEqual(norms['linf'], 1.0)
        self.assertAlmostEqual(norms['l2h'], math.sqrt(0.75))
        self.assertEqual(norms['h1'], 0.0)
        self.assertAlmostEqual(norms['v'], 2.0 * math.sqrt(0.75))

    def test_norms_are_homogeneous_and_subadditive(self):
        rng = np.random.default_rng(3)
        for n in (4, 37, 200):
            v, w = random_grid_function(rng, n), random_grid_function(rng, n)
            c = complex(*rng.standard_normal(2))
            scaled = GridFunction(v.grid, c * v.values)
            total = GridFunction(v.grid, v.values + w.values)
            norms_v, norms_w = grid_norms(v, 7.0), grid_norms(w, 7.0)
            for name, value in grid_norms(scaled, 7.0).items():
                self.assertAlmostEqual(value, abs(c) * norms_v[name], delta=1e-12 * abs(c) * norms_v[name])
            for name, value in grid_norms(total, 7.0).items():
                self.assertLessEqual(value, (norms_v[name] + norms_w[name]) * (1 + 1e-12), (n, name))

    def test_summation_by_parts(self):
        rng = np.random.default_rng(5)
        for n in (3, 50, 729):
            v = random_grid_function(rng, n)
            h, u, d = v.grid.h, v.values, forward_diff(v)
            lhs = h * np.sum(discrete_laplacian(v) * np.conj(u[1:-1]))
            rhs = -seminorm_h1h(v) ** 2 + d[-1] * np.conj(u[-1]) - d[0] * np.conj(u[0])
            scale = seminorm_h1h(v) ** 2 + abs(d[-1] * u[-1]) + abs(d[0] * u[0])
            self.assertLessEqual(abs(lhs - rhs), 1e-12 * scale, n)

    def test_laplacian_of_a_quadratic(self):
        v = sample(lambda x: x ** 2, make_grid(1.0, 8))
        self.assertTrue(np.allclose(discrete_laplacian(v), 2.0, atol=1e-11))

    def test_restrict(self):
        fine = sample(lambda x: x, make_grid(1.0, 12))
        coarse = restrict(fine, make_grid(1.0, 4))
        self.assertTrue(np.array_equal(coarse.values, make_grid(1.0, 4).nodes))
        with self.assertRaises(NonNestedGrids):
            restrict(fine, make_grid(1.0, 5))

    def test_error_report_edge_cases(self):
        grid = make_grid(1.0, 4)
        zero = GridFunction(grid, np.zeros(5))
        one = GridFunction(grid, np.ones(5))
        # Zero error is zero even against a zero reference
        self.assertEqual(error_report(zero, zero, 1.0).relative['linf'], 0.0)
        self.assertEqual(error_report(one, zero, 1.0).relative['linf'], float('inf'))
        self.assertEqual(error_report(one, one, 1.0).absolute['v'], 0.0)


class TridiagonalTestCase(SimpleTestCase):

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            size = int(rng.integers(1, 65))
            lower = rng.uniform(-1, 1, size - 1) + 1j * rng.uniform(-1, 1, size - 1)
            upper = rng.uniform(-1, 1, size - 1) + 1j * rng.uniform(-1, 1, size - 1)
            diag = 4.0 + rng.uniform(-1, 1, size) + 1j * rng.uniform(-1, 1, size)
            rhs = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            system = TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)

            dense = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
            expected = np.linalg.solve(dense, rhs)
            x = solve_tridiagonal(system)
            self.assertLessEqual(np.linalg.norm(x - expected) / np.linalg.norm(expected), 1e-11)

    def test_single_unknown(self):
        system = TridiagonalSystem(lower=[], diag=[2.0], upper=[], rhs=[4.0j])
        self.assertEqual(solve_tridiagonal(system)[0], 2.0j)

    def test_zero_pivot_is_singular(self):
        system = TridiagonalSystem(lower=[1.0], diag=[0.0, 1.0], upper=[1.0], rhs=[1.0, 1.0])
        with self.assertRaises(SingularSystem) as context:
            solve_tridiagonal(system)
        self.assertEqual(context.exception.row, 0)

    def test_shape_checks(self):
        with self.assertRaises(ValueError):
            TridiagonalSystem(lower=[1.0, 1.0], diag=[1.0, 1.0], upper=[1.0], rhs=[1.0, 1.0])
        with self.assertRaises(ValueError):
            TridiagonalSystem(lower=[1.0], diag=[1.0, 1.0], upper=[1.0], rhs=[1.0])

    def test_equilibrated_rows(self):
        system = TridiagonalSystem(lower=[3.0], diag=[2.0, -6.0], upper=[1.0], rhs=[1.0, 1.0])
        scaled = system.equilibrated()
        self.assertTrue(np.allclose(scaled.row_scales(), 1.0))
        x = solve_tridiagonal(system)
        self.assertTrue(np.allclose(system.matvec(x), system.rhs))


class SchemeTestCase(SimpleTestCase):

    def test_plane_wave_exactness(self):
        # Sampled plane waves solve the BPF system exactly, even at kh = 16
        for k, n in ((2.0 ** 7, 8), (2.0 ** 5, 4), (50.0, 37)):
            problem, exact = plane_wave_problem(k, 2.0, 1.0)
            u_h = solve_scheme(problem, n)
            self.assertLessEqual(norm_linf(u_h - sample(exact.u, u_h.grid)), 1e-12)

    def test_nyquist_grid_is_rejected(self):
        problem, _ = plane_wave_problem(4.0 * math.pi, 2.0, 1.0)
        with self.assertRaises(NearNyquist):
            solve_scheme(problem, 4)

    def test_invalid_problems(self):
        with self.assertRaises(InvalidProblem):
            HelmholtzProblem(k=0.0, L=1.0, f=lambda x: x, g0=0j, gL=0j)
        with self.assertRaises(InvalidProblem):
            HelmholtzProblem(k=1.0, L=-1.0, f=lambda x: x, g0=0j, gL=0j)
        problem, _ = sine_squared_problem(8.0)
        with self.assertRaises(InvalidProblem):
            assemble(problem, 16, SchemeKind.CLASSICAL_FD, boundary_correction=True)

    def test_three_point_schemes_are_second_order(self):
        problem, exact = sine_squared_problem(4.0)
        for kind in (SchemeKind.CLASSICAL_FD, SchemeKind.DISPERSION_CORRECTED_FD):
            errors = []
            for n in (64, 128):
                u_h = solve_scheme(problem, n, kind)
                errors.append(norm_linf(u_h - sample(exact.u, u_h.grid)))
            self.assertGreater(errors[0] / errors[1], 3.0, kind.label)

    def test_bpf_beats_classical_fd_at_fixed_kh(self):
        problem, exact = sine_squared_problem(256.0)
        errors = {}
        for kind in SchemeKind:
            u_h = solve_scheme(problem, 512, kind)
            errors[kind] = error_report(u_h, sample(exact.u, u_h.grid), 256.0).relative['linf']
        self.assertLess(errors[SchemeKind.BPF], errors[SchemeKind.DISPERSION_CORRECTED_FD])
        self.assertLess(errors[SchemeKind.DISPERSION_CORRECTED_FD], errors[SchemeKind.CLASSICAL_FD])

    def test_operator_identities_on_random_grid_functions(self):
        rng = np.random.default_rng(3)
        for k, n in ((10.0, 20), (150.0, 64), (33.3, 250)):
            v = random_grid_function(rng, n)
            self.assertLessEqual(factorization_check(v, k).relative_error, 1e-12)
            self.assertLessEqual(boundary_rewrite_check(v, k).relative_error, 1e-13)
            self.assertLessEqual(flux_energy_check(v, k).relative_error, 1e-12)


class ReferenceTestCase(SimpleTestCase):

    def test_exact_solutions_satisfy_their_problems(self):
        for problem, exact in (
            plane_wave_problem(32.0, 2.0, 1.0),
            smooth_manufactured_problem(32.0),
            sine_squared_problem(32.0),
            constant_source_problem(32.0, c=3.0),
        ):
            pde, left, right = exact_solution_defects(problem, exact)
            self.assertLess(pde, 1e-9, problem.name)
            self.assertLess(left, 1e-10, problem.name)
            self.assertLess(right, 1e-10, problem.name)

    def test_sine_squared_coefficients(self):
        fhat = sine_coefficients(lambda x: np.sin(math.pi * x) ** 2, 1.0, 8, quad_points_per_mode=64)
        for n, coefficient in enumerate(fhat.coefficients, start=1):
            expected = 0.0 if n % 2 == 0 else math.sqrt(2) * -4.0 / (n * math.pi * (n * n - 4))
            self.assertAlmostEqual(coefficient.real, expected, places=8)
            self.assertAlmostEqual(coefficient.imag, 0.0, places=12)

    def test_resonant_and_unknown_benchmarks(self):
        with self.assertRaises(ResonantSource):
            sine_squared_problem(2.0 * math.pi)
        with self.assertRaises(ValueError):
            build_benchmark('nope', 1.0)

    def test_box_source_includes_its_edges(self):
        problem = box_source_problem(32.0)
        values = problem.source_values(make_grid(1.0, 18)).real
        # 7/18 and 11/18 are the support endpoints 1/2 -+ 1/9
        self.assertEqual(values[7], 50.0)
        self.assertEqual(values[11], 50.0)
        self.assertEqual(values[6], 0.0)
        self.assertEqual(values[12], 0.0)
        # Just outside the support the source vanishes
        self.assertEqual(float(problem.f(0.5 + 1.0 / 9.0 + 1e-12)), 0.0)
        self.assertEqual(float(problem.f(0.5 - 1.0 / 9.0 - 1e-12)), 0.0)
        self.assertEqual(float(problem.f(0.5)), 50.0)
        self.assertIsNone(problem.exact)

    def test_problem_key(self):
        first, _ = sine_squared_problem(32.0)
        second, _ = sine_squared_problem(32.0)
        self.assertEqual(problem_key(first), problem_key(second))
        self.assertNotEqual(problem_key(first), problem_key(first.with_homogeneous_radiation()))
        self.assertNotEqual(problem_key(first), problem_key(sine_squared_problem(64.0)[0]))

    def test_in_memory_cache_solves_once(self):
        cache = FineReferenceCache()
        problem, _ = sine_squared_problem(16.0)
        with patch('helmholtz.reference.solve_scheme', wraps=solve_scheme) as solver:
            first = cache.get_or_solve(problem, 64)
            second = cache.get_or_solve(problem, 64)
        solver.assert_called_once()
        self.assertIs(first, second)
        self.assertEqual(len(cache), 1)

    def test_unnamed_problems_are_not_cached(self):
        cache = FineReferenceCache()
        problem = HelmholtzProblem(k=5.0, L=1.0, f=lambda x: x, g0=1.0, gL=0j)
        cache.get_or_solve(problem, 32)
        self.assertEqual(len(cache), 0)


class ReferencePersistenceTestCase(TestCase):

    def setUp(self):
        self.problem, _ = sine_squared_problem(16.0)

    def test_reference_is_stored_and_reloaded(self):
        stored = FineReferenceCache(persist=True).get_or_solve(self.problem, 81)
        self.assertEqual(FineReference.objects.count(), 1)
        row = FineReference.objects.get()
        self.assertEqual(row.benchmark, 'sine2')
        self.assertEqual(row.n_ref, 81)

        # A fresh cache reads the row instead of solving again
        with patch('helmholtz.reference.solve_scheme') as solver:
            loaded = FineReferenceCache(persist=True).get_or_solve(self.problem, 81)
        solver.assert_not_called()
        self.assertTrue(np.array_equal(loaded.values, stored.values))

    def test_database_failure_falls_back_to_memory(self):
        cache = FineReferenceCache(persist=True)
        with patch('helmholtz.reference.FineReference') as model:
            model.objects.filter.side_effect = DatabaseError('database is locked')
            with self.assertLogs('helmholtz.reference', level='WARNING'):
                reference = cache.get_or_solve(self.problem, 27)
        self.assertFalse(cache.persist)
        self.assertEqual(reference.grid.n, 27)
        self.assertEqual(FineReference.objects.count(), 0)

    def test_stored_values_are_checked(self):
        row = FineReference.objects.create(
            problem_key='x' * 64, benchmark='sine2', wavenumber=16.0, length=1.0,
            n_ref=4, scheme='bpf', values=np.zeros(3, dtype=np.complex128).tobytes(),
        )
        with self.assertRaises(ValueError):
            row.as_array()


class ModalTestCase(SimpleTestCase):

    def test_multiplier_bounds(self):
        for k, kh in ((10.0, 0.2), (300.0, 1.0), (900.0, 2.9)):
            for which in ('interior', 'boundary'):
                samples = multiplier_samples(which, k, kh / k, count=500)
                self.assertTrue(all(item.within_bound() for item in samples), (which, k, kh))

    def test_interior_multiplier_matches_its_definition(self):
        k, h = 50.0, 0.02
        for xi in (3.0, 49.0, 51.0, 400.0):
            weight = theta(k * h)
            direct = (weight * 4.0 / h ** 2 * math.sin(xi * h / 2) ** 2 - xi ** 2) / (xi ** 2 - k ** 2)
            self.assertAlmostEqual(interior_multiplier(xi, h, k), direct, delta=1e-9 * max(1.0, abs(direct)))
        with self.assertRaises(NearResonantFrequency):
            interior_multiplier(k, h, k)

    def test_boundary_multiplier_is_continuous_at_xi_equal_k(self):
        k, h = 40.0, 1.0 / 64
        at_k = boundary_multiplier(k, h, k, 1.0)
        self.assertTrue(math.isfinite(at_k))
        for offset in (1e-9, 1e-6, 0.99e-4 / h, 1.01e-4 / h):
            nearby = boundary_multiplier(k + offset, h, k, 1.0)
            self.assertAlmostEqual(nearby, at_k, delta=1e-3 * abs(at_k))

    def test_kernel_lifting(self):
        lifting = kernel_lifting(1.0 + 2j, -3.0, 5.0, 1.0)
        self.assertAlmostEqual(abs(lifting(0.0) - (1.0 + 2j)), 0.0, places=12)
        self.assertAlmostEqual(abs(lifting(1.0) + 3.0), 0.0, places=12)
        with self.assertRaises(ResonantWavenumber):
            kernel_lifting(1.0, 1.0, math.pi, 1.0)

    def test_parseval_partial_sums(self):
        fhat = sine_coefficients(lambda x: np.sin(math.pi * x) ** 2, 1.0, 64, quad_points_per_mode=64)
        sums = fhat.parseval_partial_sums()
        self.assertEqual(len(sums), 64)
        self.assertTrue(np.all(np.diff(sums) >= 0.0))
        # ||sin^2(pi x)||^2 on (0, 1) is 3/8
        self.assertLessEqual(sums[-1], 0.375 + 1e-9)
        self.assertAlmostEqual(sums[-1], 0.375, delta=1e-6)

    def test_dirichlet_resonance(self):
        fhat = sine_coefficients(lambda x: np.ones_like(x), 1.0, 8)
        with self.assertRaises(ModalResonance):
            dirichlet_modal_solution(fhat, 3.0 * math.pi)

    def test_modal_decomposition_reproduces_the_exact_solution(self):
        problem, exact = sine_squared_problem(32.0)
        decomposition = modal_decomposition(problem, modes=400)
        x = np.linspace(0.0, 1.0, 11)
        scale = float(np.max(np.abs(exact.u(x))))
        self.assertLess(float(np.max(np.abs(decomposition(x) - exact.u(x)))), 1e-6 * scale)

    def test_modal_residual_representation(self):
        problem, _ = smooth_manufactured_problem(32.0)
        report = modal_residual_representation_check(problem, 3 ** 5, modes=400)
        self.assertTrue(report.consistent)
        self.assertLessEqual(report.allowance_ratio, 1.0)

    def test_modal_allowance_ratio(self):
        report = ModalResidualReport(
            tau_norm=1.0, tau_mismatch=0.0, tau_tail=0.0, tau_floor=0.0,
            beta0=1e-6, beta0_modal=1e-6 + 5e-8, betaL=1e-6, betaL_modal=1e-6,
            beta_tail=1e-8, beta_floor=0.0, rtol=1e-4,
        )
        # beta_0 allowance is 1e-4 * 1e-6 + 2e-8
        self.assertAlmostEqual(report.allowance_ratio, 5e-8 / 2.01e-8, places=9)
        self.assertFalse(report.consistent)
        within = replace(report, beta_tail=3e-8)
        self.assertLess(within.allowance_ratio, 1.0)
        self.assertTrue(within.consistent)
        exact = replace(report, tau_norm=0.0, beta0_modal=1e-6, beta_tail=0.0)
        self.assertEqual(exact.allowance_ratio, 0.0)


class ErrorAnalysisTestCase(SimpleTestCase):

    def test_residual_bounds(self):
        for k, n in ((16.0, 243), (64.0, 729), (256.0, 729)):
            problem, _ = smooth_manufactured_problem(k)
            self.assertTrue(residual_report(problem, n).within_bounds, (k, n))

    def test_constant_source_leading_boundary_residual(self):
        k, n = 32.0, 3 ** 5
        problem, _ = constant_source_problem(k)
        report = leading_residual_terms(problem, n)
        kh = k / n
        # beta_0 = (c/k) tan(kh/2) exactly, so it differs from ch/2 by about (kh)^2/12
        self.assertAlmostEqual(report.beta0_relative_mismatch, kh ** 2 / 12, delta=0.1 * kh ** 2 / 12)
        self.assertAlmostEqual(report.betaL_relative_mismatch, kh ** 2 / 12, delta=0.1 * kh ** 2 / 12)

    def test_boundary_correction_raises_the_order(self):
        problem, exact = constant_source_problem(8.0)
        plain, corrected = [], []
        for n in (64, 128):
            for errors, flag in ((plain, False), (corrected, True)):
                u_h = solve_scheme(problem, n, boundary_correction=flag)
                errors.append(norm_linf(u_h - sample(exact.u, u_h.grid)))
        self.assertGreater(plain[0] / plain[1], 1.6)
        self.assertLess(plain[0] / plain[1], 2.5)
        self.assertGreater(corrected[0] / corrected[1], 6.0)

    def test_energy_and_flux_estimates(self):
        for name in ('smooth', 'sine2', 'box'):
            problem = build_benchmark(name, 48.0).with_homogeneous_radiation()
            u_h = solve_scheme(problem, 200)
            self.assertLessEqual(energy_identity_check(problem, u_h).relative_error, 1e-10, name)
            self.assertTrue(all(check.holds for check in flux_estimate_check(problem, u_h)), name)

    def test_flux_estimate_needs_homogeneous_data(self):
        problem, _ = sine_squared_problem(16.0)
        u_h = solve_scheme(problem, 64)
        with self.assertRaises(InvalidProblem):
            flux_estimate_check(problem, u_h)

    def test_stability_bounds(self):
        for name in ('planewave', 'smooth', 'box', 'sine2'):
            problem = build_benchmark(name, 64.0)
            u_h = solve_scheme(problem, 256)
            for check in stability_bound_check(problem, u_h):
                self.assertTrue(check.holds, f"{name}: {check}")

    def test_error_equation_and_convergence_bound(self):
        problem, _ = smooth_manufactured_problem(32.0)
        u_h = solve_scheme(problem, 3 ** 5)
        self.assertLessEqual(error_equation_check(problem, 3 ** 5, u_h=u_h).relative_error, 1e-9)
        for check in convergence_bound_check(problem, 3 ** 5, u_h=u_h):
            self.assertTrue(check.holds, str(check))


class ConvergenceStudyTestCase(SimpleTestCase):

    def test_fit_rate(self):
        h = [0.1, 0.05, 0.025]
        self.assertAlmostEqual(fit_rate(h, [3 * x ** 2 for x in h]), 2.0)
        self.assertIsNone(fit_rate(h, [1e-3, 1e-13, 1e-14]))

    def test_smooth_benchmark_is_second_order(self):
        table = convergence_study('smooth', SchemeKind.BPF, 32.0, [243, 729, 2187])
        self.assertEqual([row.n for row in table.rows], [243, 729, 2187])
        for norm in ('linf', 'v'):
            self.assertGreaterEqual(table.rates[norm], 1.9)
            self.assertLessEqual(table.rates[norm], 2.1)

    def test_invalid_grid_lists(self):
        with self.assertRaises(InvalidGrid):
            convergence_study('smooth', SchemeKind.BPF, 32.0, [])
        with self.assertRaises(InvalidGrid):
            convergence_study('smooth', SchemeKind.BPF, 32.0, [81, 81])

    def test_box_needs_a_fine_reference(self):
        with self.assertRaises(InvalidProblem):
            error_sweep('box', [(SchemeKind.BPF, 32.0, 81)])
        with self.assertRaises(NonNestedGrids):
            error_sweep('box', [(SchemeKind.BPF, 32.0, 81)], n_ref=1000, cache=FineReferenceCache())

    def test_parallel_sweep_keeps_order_and_values(self):
        cells = [(kind, 64.0, n) for kind in SchemeKind for n in (128, 256)]
        serial = error_sweep('sine2', cells, workers=1)
        parallel = error_sweep('sine2', cells, workers=4)
        self.assertEqual([(row.kind, row.n) for row in parallel], [(kind, n) for kind, _, n in cells])
        self.assertEqual([row.error('v') for row in serial], [row.error('v') for row in parallel])

    def test_fixed_kh_helpers(self):
        self.assertEqual(grid_count_for_kh(32.0, 0.5), 64)
        with self.assertRaises(InvalidGrid):
            grid_count_for_kh(32.0, 0.3)
        self.assertTrue(decreasing_with_exceptions([3.0, 2.0, 1.0]))
        self.assertFalse(decreasing_with_exceptions([3.0, 4.0, 1.0]))
        self.assertTrue(decreasing_with_exceptions([3.0, 4.0, 1.0], allowed=1))

        rows = error_sweep('sine2', [(SchemeKind.BPF, k, n) for k in (32.0, 64.0) for n in (32, 64)])
        diagonals = fixed_kh_diagonals(rows)
        self.assertEqual(sorted(diagonals), [0.5, 1.0, 2.0])
        self.assertEqual([k for k, _ in diagonals[1.0]], [32.0, 64.0])


class RunConfigFormTestCase(SimpleTestCase):

    def test_parse_number(self):
        self.assertEqual(parse_number('2**-5'), 1 / 32)
        self.assertEqual(parse_number('3.5'), 3.5)
        self.assertEqual(n_from_h(2 ** -5), 32)

    def test_h_list_is_converted_to_grid_counts(self):
        form = RunConfigForm(data={'subcommand': 'convergence', 'k': 32, 'h_list': '2**-5,2**-6'})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['n_values'], [32, 64])

    def test_scheme_becomes_an_enum(self):
        form = RunConfigForm(data={'subcommand': 'convergence', 'k': 32, 'n_list': '9,27', 'scheme': 'fd-dc'})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertIs(form.cleaned_data['scheme'], SchemeKind.DISPERSION_CORRECTED_FD)

    def test_invalid_configurations(self):
        invalid = [
            {'subcommand': 'convergence', 'k': 32, 'n_list': '9,27', 'h_list': '0.5'},
            {'subcommand': 'convergence', 'k': 32, 'n_list': '27,9'},
            {'subcommand': 'convergence', 'k': 32},
            {'subcommand': 'convergence', 'k': 0, 'n_list': '9,27'},
            {'subcommand': 'convergence', 'k': 32, 'h_list': '0.3'},
            {'subcommand': 'convergence', 'k': 32, 'n_list': '9,2.5'},
            {'subcommand': 'convergence', 'k': 32, 'n_list': '9,27', 'scheme': 'fd',
             'boundary_correction': True},
            {'subcommand': 'table', 'n_list': '32'},
            {'subcommand': 'compare', 'k_list': '32', 'kh_list': '-1'},
            {'subcommand': 'verify', 'suite': 'everything'},
        ]
        for data in invalid:
            self.assertFalse(RunConfigForm(data=data).is_valid(), data)


@override_settings(HELMHOLTZ_WORKERS=2)
class CommandTestCase(TestCase):

    def call(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, no_color=True, **options)
        return out.getvalue().splitlines()

    def test_exactness(self):
        lines = self.call('run_exactness', k=2.0 ** 5, n=4)
        self.assertEqual(lines[0], 'k,n,h,kh,err_linf_abs')
        k, n, h, kh, error = lines[1].split(',')
        self.assertEqual(n, '4')
        self.assertEqual(float(kh), 8.0)
        self.assertLessEqual(float(error), 1e-12)

    def test_exactness_exit_codes(self):
        # kh = pi is a numerical guard failure, not a check failure
        with self.assertRaises(CommandError) as context:
            self.call('run_exactness', k=4.0 * math.pi, n=4)
        self.assertEqual(context.exception.returncode, 3)
        with self.assertRaises(CommandError) as context:
            self.call('run_exactness', k=-1.0, n=4)
        self.assertEqual(context.exception.returncode, 2)

    def test_convergence_csv(self):
        lines = self.call('run_convergence', k=16.0, n_list='81,243,729', benchmark='sine2')
        self.assertEqual(lines[0], 'k,h,err_linf_rel,err_v_rel')
        self.assertEqual(len(lines), 5)
        footer = lines[-1].split(',')
        self.assertEqual(footer[:2], ['rate_fit', ''])
        self.assertGreater(float(footer[3]), 1.8)

    def test_convergence_is_deterministic(self):
        first = self.call('run_convergence', k=16.0, n_list='27,81', benchmark='smooth', workers=1)
        second = self.call('run_convergence', k=16.0, n_list='27,81', benchmark='smooth', workers=3)
        self.assertEqual(first, second)

    def test_convergence_usage_errors(self):
        with self.assertRaises(CommandError) as context:
            self.call('run_convergence', n_list='')
        self.assertEqual(context.exception.returncode, 2)
        with self.assertRaises(CommandError) as context:
            self.call('run_convergence', benchmark='box', n_list='27,81', n_ref=100)
        self.assertEqual(context.exception.returncode, 2)

    def test_fine_reference_is_persisted(self):
        self.call('run_convergence', benchmark='box', k=16.0, n_list='27,81', n_ref=729)
        self.assertEqual(FineReference.objects.filter(benchmark='box', n_ref=729).count(), 1)

    def test_table_layout(self):
        lines = self.call('run_table', k_list='32,64', h_list='2**-5,2**-6')
        self.assertEqual(lines[0].split(',')[0], 'k')
        self.assertEqual(len(lines[0].split(',')), 3)
        self.assertTrue(lines[1].startswith('3.2000000000000000e+01,'))
        diagonal = [line for line in lines if line.startswith('1.0000000000000000e+00,')]
        self.assertEqual(len(diagonal), 1)
        self.assertEqual(diagonal[0].split(',')[1], 'true')

    def test_table_scheme(self):
        options = dict(k_list='32', h_list='2**-5,2**-6')
        corrected = self.call('run_table', scheme='fd-dc', **options)
        errors = [float(value) for value in corrected[1].split(',')[1:]]
        kind = SchemeKind.DISPERSION_CORRECTED_FD
        expected = error_sweep('sine2', [(kind, 32.0, 32), (kind, 32.0, 64)])
        self.assertEqual(errors, [float('%.16e' % row.error('v')) for row in expected])
        self.assertNotEqual(corrected[1], self.call('run_table', **options)[1])
        with self.assertRaises(CommandError) as context:
            self.call('run_table', scheme='spectral', **options)
        self.assertEqual(context.exception.returncode, 2)

    def test_convergence_default_wavenumber(self):
        command = run_convergence.Command()
        self.assertEqual(command.clean_config({'benchmark': 'box'})['k'], 2.0 ** 7)
        self.assertEqual(command.clean_config({'benchmark': 'sine2'})['k'], 2.0 ** 5)
        self.assertEqual(command.clean_config({'benchmark': 'box', 'k': 64.0})['k'], 64.0)

    def test_compare_single_k(self):
        lines = self.call('run_compare', k_list='32', kh_list='1')
        self.assertEqual(lines[0], 'scheme,kh,k,n,err_linf_rel')
        self.assertEqual([line.split(',')[0] for line in lines[1:]], ['bpf', 'fd-dc', 'fd'])

    def test_csv_to_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'exactness.csv')
            lines = self.call('run_exactness', out=path)
            self.assertIn(path, lines[0])
            with open(path) as handle:
                self.assertEqual(handle.readline().strip(), 'k,n,h,kh,err_linf_abs')

    def test_verify_multipliers(self):
        lines = self.call('run_verify', suite='multipliers', seed=1)
        self.assertTrue(lines)
        self.assertTrue(all(line.startswith('PASS multipliers.') for line in lines))

    def test_verify_residuals_lines_agree_with_their_verdict(self):
        lines = self.call('run_verify', suite='residuals')
        self.assertTrue(lines)
        for line in lines:
            status, _, value, threshold = line.split()[:4]
            self.assertEqual(status, 'PASS', line)
            self.assertLessEqual(float(value.split('=')[1]), float(threshold.split('=')[1]), line)
        bounds = next(line for line in lines if line.startswith('PASS residuals.residual_bounds '))
        # five wavenumbers on n = 3^5 .. 3^8
        self.assertTrue(bounds.endswith(' 20 cases'), bounds)

    def test_verify_failure_exit_code(self):
        failing = [CheckResult('identities', 'theta_range', False, 1.0, 0.0)]
        with patch('helmholtz.management.commands.run_verify.run_suite', return_value=failing):
            with self.assertRaises(CommandError) as context:
                self.call('run_verify', suite='identities')
        self.assertEqual(context.exception.returncode, 1)

    def test_verify_unknown_suite(self):
        with self.assertRaises(CommandError) as context:
            self.call('run_verify', suite='everything')
        self.assertEqual(context.exception.returncode, 2)
        with self.assertRaises(ValueError):
            run_suite('everything', 0)
