import csv
import math
from io import StringIO

import numpy as np
from django.core.management import call_command
from django.test import TestCase

from helmholtz.analysis import (
    convergence_bound_check,
    modal_residual_representation_check,
    residual_report,
)
from helmholtz.grid import error_report, norm_linf, sample
from helmholtz.reference import (
    FineReferenceCache,
    fine_grid_reference,
    plane_wave_problem,
    sine_squared_problem,
    smooth_manufactured_problem,
)
from helmholtz.schemes import solve_scheme

# Expected relative V-errors of the BPF scheme on the sin^2 benchmark, keyed by (k, h)
TABLE_SPOT_CHECKS = {
    (2.0 ** 5, 2.0 ** -5): 4.18e-05,
    (2.0 ** 6, 2.0 ** -6): 5.05e-06,
    (2.0 ** 10, 2.0 ** -10): 1.24e-09,
}


class ExperimentTests(TestCase):
    """The full experiment runs, driven through the management commands."""

    def run_command(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, no_color=True, **options)
        return out.getvalue()

    def read_csv(self, name, **options):
        return list(csv.reader(StringIO(self.run_command(name, **options))))

    def test_plane_wave_exactness(self):
        rows = self.read_csv('run_exactness', k=2.0 ** 7, n=8)
        self.assertLessEqual(float(rows[1][4]), 1e-12)

        # Random admissible (k, n) pairs
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 20:
            k, n = float(rng.uniform(1.0, 300.0)), int(rng.integers(4, 400))
            if not 0.05 < k / n < 3.0:
                continue
            problem, exact = plane_wave_problem(k, 2.0, 1.0)
            u_h = solve_scheme(problem, n)
            self.assertLessEqual(norm_linf(u_h - sample(exact.u, u_h.grid)), 1e-12, (k, n))
            checked += 1

    def test_smooth_source_convergence(self):
        rows = self.read_csv('run_convergence')
        self.assertEqual(rows[0], ['k', 'h', 'err_linf_rel', 'err_v_rel'])
        _, _, rate_linf, rate_v = rows[-1]
        for rate in (float(rate_linf), float(rate_v)):
            self.assertGreaterEqual(rate, 1.9)
            self.assertLessEqual(rate, 2.1)

        problem, _ = smooth_manufactured_problem(2.0 ** 5)
        for n in (3 ** j for j in range(5, 10)):
            for check in convergence_bound_check(problem, n):
                self.assertTrue(check.holds, f"n={n}: {check}")

    def test_table_spot_checks_and_diagonals(self):
        rows = self.read_csv('run_table')
        h_values = [float(h) for h in rows[0][1:]]
        matrix = {}
        for row in rows[1:]:
            if not row:
                break
            k = float(row[0])
            for h, value in zip(h_values, row[1:]):
                matrix[k, h] = float(value)

        for key, expected in TABLE_SPOT_CHECKS.items():
            self.assertLessEqual(matrix[key], 3.0 * expected, key)
            self.assertGreaterEqual(matrix[key], expected / 3.0, key)

        diagonals = [row for row in rows if row and row[1] in ('true', 'false')]
        self.assertTrue(diagonals)
        for row in diagonals:
            self.assertEqual(row[1], 'true', f"kh={row[0]}")

    def test_nonsmooth_source_trend(self):
        rows = self.read_csv(
            'run_convergence', benchmark='box', k=2.0 ** 7,
            n_list=','.join(str(3 ** j) for j in range(5, 11)),
        )
        _, _, rate_linf, rate_v = rows[-1]
        for rate in (float(rate_linf), float(rate_v)):
            self.assertGreaterEqual(rate, 1.6)
            self.assertLessEqual(rate, 2.3)

    def test_scheme_comparison(self):
        rows = self.read_csv('run_compare')[1:]
        errors = {(row[0], float(row[1]), float(row[2])): float(row[4]) for row in rows}
        for kh in (0.5, 1.0):
            for k in (2.0 ** j for j in range(6, 10)):
                bpf, corrected, classical = (errors[scheme, kh, k] for scheme in ('bpf', 'fd-dc', 'fd'))
                self.assertLess(bpf, corrected, (kh, k))
                self.assertLess(corrected, classical, (kh, k))

    def test_residual_bounds(self):
        for k in (2.0 ** j for j in range(4, 9)):
            problem, _ = smooth_manufactured_problem(k)
            for n in (3 ** j for j in range(5, 9)):
                if k / n >= math.pi:
                    continue
                report = residual_report(problem, n)
                self.assertTrue(report.within_bounds, (k, n))

    def test_modal_boundary_residual(self):
        problem, _ = smooth_manufactured_problem(2.0 ** 5)
        report = modal_residual_representation_check(problem, 3 ** 5, modes=2 ** 14)
        self.assertTrue(report.consistent)
        self.assertLessEqual(report.beta0_relative_mismatch, 1e-4)

    def test_verification_suites(self):
        for suite in ('identities', 'multipliers', 'stability', 'residuals'):
            output = self.run_command('run_verify', suite=suite)
            lines = output.splitlines()
            self.assertTrue(lines, suite)
            for line in lines:
                self.assertTrue(line.startswith('PASS '), line)

    def test_semi_analytic_matches_fine_reference(self):
        k = 2.0 ** 5
        problem, exact = sine_squared_problem(k)
        fine = fine_grid_reference(problem, 2 ** 18, cache=FineReferenceCache())
        report = error_report(fine, sample(exact.u, fine.grid), k)
        self.assertLessEqual(report.relative['v'], 1e-8)
