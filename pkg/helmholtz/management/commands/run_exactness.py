from django.core.management.base import CommandError

from helmholtz.grid import norm_linf, sample
from helmholtz.reference import plane_wave_problem
from helmholtz.schemes import SchemeKind, solve_scheme

from ._base import CHECK_FAILED, ExperimentCommand, format_number

EXACTNESS_TOL = 1e-12


class Command(ExperimentCommand):
    help = 'Solves the plane-wave problem u = 2e^{ikx} + e^{-ikx} with BPF and reports the L-infinity error.'
    subcommand = 'exactness'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--k', type=float, default=2.0 ** 7, help='Wavenumber.')
        parser.add_argument('--n', type=int, default=8, help='Number of grid cells on (0, 1).')

    def run(self, config):
        k, n = config['k'], config['n']
        problem, exact = plane_wave_problem(k, 2.0, 1.0)
        u_h = solve_scheme(problem, n, SchemeKind.BPF, tol=config['nyquist_tol'])
        error = norm_linf(u_h - sample(exact.u, u_h.grid))

        self.write_csv(config, [
            ['k', 'n', 'h', 'kh', 'err_linf_abs'],
            [format_number(k), format_number(n), format_number(u_h.grid.h),
             format_number(k * u_h.grid.h), format_number(error)],
        ])

        # Plane waves are exact for the scheme, so anything above round-off is a failure
        if error > EXACTNESS_TOL:
            raise CommandError(
                f'plane-wave error {error:.3e} exceeds {EXACTNESS_TOL:g}', returncode=CHECK_FAILED
            )
