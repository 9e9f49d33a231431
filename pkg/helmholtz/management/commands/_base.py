import csv
import logging
from contextlib import contextmanager

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from helmholtz.exceptions import HelmholtzError, NumericalGuardError, SingularSystem
from helmholtz.forms import RunConfigForm
from helmholtz.reference import FineReferenceCache

logger = logging.getLogger('helmholtz.commands')

CHECK_FAILED = 1
USAGE_ERROR = 2
NUMERICAL_GUARD = 3

FORM_FIELDS = (
    'k', 'k_list', 'n', 'n_list', 'h_list', 'kh_list', 'n_ref', 'scheme', 'benchmark',
    'norm', 'suite', 'out', 'seed', 'nyquist_tol', 'workers', 'boundary_correction',
)


def format_number(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return '%.16e' % float(value)


def complex_columns(value):
    value = complex(value)
    return [format_number(value.real), format_number(value.imag)]


@contextmanager
def exit_codes():
    """Translate library errors into CommandError with the documented exit status."""
    try:
        yield
    except NumericalGuardError as exc:
        raise CommandError(f"numerical guard: {exc}", returncode=NUMERICAL_GUARD) from exc
    except SingularSystem as exc:
        raise CommandError(str(exc), returncode=CHECK_FAILED) from exc
    except (HelmholtzError, ValueError) as exc:
        raise CommandError(str(exc), returncode=USAGE_ERROR) from exc


class ExperimentCommand(BaseCommand):
    """Shared flags, validation and CSV output of the experiment commands."""

    subcommand = None

    def add_arguments(self, parser):
        parser.add_argument('--out', type=str, help='Write the CSV here instead of stdout.')
        parser.add_argument('--seed', type=int, help='Seed for randomized checks.')
        parser.add_argument('--nyquist-tol', type=float, dest='nyquist_tol',
                            help='Relative distance of kh from pi*Z that is rejected.')
        parser.add_argument('--workers', type=int, help='Size of the solver thread pool.')
        self.add_experiment_arguments(parser)

    def add_experiment_arguments(self, parser):
        pass

    def clean_config(self, options):
        data = {name: options.get(name) for name in FORM_FIELDS}
        data['subcommand'] = self.subcommand
        form = RunConfigForm(data={key: value for key, value in data.items() if value is not None})
        if not form.is_valid():
            errors = '; '.join(
                message for messages in form.errors.values() for message in messages
            )
            raise CommandError(errors, returncode=USAGE_ERROR)

        config = form.cleaned_data
        if config.get('seed') is None:
            config['seed'] = settings.HELMHOLTZ_SEED
        if config.get('nyquist_tol') is None:
            config['nyquist_tol'] = settings.HELMHOLTZ_NYQUIST_TOL
        if config.get('workers') is None:
            config['workers'] = settings.HELMHOLTZ_WORKERS
        return config

    def reference_cache(self):
        return FineReferenceCache(persist=settings.HELMHOLTZ_PERSIST_REFERENCES)

    def write_csv(self, config, rows):
        """Write rows of already formatted cells to --out or stdout."""
        path = config.get('out')
        if path:
            with open(path, 'w', newline='') as handle:
                csv.writer(handle, lineterminator='\n').writerows(rows)
            self.stdout.write(self.style.SUCCESS(f'Wrote {len(rows)} rows to {path}.'))
        else:
            csv.writer(self.stdout, lineterminator='\n').writerows(rows)

    def handle(self, *args, **options):
        config = self.clean_config(options)
        logger.debug('%s config: %s', self.subcommand, config)
        with exit_codes():
            self.run(config)

    def run(self, config):
        raise NotImplementedError
