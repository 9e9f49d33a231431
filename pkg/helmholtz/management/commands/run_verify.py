from django.conf import settings
from django.core.management.base import CommandError

from helmholtz.verification import run_suite

from ._base import CHECK_FAILED, ExperimentCommand, format_number


class Command(ExperimentCommand):
    help = 'Runs one invariant suite and prints a PASS/FAIL line per check.'
    subcommand = 'verify'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--suite', required=True,
                            help='identities, multipliers, residuals or stability.')

    def run(self, config):
        results = run_suite(config['suite'], config['seed'], modes=settings.HELMHOLTZ_MODAL_TERMS)
        for result in results:
            style = self.style.SUCCESS if result.passed else self.style.ERROR
            self.stdout.write(style(result.summary_line()))

        if config.get('out'):
            self.write_csv(config, [['suite', 'check', 'passed', 'value', 'threshold', 'detail']] + [
                [result.suite, result.name, format_number(result.passed),
                 format_number(result.value), format_number(result.threshold), result.detail]
                for result in results
            ])

        failed = [result.name for result in results if not result.passed]
        if failed:
            raise CommandError(
                f"{len(failed)} check(s) failed: {', '.join(failed)}", returncode=CHECK_FAILED
            )
