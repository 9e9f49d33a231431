from helmholtz.analysis import comparison_sweep
from helmholtz.schemes import SchemeKind

from ._base import ExperimentCommand, format_number


class Command(ExperimentCommand):
    help = 'Compares BPF, dispersion-corrected FD and classical FD at fixed kh as k grows.'
    subcommand = 'compare'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--k-list', dest='k_list', type=str, default='32,64,128,256,512')
        parser.add_argument('--kh-list', dest='kh_list', type=str, default='0.5,1')
        parser.add_argument('--benchmark', default='sine2')
        parser.add_argument('--norm', default='linf', help='linf, l2h, h1 or v.')
        parser.add_argument('--n-ref', dest='n_ref', type=int, default=None)

    def run(self, config):
        norm = config['norm']
        n_ref = config.get('n_ref')
        rows = comparison_sweep(
            config['benchmark'],
            [SchemeKind.BPF, SchemeKind.DISPERSION_CORRECTED_FD, SchemeKind.CLASSICAL_FD],
            config['k_list'],
            config['kh_list'],
            n_ref=n_ref,
            workers=config['workers'],
            cache=self.reference_cache() if n_ref else None,
            tol=config['nyquist_tol'],
        )
        csv_rows = [['scheme', 'kh', 'k', 'n', f'err_{norm}_rel']]
        for row in rows:
            csv_rows.append([
                row.kind.value,
                format_number(row.k * row.h),
                format_number(row.k),
                format_number(row.n),
                format_number(row.error(norm)),
            ])
        self.write_csv(config, csv_rows)
