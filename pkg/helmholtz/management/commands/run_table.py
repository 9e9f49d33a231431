from helmholtz.analysis import decreasing_with_exceptions, error_sweep, fixed_kh_diagonals
from helmholtz.schemes import SchemeKind

from ._base import ExperimentCommand, format_number

# Coarse kh > pi entries are allowed one irregular step along a diagonal.
ALLOWED_RISES = 1


class Command(ExperimentCommand):
    help = 'Tabulates the relative error of one scheme over k x h and summarizes each fixed-kh diagonal.'
    subcommand = 'table'

    def add_experiment_arguments(self, parser):
        parser.add_argument('--k-list', dest='k_list', type=str,
                            default='32,64,128,256,512,1024', help='Comma-separated wavenumbers (table rows).')
        parser.add_argument('--n-list', dest='n_list', type=str, default=None,
                            help='Comma-separated grid counts (table columns).')
        parser.add_argument('--h-list', dest='h_list', type=str, default=None,
                            help='Comma-separated mesh sizes (table columns). Defaults to 2**-5..2**-10.')
        parser.add_argument('--scheme', default=SchemeKind.BPF.value, help='bpf, fd or fd-dc.')
        parser.add_argument('--benchmark', default='sine2')
        parser.add_argument('--norm', default='v', help='linf, l2h, h1 or v.')
        parser.add_argument('--n-ref', dest='n_ref', type=int, default=None,
                            help='Measure against a fine BPF solve instead of the exact solution.')

    def clean_config(self, options):
        if options.get('n_list') is None and options.get('h_list') is None:
            options['h_list'] = ','.join(f'2**-{j}' for j in range(5, 11))
        return super().clean_config(options)

    def run(self, config):
        k_list, n_values, norm = config['k_list'], config['n_values'], config['norm']
        kind = config['scheme']
        n_ref = config.get('n_ref')
        rows = error_sweep(
            config['benchmark'],
            [(kind, k, n) for k in k_list for n in n_values],
            n_ref=n_ref,
            workers=config['workers'],
            cache=self.reference_cache() if n_ref else None,
            tol=config['nyquist_tol'],
        )

        # Rows are k, columns are h, in the order given on the command line
        errors = {(row.k, row.n): row.error(norm) for row in rows}
        csv_rows = [['k'] + [format_number(1.0 / n) for n in n_values]]
        for k in k_list:
            csv_rows.append([format_number(k)] + [format_number(errors[float(k), n]) for n in n_values])

        csv_rows.append([])
        csv_rows.append(['diagonal_kh', 'decreasing', f'err_{norm}_rel (increasing k)'])
        for kh, entries in fixed_kh_diagonals(rows, norm).items():
            if len(entries) < 2:
                continue
            values = [error for _, error in entries]
            csv_rows.append(
                [format_number(kh), format_number(decreasing_with_exceptions(values, ALLOWED_RISES))]
                + [format_number(value) for value in values]
            )
        self.write_csv(config, csv_rows)
