from django import forms
from django.core.exceptions import ValidationError

from .grid import NORMS
from .reference import BENCHMARKS
from .schemes import SchemeKind
from .verification import SUITES

# Every benchmark lives on (0, 1).
BENCHMARK_LENGTH = 1.0


class NumberListField(forms.CharField):
    """Comma-separated numbers, e.g. ``32,64,128`` or ``2**-5,2**-6``."""

    def __init__(self, *, cast=float, **kwargs):
        self.cast = cast
        kwargs.setdefault('required', False)
        super().__init__(**kwargs)

    def to_python(self, value):
        value = super().to_python(value)
        if not value:
            return []
        items = []
        for item in value.split(','):
            item = item.strip()
            if not item:
                continue
            try:
                number = parse_number(item)
            except ValueError:
                raise ValidationError(f"'{item}' is not a number.")
            if self.cast is int:
                if number != int(number):
                    raise ValidationError(f"'{item}' is not an integer.")
                number = int(number)
            items.append(number)
        return items


def parse_number(text):
    """Parse a plain number or a power written as ``base**exponent``."""
    if '**' in text:
        base, exponent = text.split('**', 1)
        return float(base) ** float(exponent)
    return float(text)


def n_from_h(h, length=BENCHMARK_LENGTH):
    n = length / h
    rounded = int(round(n))
    if rounded < 2 or abs(n - rounded) > 1e-9 * n:
        raise ValidationError(f"h={h:g} does not divide L={length:g} into an integer number of cells.")
    return rounded


class RunConfigForm(forms.Form):
    SUBCOMMANDS = ('exactness', 'convergence', 'table', 'compare', 'verify')

    subcommand = forms.ChoiceField(choices=[(name, name) for name in SUBCOMMANDS])
    k = forms.FloatField(required=False, min_value=0.0)
    k_list = NumberListField()
    n = forms.IntegerField(required=False, min_value=2)
    n_list = NumberListField(cast=int)
    h_list = NumberListField()
    kh_list = NumberListField()
    n_ref = forms.IntegerField(required=False, min_value=2)
    scheme = forms.ChoiceField(
        required=False, choices=[(kind.value, kind.label) for kind in SchemeKind]
    )
    benchmark = forms.ChoiceField(required=False, choices=[(name, name) for name in BENCHMARKS])
    norm = forms.ChoiceField(required=False, choices=[(name, name) for name in NORMS])
    suite = forms.ChoiceField(required=False, choices=[(name, name) for name in SUITES])
    out = forms.CharField(required=False)
    seed = forms.IntegerField(required=False)
    nyquist_tol = forms.FloatField(required=False, min_value=0.0)
    workers = forms.IntegerField(required=False, min_value=1)
    boundary_correction = forms.BooleanField(required=False)

    def clean(self):
        cleaned_data = super().clean()
        subcommand = cleaned_data.get('subcommand')

        # Turn an h-list into grid counts before the per-command checks
        self.merge_grid_lists(cleaned_data)

        if subcommand == 'exactness':
            self.require(cleaned_data, 'k', 'n')
        elif subcommand == 'convergence':
            self.require(cleaned_data, 'k', 'n_values')
            self.validate_increasing(cleaned_data.get('n_values'))
        elif subcommand == 'table':
            self.require(cleaned_data, 'k_list', 'n_values')
        elif subcommand == 'compare':
            self.require(cleaned_data, 'k_list', 'kh_list')
        elif subcommand == 'verify':
            self.require(cleaned_data, 'suite')

        self.validate_positive(cleaned_data)
        self.validate_boundary_correction(cleaned_data)

        if cleaned_data.get('scheme'):
            cleaned_data['scheme'] = SchemeKind(cleaned_data['scheme'])
        return cleaned_data

    def merge_grid_lists(self, cleaned_data):
        n_list = cleaned_data.get('n_list') or []
        h_list = cleaned_data.get('h_list') or []
        if n_list and h_list:
            raise ValidationError("Give either an n-list or an h-list, not both.")
        if any(h <= 0 for h in h_list):
            raise ValidationError("Every entry of h_list must be positive.")
        if h_list:
            n_list = [n_from_h(h) for h in h_list]
        if any(n < 2 for n in n_list):
            raise ValidationError("Every grid needs at least two cells.")
        cleaned_data['n_values'] = n_list

    def require(self, cleaned_data, *names):
        missing = [name for name in names if cleaned_data.get(name) in (None, '', [])]
        if missing:
            subcommand = cleaned_data.get('subcommand')
            labels = ', '.join(name.replace('n_values', 'n_list or h_list') for name in missing)
            raise ValidationError(f"The {subcommand} command needs: {labels}.")

    def validate_increasing(self, n_values):
        if n_values and any(later <= earlier for earlier, later in zip(n_values, n_values[1:])):
            raise ValidationError("Grid sizes must be strictly increasing (h strictly decreasing).")

    def validate_positive(self, cleaned_data):
        k = cleaned_data.get('k')
        if k is not None and k <= 0:
            raise ValidationError("The wavenumber must be positive.")
        for name in ('k_list', 'kh_list'):
            if any(value <= 0 for value in cleaned_data.get(name) or []):
                raise ValidationError(f"Every entry of {name} must be positive.")

    def validate_boundary_correction(self, cleaned_data):
        scheme = cleaned_data.get('scheme')
        if cleaned_data.get('boundary_correction') and scheme and scheme != SchemeKind.BPF.value:
            raise ValidationError("The boundary correction only applies to the BPF scheme.")
