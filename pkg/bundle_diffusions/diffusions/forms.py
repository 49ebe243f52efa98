import logging
from pathlib import Path

from decouple import Config, Csv, RepositoryIni, UndefinedValueError
from django import forms
from django.conf import settings

from .checks import RunConfig
from .exceptions import ConfigurationError
from .scenarios import SCENARIO_CHOICES, get_scenario

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-9

# config file key -> (form field, cast)
FILE_KEYS = {
    'SCENARIO': ('scenario', str),
    'DT': ('dt', float),
    'HORIZON': ('horizon', float),
    'N_PATHS': ('n_paths', int),
    'CLOUD_SIZE': ('cloud_size', int),
    'SEED': ('seed', int),
    'SPLIT': ('split', float),
    'PROBES': ('probes', int),
    'LEVELS': ('levels', int),
}


def _integral(value):
    return abs(value - round(value)) <= GRID_TOLERANCE * max(1.0, abs(value))


class RunConfigForm(forms.Form):
    scenario = forms.ChoiceField(choices=SCENARIO_CHOICES)
    dt = forms.FloatField(min_value=0.0)
    horizon = forms.FloatField(min_value=0.0)
    n_paths = forms.IntegerField(min_value=2)
    cloud_size = forms.IntegerField(min_value=2)
    seed = forms.IntegerField(min_value=0)
    split = forms.FloatField(min_value=0.0, max_value=1.0)
    probes = forms.IntegerField(min_value=1)
    levels = forms.IntegerField(min_value=2, max_value=12)
    small_time = forms.FloatField(min_value=0.0)
    small_time_paths = forms.IntegerField(min_value=2)
    correlation_paths = forms.IntegerField(min_value=2)

    def clean_dt(self):
        dt = self.cleaned_data['dt']
        if dt <= 0.0:
            raise forms.ValidationError('Step size must be positive.')
        return dt

    def clean_horizon(self):
        horizon = self.cleaned_data['horizon']
        if horizon <= 0.0:
            raise forms.ValidationError('Horizon must be positive.')
        return horizon

    def clean(self):
        cleaned_data = super().clean()
        dt = cleaned_data.get('dt')
        horizon = cleaned_data.get('horizon')
        levels = cleaned_data.get('levels')
        if dt and horizon:
            if not _integral(horizon / dt):
                raise forms.ValidationError(f'T/dt = {horizon / dt:.6g} is not an integer.')
            if levels and not _integral(horizon / (dt * 2 ** (levels - 1))):
                raise forms.ValidationError(
                    f'The coarsest refinement step dt*2^{levels - 1} does not divide T = {horizon}.'
                )
        return cleaned_data


def parse_tolerances(entries):
    """['check-id=value', ...] -> {check_id: float}"""
    overrides = {}
    for entry in entries:
        check_id, separator, value = entry.partition('=')
        check_id = check_id.strip()
        if not separator or check_id not in settings.DIFFUSIONS_TOLERANCES:
            raise ConfigurationError(f'bad tolerance override {entry!r}')
        try:
            overrides[check_id] = float(value)
        except ValueError:
            raise ConfigurationError(f'tolerance for {check_id} is not a number: {value!r}') from None
    return overrides


def load_config_file(path):
    """Values from the [settings] section of an INI run file, keyed by form field"""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'config file {path} does not exist')
    config = Config(RepositoryIni(str(path)))
    values = {}
    for key, (name, cast) in FILE_KEYS.items():
        try:
            values[name] = config(key, cast=cast)
        except UndefinedValueError:
            continue
        except ValueError as error:
            raise ConfigurationError(f'{key} in {path}: {error}') from None
    values['tolerances'] = parse_tolerances(config('TOLERANCES', default='', cast=Csv()))
    logger.debug('read %d keys from %s', len(values), path)
    return values


def resolve_run_config(options):
    """Flags over config file over scenario defaults over settings; raises ConfigurationError when invalid"""
    file_values = load_config_file(options['config']) if options.get('config') else {}
    tolerances = file_values.pop('tolerances', {})
    scenario_name = options.get('scenario') or file_values.get('scenario')
    if not scenario_name:
        raise ConfigurationError('no scenario given; use --scenario or SCENARIO in the config file')
    scenario = get_scenario(scenario_name)

    data = {
        'dt': settings.DIFFUSIONS_DT,
        'n_paths': settings.DIFFUSIONS_N_PATHS,
        'cloud_size': settings.DIFFUSIONS_CLOUD_SIZE,
        'probes': settings.DIFFUSIONS_PROBES,
        'levels': settings.DIFFUSIONS_REFINEMENT_LEVELS,
        'split': 0.5,
        'small_time': settings.DIFFUSIONS_SMALL_TIME,
        'small_time_paths': settings.DIFFUSIONS_SMALL_TIME_PATHS,
        'correlation_paths': settings.DIFFUSIONS_CORRELATION_PATHS,
    }
    data.update(scenario.defaults())
    data.update(file_values)
    for name in RunConfigForm.base_fields:
        if options.get(name) is not None:
            data[name] = options[name]
    data['scenario'] = scenario.name

    form = RunConfigForm(data)
    if not form.is_valid():
        problems = '; '.join(
            f'{field}: {" ".join(messages)}' for field, messages in form.errors.items()
        )
        raise ConfigurationError(f'invalid run configuration: {problems}')
    return RunConfig(tolerances=tolerances, **form.cleaned_data)
