import tempfile
from pathlib import Path

from django.test import SimpleTestCase, override_settings

from diffusions.exceptions import ConfigurationError
from diffusions.forms import RunConfigForm, load_config_file, parse_tolerances, resolve_run_config

RUN_FILE = """[settings]
SCENARIO = torus-flat
DT = 0.0025
N_PATHS = 8
TOLERANCES = retraction-idempotence=1e-6, symbol-psd=-1e-9
"""


class RunConfigFormTests(SimpleTestCase):
    def data(self, **overrides):
        values = {
            'scenario': 'torus-flat', 'dt': 1e-3, 'horizon': 1.0, 'n_paths': 16, 'cloud_size': 257, 'seed': 1,
            'split': 0.5, 'probes': 200, 'levels': 4, 'small_time': 0.01, 'small_time_paths': 1000,
            'correlation_paths': 1000,
        }
        values.update(overrides)
        return values

    def test_valid_grid(self):
        self.assertTrue(RunConfigForm(self.data()).is_valid())

    def test_horizon_must_be_a_multiple_of_dt(self):
        form = RunConfigForm(self.data(dt=0.003))
        self.assertFalse(form.is_valid())
        self.assertIn('is not an integer', str(form.non_field_errors()))

    def test_coarsest_level_must_divide_the_horizon(self):
        self.assertFalse(RunConfigForm(self.data(horizon=0.1, levels=12)).is_valid())

    def test_step_must_be_positive(self):
        form = RunConfigForm(self.data(dt=0.0))
        self.assertFalse(form.is_valid())
        self.assertIn('dt', form.errors)

    def test_unknown_scenario_is_rejected(self):
        self.assertIn('scenario', RunConfigForm(self.data(scenario='klein-bottle')).errors)


class ResolveRunConfigTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        self.run_file = Path(self.directory.name) / 'run.ini'
        self.run_file.write_text(RUN_FILE)

    @override_settings(DIFFUSIONS_SEED=99, DIFFUSIONS_DT=1e-3)
    def test_scenario_defaults(self):
        config = resolve_run_config({'scenario': 's2-gradient'})
        self.assertEqual(config.horizon, 0.4)
        self.assertEqual(config.dt, 1e-3)
        self.assertEqual(config.seed, 99)
        self.assertEqual(config.tolerances, {})

    def test_file_values(self):
        values = load_config_file(self.run_file)
        self.assertEqual(values['scenario'], 'torus-flat')
        self.assertEqual(values['dt'], 0.0025)
        self.assertEqual(values['tolerances'], {'retraction-idempotence': 1e-6, 'symbol-psd': -1e-9})
        self.assertNotIn('seed', values)

    def test_flags_override_the_file(self):
        config = resolve_run_config({'config': str(self.run_file), 'n_paths': 4, 'scenario': None})
        self.assertEqual(config.scenario, 'torus-flat')
        self.assertEqual(config.n_paths, 4)
        self.assertEqual(config.dt, 0.0025)
        self.assertEqual(config.tolerances['retraction-idempotence'], 1e-6)

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            resolve_run_config({'config': str(Path(self.directory.name) / 'missing.ini')})

    def test_scenario_is_required(self):
        with self.assertRaises(ConfigurationError):
            resolve_run_config({})

    def test_invalid_grid_names_the_problem(self):
        with self.assertRaisesMessage(ConfigurationError, 'is not an integer'):
            resolve_run_config({'scenario': 'torus-flat', 'dt': 0.003})


class ToleranceOverrideTests(SimpleTestCase):
    def test_parse(self):
        self.assertEqual(parse_tolerances(['horizontality = 0.5']), {'horizontality': 0.5})

    def test_bad_entries(self):
        for entry in ('horizontality', 'no-such-check=1', 'horizontality=loose'):
            with self.assertRaises(ConfigurationError, msg=entry):
                parse_tolerances([entry])
