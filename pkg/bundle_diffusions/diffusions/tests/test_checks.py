import math

from django.test import SimpleTestCase, override_settings

from diffusions.checks import (
    CHECK_ANCHORS, GROUPS, CheckResult, CheckSuite, RunConfig, anchor_for, compare, run_suite, tolerance_for,
)
from diffusions.exceptions import ConfigurationError, StepSizeError


def small_config(**overrides):
    values = {
        'scenario': 'torus-flat', 'dt': 1e-2, 'horizon': 0.2, 'n_paths': 2, 'cloud_size': 17, 'seed': 11,
        'probes': 3, 'levels': 2,
    }
    values.update(overrides)
    return RunConfig(**values)


class ToleranceTests(SimpleTestCase):
    def test_configured_tolerance(self):
        self.assertEqual(tolerance_for('retraction-idempotence'), (1e-12, 'le'))

    def test_override_keeps_the_comparator(self):
        self.assertEqual(tolerance_for('retraction-idempotence', {'retraction-idempotence': 1e-6}), (1e-6, 'le'))

    def test_unknown_check(self):
        with self.assertRaises(ConfigurationError):
            tolerance_for('no-such-check')
        with self.assertRaises(ConfigurationError):
            anchor_for('no-such-check')

    @override_settings(DIFFUSIONS_TOLERANCES={'retraction-idempotence': (1e-12, 'lt')})
    def test_bad_comparator(self):
        with self.assertRaises(ConfigurationError):
            tolerance_for('retraction-idempotence')

    def test_every_group_check_has_an_anchor(self):
        from django.conf import settings
        self.assertEqual(set(settings.DIFFUSIONS_TOLERANCES) - set(CHECK_ANCHORS), set())

    def test_compare(self):
        self.assertTrue(compare(1e-13, 1e-12, 'le'))
        self.assertFalse(compare(2.0, 1.9, 'le'))
        self.assertTrue(compare(2.0, 1.9, 'ge'))
        self.assertFalse(compare(math.nan, 1.0, 'le'))
        self.assertFalse(compare(None, 1.0, 'ge'))


class CheckSuiteTests(SimpleTestCase):
    def setUp(self):
        self.suite = CheckSuite(small_config())

    def test_numerical_errors_become_failed_records(self):
        def measure():
            raise StepSizeError('step too large')

        result = self.suite.check('group-residual', measure)
        self.assertFalse(result.passed)
        self.assertTrue(math.isnan(result.value))
        self.assertIn('StepSizeError', result.detail)
        self.assertEqual(self.suite.records, [result])

    def test_measure_may_return_a_detail(self):
        result = self.suite.check('constant-rank', lambda: (0.0, 'rank 2'))
        self.assertTrue(result.passed)
        self.assertEqual(result.detail, 'rank 2')
        self.assertTrue(str(result).startswith('PASS constant-rank'))

    def test_check_rng_depends_only_on_seed_and_id(self):
        first = self.suite.rng('symbol-psd').standard_normal(3)
        second = CheckSuite(small_config()).rng('symbol-psd').standard_normal(3)
        other = self.suite.rng('right-inverse').standard_normal(3)
        self.assertEqual(list(first), list(second))
        self.assertNotEqual(list(first), list(other))

    def test_probe_count_is_capped(self):
        self.assertEqual(self.suite.count(1000), 3)
        self.assertEqual(self.suite.count(2), 2)

    def test_finite_difference_share_never_drops_to_zero(self):
        self.assertEqual(self.suite.share(10), 1)
        self.assertEqual(CheckSuite(small_config(probes=200)).share(10), 20)

    def test_default_point_counts_cover_the_required_sizes(self):
        suite = CheckSuite(small_config(probes=200))
        self.assertEqual(len(suite.base_points('lw-metricity', 200)), 200)
        self.assertEqual(len(suite.base_points('delta-leibniz', 200)), 200)
        self.assertEqual(len(suite.base_points('strongly-cohesive', 100)), 100)

    def test_unknown_group(self):
        with self.assertRaises(ConfigurationError):
            self.suite.run(['everything'])


class GeometryRunTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.report = run_suite(small_config(), ['geometry'])

    def test_records_are_known_checks(self):
        ids = [record.check_id for record in self.report.records]
        self.assertIn('retraction-idempotence', ids)
        self.assertIn('lw-metricity', ids)
        self.assertEqual(len(ids), len(set(ids)))
        for record in self.report.records:
            self.assertIsInstance(record, CheckResult)
            self.assertEqual(record.anchor, CHECK_ANCHORS[record.check_id])

    def test_flat_torus_geometry_passes(self):
        results = {record.check_id: record for record in self.report.records}
        for check_id in ('retraction-idempotence', 'projector-idempotence', 'constant-rank', 'kernel-projection'):
            self.assertTrue(results[check_id].passed, str(results[check_id]))

    def test_report_failures(self):
        self.assertEqual(self.report.failures, [r for r in self.report.records if not r.passed])
        self.assertEqual(self.report.groups, ['geometry'])

    def test_runs_are_deterministic(self):
        again = run_suite(small_config(), ['geometry'])
        self.assertEqual(
            [record.as_dict() for record in again.records if not math.isnan(record.value)],
            [record.as_dict() for record in self.report.records if not math.isnan(record.value)],
        )

    def test_known_groups(self):
        self.assertEqual(set(GROUPS), {'geometry', 'decomposition', 'skew', 'diffeo', 'engine'})
