from django.test import TestCase

from diffusions.models import CheckRecord, Report


class ReportModelTests(TestCase):
    def setUp(self):
        self.report = Report.objects.create(
            command='decompose', scenario='s2-frames', seed=3, digest='0' * 64, passed=True,
        )

    def test_str(self):
        self.assertEqual(str(self.report), 'Decompose on s2-frames (seed 3, passed)')

    def test_update_status_follows_the_records(self):
        CheckRecord.objects.create(
            report=self.report, check_id='alpha-psd', anchor='alpha', value=-1.0, tolerance=-1e-10,
            comparator='ge', passed=False,
        )
        self.assertFalse(self.report.update_status())
        self.assertEqual(self.report.get_failure_count(), 1)
        self.report.refresh_from_db()
        self.assertFalse(self.report.passed)

    def test_record_str(self):
        record = CheckRecord.objects.create(
            report=self.report, check_id='verticality', anchor='vertical', value=1e-9, tolerance=1e-6,
            comparator='le', passed=True,
        )
        self.assertEqual(str(record), 'verticality: PASS')
        self.assertEqual(list(self.report.records.all()), [record])
