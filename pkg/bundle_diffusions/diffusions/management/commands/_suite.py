from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from diffusions.checks import run_suite
from diffusions.exceptions import ConfigurationError, DiffusionError
from diffusions.forms import resolve_run_config
from diffusions.reporting import store_report, write_outputs
from diffusions.scenarios import SCENARIOS


class SuiteCommand(BaseCommand):
    """Shared flags and exit codes of the check commands"""

    groups = ()

    def add_arguments(self, parser):
        parser.add_argument('--scenario', choices=list(SCENARIOS), help='Built-in scenario name')
        parser.add_argument('--config', help='INI run file with a [settings] section')
        parser.add_argument('--dt', type=float, help='Finest time step')
        parser.add_argument('--T', dest='horizon', type=float, help='Time horizon')
        parser.add_argument('--N', dest='n_paths', type=int, help='Paths per refinement level')
        parser.add_argument('--J', dest='cloud_size', type=int, help='Tracked points of the diffeomorphism cloud')
        parser.add_argument('--seed', type=int, help='Seed of the counter-based generator')
        parser.add_argument('--split', type=float, help='Concatenation time as a fraction of T')
        parser.add_argument('--probes', type=int, help='Random probe points per geometric check')
        parser.add_argument('--levels', type=int, help='Dyadic refinement levels')
        parser.add_argument('--output', default=settings.DIFFUSIONS_OUTPUT_DIR, help='Directory for JSON and CSV outputs')
        parser.add_argument('--no-store', action='store_true', help='Do not save the report to the database')

    def get_groups(self, options):
        return list(self.groups)

    def handle(self, *args, **options):
        try:
            config = resolve_run_config(options)
            groups = self.get_groups(options)
            self.stdout.write(f'Running {", ".join(groups)} checks on {config.scenario} (seed {config.seed})')
            suite_report = run_suite(config, groups)
        except ConfigurationError as error:
            raise CommandError(str(error), returncode=2) from error
        except DiffusionError as error:
            raise CommandError(f'{type(error).__name__}: {error}', returncode=1) from error

        data, paths = write_outputs(self.command_name, suite_report, options['output'])
        for record in suite_report.records:
            style = self.style.SUCCESS if record.passed else self.style.ERROR
            self.stdout.write(style(str(record)))
        for path in paths:
            self.stdout.write(f'Wrote {path}')

        if settings.DIFFUSIONS_STORE_REPORTS and not options['no_store']:
            report = store_report(self.command_name, data)
            if report is None:
                self.stderr.write(self.style.WARNING('Report not stored; run migrate to keep a history'))

        self.after_outputs(data, suite_report, options)

        failures = suite_report.failures
        if failures:
            listing = ', '.join(record.check_id for record in failures)
            raise CommandError(f'{len(failures)} check(s) failed: {listing}', returncode=1)
        self.stdout.write(self.style.SUCCESS(f'All {len(suite_report.records)} checks passed'))

    def after_outputs(self, data, suite_report, options):
        pass

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]
