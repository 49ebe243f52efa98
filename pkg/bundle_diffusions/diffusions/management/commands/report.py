from pathlib import Path

from django.core.management.base import CommandError
from django.db import DatabaseError

from diffusions.checks import GROUPS
from diffusions.models import Report
from diffusions.reporting import output_stem, write_pdf, write_xlsx

from ._suite import SuiteCommand


class Command(SuiteCommand):
    help = 'Run the integrator checks and every check group on a scenario, with PDF and spreadsheet exports'
    groups = ('engine', 'geometry', 'decomposition', 'skew', 'diffeo')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--groups', help=f'Comma-separated subset of {", ".join(self.groups)}')
        parser.add_argument('--pdf', action='store_true', help='Also render a PDF summary')
        parser.add_argument('--xlsx', action='store_true', help='Also write an .xlsx workbook')
        parser.add_argument('--history', action='store_true', help='List stored reports and exit')

    def get_groups(self, options):
        if not options.get('groups'):
            return list(self.groups)
        groups = [name.strip() for name in options['groups'].split(',') if name.strip()]
        unknown = [name for name in groups if name not in GROUPS]
        if unknown:
            raise CommandError(f'Unknown check group(s): {", ".join(unknown)}', returncode=2)
        return groups

    def handle(self, *args, **options):
        if options['history']:
            self.show_history()
            return
        super().handle(*args, **options)

    def after_outputs(self, data, suite_report, options):
        stem = output_stem(options['output'], self.command_name, data['scenario'])
        if options['pdf']:
            path = write_pdf(Path(f'{stem}.pdf'), data, suite_report.traces)
            self.stdout.write(f'Wrote {path}')
        if options['xlsx']:
            path = write_xlsx(Path(f'{stem}.xlsx'), data, suite_report.traces)
            self.stdout.write(f'Wrote {path}')

    def show_history(self):
        try:
            reports = list(Report.objects.all()[:50])
        except DatabaseError:
            raise CommandError('Report tables are missing; run migrate first', returncode=2) from None
        if not reports:
            self.stdout.write(self.style.WARNING('No stored reports'))
            return
        for report in reports:
            style = self.style.SUCCESS if report.passed else self.style.ERROR
            self.stdout.write(style(
                f'{report.created_at:%Y-%m-%d %H:%M} {report} {report.digest[:12]} '
                f'({report.get_failure_count()} failed of {report.records.count()})'
            ))
