"""
Machine-readable run outputs.

The JSON summary carries no wall-clock data and is written with sorted keys,
so a rerun with the same configuration and seed produces identical bytes.
"""
import csv
import hashlib
import json
import logging
import math
import platform
import subprocess
from pathlib import Path

import django
import numpy as np
import scipy
from django.conf import settings
from django.db import DatabaseError, transaction
from openpyxl import Workbook
from openpyxl.styles import Font, PatternFill
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from .models import CheckRecord, Report

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['check_id', 'anchor', 'value', 'tol', 'comparator', 'pass', 'seed', 'git_stamp', 'detail']


def git_stamp():
    """Short commit hash of the working tree, 'unknown' outside a repository"""
    try:
        result = subprocess.run(
            ['git', 'rev-parse', '--short', 'HEAD'],
            cwd=settings.BASE_DIR, capture_output=True, text=True, timeout=5, check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return 'unknown'
    return result.stdout.strip() or 'unknown'


def environment_stamp():
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'django': django.get_version(),
    }


def json_number(value):
    """Finite floats pass through; inf and nan become strings so the JSON stays strict"""
    value = float(value)
    if math.isfinite(value):
        return value
    return 'nan' if math.isnan(value) else ('inf' if value > 0 else '-inf')


def record_rows(suite_report, stamp):
    seed = suite_report.config.seed
    return [
        {
            'check_id': record.check_id,
            'anchor': record.anchor,
            'value': json_number(record.value),
            'tol': json_number(record.tolerance),
            'comparator': record.comparator,
            'pass': record.passed,
            'seed': seed,
            'git_stamp': stamp,
            'detail': record.detail,
        }
        for record in suite_report.records
    ]


def summary(command, suite_report, stamp=None, environment=None):
    stamp = stamp if stamp is not None else git_stamp()
    config = {key: value for key, value in suite_report.config.as_dict().items()}
    config['tolerances'] = dict(sorted(config['tolerances'].items()))
    return {
        'command': command,
        'scenario': suite_report.config.scenario,
        'seed': suite_report.config.seed,
        'git_stamp': stamp,
        'environment': environment if environment is not None else environment_stamp(),
        'config': config,
        'groups': suite_report.groups,
        'passed': suite_report.passed,
        'records': record_rows(suite_report, stamp),
    }


def dumps(data):
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + '\n'


def digest(data):
    return hashlib.sha256(dumps(data).encode()).hexdigest()


def output_stem(output_dir, command, scenario):
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir / f'{command}-{scenario}'


def write_json(path, data):
    Path(path).write_text(dumps(data))
    logger.info('wrote %s', path)
    return path


def write_records_csv(path, rows):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(RECORD_COLUMNS)
        for row in rows:
            writer.writerow([row[column] for column in RECORD_COLUMNS])
    logger.info('wrote %s', path)
    return path


def write_trace_csv(path, header, rows):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows([repr(value) for value in row] for row in rows)
    logger.info('wrote %s (%d rows)', path, len(rows))
    return path


def write_outputs(command, suite_report, output_dir, stamp=None, environment=None):
    """JSON summary, records CSV and one CSV per trace; returns (summary, written paths)"""
    data = summary(command, suite_report, stamp, environment)
    stem = output_stem(output_dir, command, suite_report.config.scenario)
    paths = [
        write_json(stem.with_suffix('.json'), data),
        write_records_csv(Path(f'{stem}-records.csv'), data['records']),
    ]
    for name, (header, rows) in sorted(suite_report.traces.items()):
        paths.append(write_trace_csv(Path(f'{stem}-{name}.csv'), header, rows))
    return data, paths


def _format_value(value):
    return value if isinstance(value, str) else f'{value:.4g}'


def write_pdf(path, data, traces=None):
    """One-page style summary: run header, the records table, and trace sizes"""
    styles = getSampleStyleSheet()
    document = SimpleDocTemplate(str(path), pagesize=A4, title=f'{data["command"]} {data["scenario"]}')
    story = [
        Paragraph(f'{data["command"]} on {data["scenario"]}', styles['Title']),
        Paragraph(f'seed {data["seed"]}, git {data["git_stamp"]}', styles['Normal']),
        Paragraph(', '.join(f'{key} {value}' for key, value in sorted(data['environment'].items())), styles['Normal']),
        Spacer(1, 12),
    ]

    table_data = [['Check', 'Value', 'Tolerance', 'Result']]
    for row in data['records']:
        bound = '<=' if row['comparator'] == 'le' else '>='
        table_data.append([
            row['check_id'], _format_value(row['value']), f'{bound} {_format_value(row["tol"])}',
            'PASS' if row['pass'] else 'FAIL',
        ])
    table = Table(table_data, repeatRows=1)
    style = [
        ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
        ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
        ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
        ('FONTSIZE', (0, 0), (-1, -1), 8),
        ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
    ]
    for index, row in enumerate(data['records'], start=1):
        if not row['pass']:
            style.append(('TEXTCOLOR', (3, index), (3, index), colors.red))
    table.setStyle(TableStyle(style))
    story.append(table)

    if traces:
        story.append(Spacer(1, 12))
        for name, (header, rows) in sorted(traces.items()):
            story.append(Paragraph(f'trace {name}: {len(rows)} rows of {", ".join(header)}', styles['Normal']))

    document.build(story)
    logger.info('wrote %s', path)
    return path


def write_xlsx(path, data, traces=None):
    workbook = Workbook()
    sheet = workbook.active
    sheet.title = 'records'
    sheet.append(RECORD_COLUMNS)
    for cell in sheet[1]:
        cell.font = Font(bold=True)
    failed = PatternFill(start_color='FFC7CE', end_color='FFC7CE', fill_type='solid')
    for row in data['records']:
        sheet.append([row[column] for column in RECORD_COLUMNS])
        if not row['pass']:
            for cell in sheet[sheet.max_row]:
                cell.fill = failed

    for name, (header, rows) in sorted((traces or {}).items()):
        trace_sheet = workbook.create_sheet(title=name[:31])
        trace_sheet.append(header)
        for row in rows:
            trace_sheet.append(list(row))

    workbook.save(path)
    logger.info('wrote %s', path)
    return path


def store_report(command, data):
    """Persist the summary and its records; None when the tables are missing"""
    try:
        with transaction.atomic():
            report = Report.objects.create(
                command=command,
                scenario=data['scenario'],
                seed=data['seed'],
                git_stamp=data['git_stamp'],
                environment=data['environment'],
                config=data['config'],
                digest=digest(data),
            )
            CheckRecord.objects.bulk_create([
                CheckRecord(
                    report=report,
                    check_id=row['check_id'],
                    anchor=row['anchor'],
                    value=row['value'] if isinstance(row['value'], float) else None,
                    tolerance=row['tol'],
                    comparator=row['comparator'],
                    passed=row['pass'],
                    detail=row['detail'],
                )
                for row in data['records']
            ])
            report.update_status()
    except DatabaseError as error:
        logger.warning('report not stored (%s); run migrate to enable history', error)
        return None
    logger.info('stored report %s', report.pk)
    return report
