# Generated by Django 5.2.4 on 2026-10-17 10:02

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Report',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('verify_geometry', 'Verify geometry'), ('decompose', 'Decompose'), ('skew', 'Skew product'), ('diffeo', 'Diffeomorphism flow'), ('report', 'Full report')], max_length=20)),
                ('scenario', models.CharField(choices=[('torus-flat', 'torus-flat'), ('torus-rank1', 'torus-rank1'), ('s1-rank1', 's1-rank1'), ('s2-gradient', 's2-gradient'), ('s2-frames', 's2-frames'), ('trivial-bundle-so2', 'trivial-bundle-so2')], max_length=30)),
                ('seed', models.BigIntegerField()),
                ('git_stamp', models.CharField(blank=True, max_length=64)),
                ('environment', models.JSONField(default=dict)),
                ('config', models.JSONField(default=dict)),
                ('digest', models.CharField(help_text='SHA-256 of the JSON summary', max_length=64)),
                ('passed', models.BooleanField(default=False)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='CheckRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('check_id', models.CharField(max_length=50)),
                ('anchor', models.CharField(max_length=200)),
                ('value', models.FloatField(blank=True, null=True)),
                ('tolerance', models.FloatField()),
                ('comparator', models.CharField(choices=[('le', 'at most'), ('ge', 'at least')], max_length=2)),
                ('passed', models.BooleanField(default=False)),
                ('detail', models.TextField(blank=True)),
                ('report', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='diffusions.report')),
            ],
            options={
                'ordering': ['report', 'id'],
            },
        ),
    ]
