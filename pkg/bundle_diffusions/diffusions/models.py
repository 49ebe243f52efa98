from django.db import models

from .scenarios import SCENARIO_CHOICES


class Report(models.Model):
    COMMAND_CHOICES = [
        ('verify_geometry', 'Verify geometry'),
        ('decompose', 'Decompose'),
        ('skew', 'Skew product'),
        ('diffeo', 'Diffeomorphism flow'),
        ('report', 'Full report'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    scenario = models.CharField(max_length=30, choices=SCENARIO_CHOICES)
    seed = models.BigIntegerField()
    git_stamp = models.CharField(max_length=64, blank=True)
    environment = models.JSONField(default=dict)
    config = models.JSONField(default=dict)
    digest = models.CharField(max_length=64, help_text='SHA-256 of the JSON summary')
    passed = models.BooleanField(default=False)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        status = 'passed' if self.passed else 'failed'
        return f'{self.get_command_display()} on {self.scenario} (seed {self.seed}, {status})'

    def update_status(self):
        """Recompute passed from the stored check records"""
        self.passed = not self.records.filter(passed=False).exists()
        self.save(update_fields=['passed'])
        return self.passed

    def get_failure_count(self):
        return self.records.filter(passed=False).count()


class CheckRecord(models.Model):
    COMPARATOR_CHOICES = [
        ('le', 'at most'),
        ('ge', 'at least'),
    ]

    report = models.ForeignKey(Report, on_delete=models.CASCADE, related_name='records')
    check_id = models.CharField(max_length=50)
    anchor = models.CharField(max_length=200)
    value = models.FloatField(null=True, blank=True)
    tolerance = models.FloatField()
    comparator = models.CharField(max_length=2, choices=COMPARATOR_CHOICES)
    passed = models.BooleanField(default=False)
    detail = models.TextField(blank=True)

    class Meta:
        ordering = ['report', 'id']

    def __str__(self):
        return f'{self.check_id}: {"PASS" if self.passed else "FAIL"}'
