from django.db import models

from .outcomes import SUCCESS_OUTCOMES, TrialOutcome


class ExperimentRun(models.Model):
    """One ``run_trials`` invocation: a batch of seeded trials under one condition."""
    MODE_CHOICES = (
        ('vgg', 'Visually-guided grasping'),
        ('nvgg', 'Non-visually-guided grasping'),
    )

    mode = models.CharField(max_length=8, choices=MODE_CHOICES)
    model_error_mm = models.FloatField(default=0.0)
    trials = models.PositiveIntegerField()
    seed = models.BigIntegerField()
    database_path = models.CharField(max_length=500, blank=True)

    # Summary counts, filled in when the batch finishes
    success_count = models.PositiveIntegerField(default=0)
    failure_count = models.PositiveIntegerField(default=0)
    converged_within_2s = models.FloatField(null=True, blank=True)

    # Timestamps
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['mode', 'model_error_mm'], name='sim_run_condition_idx'),
        ]

    @property
    def success_frequency(self):
        total = self.success_count + self.failure_count
        return self.success_count / total if total else None

    def __str__(self):
        return f"{self.mode.upper()} {self.model_error_mm:g} mm x{self.trials} (seed {self.seed})"


class TrialResult(models.Model):
    OUTCOME_CHOICES = tuple((outcome.value, outcome.value) for outcome in TrialOutcome)

    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='results')
    seed = models.BigIntegerField()
    outcome = models.CharField(max_length=32, choices=OUTCOME_CHOICES)
    convergence_time_s = models.FloatField(null=True, blank=True)
    matcher_invocations = models.PositiveIntegerField(default=0)
    frames = models.PositiveIntegerField(default=0)
    tracking_frames = models.PositiveIntegerField(default=0)
    mean_invocations_prob = models.FloatField(default=0.0)
    mean_invocations_all = models.FloatField(default=0.0)
    final_error_m = models.FloatField(null=True, blank=True)

    class Meta:
        ordering = ['run', 'id']
        indexes = [
            models.Index(fields=['run', 'outcome'], name='sim_result_outcome_idx'),
        ]

    @property
    def success(self):
        return TrialOutcome(self.outcome) in SUCCESS_OUTCOMES

    def __str__(self):
        return f"Trial {self.seed}: {self.outcome}"
