# Generated by Django 5.2.11 on 2026-10-18 10:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('mode', models.CharField(choices=[('vgg', 'Visually-guided grasping'), ('nvgg', 'Non-visually-guided grasping')], max_length=8)),
                ('model_error_mm', models.FloatField(default=0.0)),
                ('trials', models.PositiveIntegerField()),
                ('seed', models.BigIntegerField()),
                ('database_path', models.CharField(blank=True, max_length=500)),
                ('success_count', models.PositiveIntegerField(default=0)),
                ('failure_count', models.PositiveIntegerField(default=0)),
                ('converged_within_2s', models.FloatField(blank=True, null=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['mode', 'model_error_mm'], name='sim_run_condition_idx')],
            },
        ),
        migrations.CreateModel(
            name='TrialResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('seed', models.BigIntegerField()),
                ('outcome', models.CharField(choices=[('ObjectNotDetected', 'ObjectNotDetected'), ('GripperLost', 'GripperLost'), ('GraspingFailed', 'GraspingFailed'), ('LiftingFailed', 'LiftingFailed'), ('ObjectTouched', 'ObjectTouched'), ('ObjectNotTouched', 'ObjectNotTouched')], max_length=32)),
                ('convergence_time_s', models.FloatField(blank=True, null=True)),
                ('matcher_invocations', models.PositiveIntegerField(default=0)),
                ('frames', models.PositiveIntegerField(default=0)),
                ('tracking_frames', models.PositiveIntegerField(default=0)),
                ('mean_invocations_prob', models.FloatField(default=0.0)),
                ('mean_invocations_all', models.FloatField(default=0.0)),
                ('final_error_m', models.FloatField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='results', to='sim_harness.experimentrun')),
            ],
            options={
                'ordering': ['run', 'id'],
                'indexes': [models.Index(fields=['run', 'outcome'], name='sim_result_outcome_idx')],
            },
        ),
    ]
