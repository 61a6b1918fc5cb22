"""
Django management command to run a batch of seeded grasping trials.
Writes results.csv, prints the outcome table and stores the run unless --no-store.

Usage:
    python manage.py run_trials --mode vgg --model-error-mm 40 --trials 50 --seed 1 --db var/refdb --out results.csv
    python manage.py run_trials --mode nvgg --model-error-mm 0 --trials 50 --seed 1 --workers 4 --no-store
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import transaction
from django.utils import timezone
from rest_framework.exceptions import ValidationError
from tqdm import tqdm

from apps.refdb.storage import DatabaseFormatError, load_database
from apps.sim_harness.experiment import records_frame, run_experiment, summarize, write_results_csv
from apps.sim_harness.models import ExperimentRun, TrialResult
from apps.sim_harness.pipeline import MODES
from apps.sim_harness.scene import TARGET_OBJECT
from apps.sim_harness.serializers import load_pipeline_config


class Command(BaseCommand):
    help = 'Run seeded grasping trials under one condition and report outcome statistics'

    def add_arguments(self, parser):
        parser.add_argument('--mode', choices=MODES, required=True)
        parser.add_argument('--model-error-mm', type=float, default=0.0)
        parser.add_argument('--trials', type=int, default=50)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--db', default=None, help='Database directory (default: REFDB_DIR)')
        parser.add_argument('--out', default=None, help='Results CSV (default: RESULTS_DIR/results.csv)')
        parser.add_argument('--params', default=None, help='Parameter file (default: GRASP_CONFIG_FILE)')
        parser.add_argument('--workers', type=int, default=None, help='Worker processes (default: SIM_WORKERS)')
        parser.add_argument('--no-store', action='store_true', help='Do not save the run in the database')

    def handle(self, *args, **options):
        if options['trials'] < 1:
            raise CommandError('--trials must be at least 1')
        db_dir = options['db'] or settings.REFDB_DIR
        try:
            config = load_pipeline_config(options['params'])
            db = load_database(db_dir, config.refdb)
        except (FileNotFoundError, DatabaseFormatError, ValidationError) as exc:
            raise CommandError(str(exc))
        if not db.references_for(TARGET_OBJECT):
            raise CommandError(f'{db_dir} holds no reference of the target object')

        workers = options['workers'] or settings.SIM_WORKERS
        started = timezone.now()
        with tqdm(total=options['trials'], desc=f"{options['mode'].upper()} trials") as bar:
            records = run_experiment(
                options['mode'], options['model_error_mm'], options['trials'], options['seed'],
                db, config, workers=workers, progress=bar.update,
            )

        out = Path(options['out'] or Path(settings.RESULTS_DIR) / 'results.csv')
        out.parent.mkdir(parents=True, exist_ok=True)
        write_results_csv(records_frame(records), out)

        summary = summarize(records, config.trial.detection_timeout_s)
        self.stdout.write(summary.outcome_table.to_string())
        if summary.converged_within_2s is not None:
            self.stdout.write(f'Converged within 2 s: {summary.converged_within_2s:.0%} of detections')
        self.stdout.write(
            f'Matcher invocations per frame: {summary.mean_invocations_prob:.2f} (probabilistic), '
            f'{summary.mean_invocations_all:.2f} (all references)'
        )

        if not options['no_store']:
            self._store(options, db_dir, records, summary, started)

        self.stdout.write(self.style.SUCCESS(
            f'Success frequency {summary.success_frequency:.0%} over {len(records)} trials; results in {out}'
        ))

    @transaction.atomic
    def _store(self, options, db_dir, records, summary, started):
        successes = sum(record.success for record in records)
        run = ExperimentRun.objects.create(
            mode=options['mode'],
            model_error_mm=options['model_error_mm'],
            trials=options['trials'],
            seed=options['seed'],
            database_path=str(db_dir),
            success_count=successes,
            failure_count=len(records) - successes,
            converged_within_2s=summary.converged_within_2s,
            finished_at=timezone.now(),
        )
        ExperimentRun.objects.filter(pk=run.pk).update(started_at=started)
        TrialResult.objects.bulk_create([
            TrialResult(
                run=run,
                seed=record.seed,
                outcome=record.outcome.value,
                convergence_time_s=record.convergence_time_s,
                matcher_invocations=record.matcher_invocations,
                frames=record.frames,
                tracking_frames=record.tracking_frames,
                mean_invocations_prob=record.mean_invocations_prob,
                mean_invocations_all=record.mean_invocations_all,
                final_error_m=record.final_error_m,
            )
            for record in records
        ])
        self.stdout.write(f'Stored as experiment {run.pk}')
