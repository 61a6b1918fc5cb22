"""
Django management command to bin the convergence times of a results file.

Usage:
    python manage.py histogram --in results.csv --out conv_hist.csv
    python manage.py histogram --in results.csv --out conv_hist.csv --bin-s 0.5
"""
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.sim_harness.experiment import convergence_histogram, fraction_converged_within, read_results_csv


class Command(BaseCommand):
    help = 'Write the convergence-time histogram of a results CSV'

    def add_arguments(self, parser):
        parser.add_argument('--in', dest='source', required=True, help='results.csv from run_trials')
        parser.add_argument('--out', required=True)
        parser.add_argument('--bin-s', type=float, default=1.0)
        parser.add_argument('--timeout-s', type=float, default=None, help='Histogram range (default: SIM_TIMEOUT_S)')

    def handle(self, *args, **options):
        if options['bin_s'] <= 0:
            raise CommandError('--bin-s must be positive')
        try:
            frame = read_results_csv(options['source'])
        except (FileNotFoundError, ValueError) as exc:
            raise CommandError(str(exc))

        timeout = options['timeout_s'] or settings.SIM_TIMEOUT_S
        histogram = convergence_histogram(frame['convergence_time_s'], options['bin_s'], timeout)
        histogram.to_csv(options['out'], index=False)

        share = fraction_converged_within(frame)
        if share is not None:
            self.stdout.write(f'Converged within 2 s: {share:.0%} of {frame["convergence_time_s"].notna().sum()} detections')
        self.stdout.write(self.style.SUCCESS(f"Histogram of {len(frame)} trials written to {options['out']}"))
