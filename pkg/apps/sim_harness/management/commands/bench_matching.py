"""
Django management command to benchmark per-frame matching cost against database size.
Static videos are rendered and segmented once, then replayed for every size.

Usage:
    python manage.py bench_matching --db-sizes 10,20,30,40,50,60,70,80,90,100 --strategy prob --out bench.csv
    python manage.py bench_matching --db-sizes 10,50,100 --strategy all --videos 5 --duration-s 5
"""
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError
from tqdm import tqdm

from apps.refdb.storage import DatabaseFormatError, load_database
from apps.sim_harness.experiment import STRATEGIES, bench_matching, record_static_videos
from apps.sim_harness.serializers import load_pipeline_config


def parse_sizes(text):
    try:
        sizes = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise CommandError(f'Invalid --db-sizes {text!r}; expected e.g. 10,20,30')
    if not sizes or min(sizes) < 1:
        raise CommandError('--db-sizes must list positive integers')
    return sizes


class Command(BaseCommand):
    help = 'Measure matcher invocations and time per frame for growing database sizes'

    def add_arguments(self, parser):
        parser.add_argument('--db-sizes', required=True, help='Comma-separated database sizes')
        parser.add_argument('--strategy', choices=STRATEGIES, required=True)
        parser.add_argument('--out', required=True, help='Benchmark CSV')
        parser.add_argument('--db', default=None, help='Database directory (default: REFDB_DIR)')
        parser.add_argument('--videos', type=int, default=20)
        parser.add_argument('--duration-s', type=float, default=10.0)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--params', default=None, help='Parameter file (default: GRASP_CONFIG_FILE)')

    def handle(self, *args, **options):
        sizes = parse_sizes(options['db_sizes'])
        try:
            config = load_pipeline_config(options['params'])
            db = load_database(options['db'] or settings.REFDB_DIR, config.refdb)
        except (FileNotFoundError, DatabaseFormatError, ValidationError) as exc:
            raise CommandError(str(exc))
        if max(sizes) > len(db):
            raise CommandError(f'Database holds {len(db)} references; cannot benchmark size {max(sizes)}')

        with tqdm(total=options['videos'], desc='Recording videos') as bar:
            videos = record_static_videos(
                config, options['videos'], options['duration_s'], options['seed'], progress=bar.update,
            )

        table = bench_matching(db, sizes, options['strategy'], videos, config, seed=options['seed'])
        table.to_csv(options['out'], index=False)
        self.stdout.write(table.to_string(index=False))
        self.stdout.write(self.style.SUCCESS(f"Benchmark written to {options['out']}"))
