"""
Django management command to build the reference database from simulated views.
Renders every catalog object alone at random placements and stores one reference
per segmented region.

Usage:
    python manage.py build_db --views 50 --out var/refdb
    python manage.py build_db --views 50 --out var/refdb --seed 3 --params my.cfg
"""
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError
from tqdm import tqdm

from apps.refdb.storage import save_database
from apps.sim_harness.serializers import load_pipeline_config
from apps.sim_harness.trial import build_reference_db


class Command(BaseCommand):
    help = 'Build the reference database from rendered views of the five objects'

    def add_arguments(self, parser):
        parser.add_argument('--views', type=int, default=50, help='Views per object')
        parser.add_argument('--out', default=None, help='Database directory (default: REFDB_DIR)')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--params', default=None, help='Parameter file (default: GRASP_CONFIG_FILE)')

    def handle(self, *args, **options):
        if options['views'] < 1:
            raise CommandError('--views must be at least 1')
        try:
            config = load_pipeline_config(options['params'])
        except (FileNotFoundError, ValidationError) as exc:
            raise CommandError(str(exc))

        total = options['views'] * len(config.scene.objects())
        with tqdm(total=total, desc='Rendering views') as bar:
            db = build_reference_db(config, options['views'], options['seed'], progress=bar.update)

        out = save_database(db, options['out'] or settings.REFDB_DIR)
        per_object = ', '.join(f"{oid}: {len(db.references_for(oid))}" for oid in db.object_ids())
        self.stdout.write(f'References per object: {per_object}')
        self.stdout.write(self.style.SUCCESS(f'Saved {len(db)} references to {out}'))
