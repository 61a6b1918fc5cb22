"""
Django management command to segment one depth image into regions of interest.
Writes the edge mask and one mask per region as 8-bit PGM files.

Usage:
    python manage.py segment scene.pgm
    python manage.py segment scene.pgm --params my.cfg --out out/ --expected-width 0.06 --expected-height 0.20
"""
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from apps.depth_seg.images import read_depth_pgm, write_mask_pgm
from apps.depth_seg.segmentation import SegmentationService
from apps.sim_harness.serializers import load_pipeline_config


class Command(BaseCommand):
    help = 'Segment a 16-bit depth PGM into regions of interest'

    def add_arguments(self, parser):
        parser.add_argument('depth', help='16-bit depth PGM (millimetres, 0 = no reading)')
        parser.add_argument('--params', default=None, help='Parameter file (default: GRASP_CONFIG_FILE)')
        parser.add_argument('--out', default='.', help='Output directory for edges.pgm and roi_<i>.pgm')
        parser.add_argument('--expected-width', type=float, default=None, help='Object width in metres')
        parser.add_argument('--expected-height', type=float, default=None, help='Object height in metres')

    def handle(self, *args, **options):
        try:
            config = load_pipeline_config(options['params'])
            depth = read_depth_pgm(options['depth'])
        except (FileNotFoundError, OSError, ValueError, ValidationError) as exc:
            raise CommandError(str(exc))

        cam = config.scene.camera()
        if depth.shape != cam.shape:
            raise CommandError(f"Depth image is {depth.width}x{depth.height}, camera is {cam.width}x{cam.height}")

        params = config.segmentation
        width = options['expected_width'] or params.expected_width_m
        height = options['expected_height'] or params.expected_height_m
        params = params.for_object(width, height)

        result = SegmentationService.segment(depth, cam, params)
        out = Path(options['out'])
        write_mask_pgm(result.edges, out / 'edges.pgm')
        for i, roi in enumerate(result.rois):
            write_mask_pgm(roi.mask, out / f'roi_{i}.pgm')
            self.stdout.write(
                f"roi_{i}: {roi.pixel_count} px, {roi.metric_width:.3f} x {roi.metric_height:.3f} m, "
                f"median depth {roi.median_depth_mm:.0f} mm"
            )

        self.stdout.write(self.style.SUCCESS(f'{len(result.rois)} region(s) of interest written to {out}'))
