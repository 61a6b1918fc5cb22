"""
Edge-based segmentation of a depth image into object-sized superpixels.

Edges come from two masks: large first derivatives (occluding boundaries)
and large second derivatives (creases such as an object's contact with the
table). The crease mask is suppressed near occluding boundaries, since the
wider second-derivative kernel responds to every jump on both sides. After
closing gaps in the contour, connected edge-free regions become
superpixels, which are filtered by size, border contact and metric extent.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import cv2
import numpy as np

from apps.geometry.camera import CameraModel, back_project_pixels

from .derivatives import DIRECTIONS, derivative_1, derivative_2
from .images import DepthImage, EdgeMask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegParams:
    k1: int = 3
    k2: int = 6
    t1: float = 20.0
    t2: float = 0.6
    dilate_mask_r: int = 4
    dilate_close_r: int = 2
    erode_r: int = 1
    min_pixels: int = 200
    expected_width_m: float = 0.06
    expected_height_m: float = 0.20
    size_tol: float = 0.5
    border_fraction: float = 0.25

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("Kernel half-spans must be >= 1")
        if min(self.dilate_mask_r, self.dilate_close_r, self.erode_r) < 0:
            raise ValueError("Morphology radii cannot be negative")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError(f"Edge thresholds must be positive, got t1={self.t1}, t2={self.t2}")
        if not 0.0 < self.size_tol < 1.0:
            raise ValueError(f"size_tol must lie in (0, 1), got {self.size_tol}")
        if self.expected_width_m <= 0 or self.expected_height_m <= 0:
            raise ValueError("Expected object size must be positive")

    def for_object(self, width_m, height_m):
        return replace(self, expected_width_m=float(width_m), expected_height_m=float(height_m))


def _square(radius):
    return cv2.getStructuringElement(cv2.MORPH_RECT, (2 * radius + 1, 2 * radius + 1))


def dilate(mask, radius):
    if radius == 0:
        return np.asarray(mask, dtype=bool).copy()
    return cv2.dilate(np.asarray(mask, dtype=np.uint8), _square(radius)).astype(bool)


def erode(mask, radius):
    if radius == 0:
        return np.asarray(mask, dtype=bool).copy()
    return cv2.erode(np.asarray(mask, dtype=np.uint8), _square(radius)).astype(bool)


def edge_layers(img: DepthImage, params: SegParams):
    """
    Return (jump_mask, crease_mask) for the image.

    The crease mask never touches the jump mask dilated by ``dilate_mask_r``.
    """
    jumps = np.zeros(img.shape, dtype=bool)
    creases = np.zeros(img.shape, dtype=bool)
    with np.errstate(invalid='ignore'):
        for direction in DIRECTIONS:
            d1 = derivative_1(img, params.k1, direction)
            d2 = derivative_2(d1, params.k2, direction)
            jumps |= np.abs(d1) > params.t1
            creases |= np.abs(d2) > params.t2
    excluded = dilate(jumps, params.dilate_mask_r)
    creases = erode(creases & ~excluded, params.erode_r)
    return jumps, creases


def detect_edges(img: DepthImage, params: SegParams) -> EdgeMask:
    jumps, creases = edge_layers(img, params)
    edges = EdgeMask(jumps | creases)
    logger.debug(f"Edge mask: {edges.count()} of {img.data.size} pixels")
    return edges


def floodfill(free):
    """
    Label 4-connected regions of ``free``.

    Returns:
        tuple: (labels, stats) as from cv2.connectedComponentsWithStats;
        label 0 is the blocked background
    """
    _, labels, stats, _ = cv2.connectedComponentsWithStats(
        np.asarray(free, dtype=np.uint8), connectivity=4, ltype=cv2.CV_32S
    )
    return labels, stats


def _border_ring(shape):
    ring = np.zeros(shape, dtype=bool)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    return ring


@dataclass(frozen=True, eq=False)
class Superpixel:
    """A connected edge-free region with its 3-D statistics."""
    rows: np.ndarray
    cols: np.ndarray
    image_shape: tuple
    points: np.ndarray
    median_depth_mm: float
    metric_width: float
    metric_height: float
    centroid_3d: np.ndarray
    principal_axis: np.ndarray

    @property
    def pixel_count(self):
        return int(self.rows.size)

    @property
    def bbox(self):
        """(row_min, col_min, row_max, col_max), inclusive."""
        return (int(self.rows.min()), int(self.cols.min()), int(self.rows.max()), int(self.cols.max()))

    @cached_property
    def mask(self):
        mask = np.zeros(self.image_shape, dtype=bool)
        mask[self.rows, self.cols] = True
        mask.setflags(write=False)
        return mask

    def contains(self, rows, cols):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        height, width = self.image_shape
        inside = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
        hit = np.zeros(rows.shape, dtype=bool)
        r = np.clip(np.rint(rows).astype(int), 0, height - 1)
        c = np.clip(np.rint(cols).astype(int), 0, width - 1)
        hit[inside] = self.mask[r[inside], c[inside]]
        return hit

    def iou(self, other_mask):
        other_mask = np.asarray(other_mask, dtype=bool)
        union = np.logical_or(self.mask, other_mask).sum()
        if union == 0:
            return 0.0
        return float(np.logical_and(self.mask, other_mask).sum() / union)


def principal_axis(points):
    """Unit direction of largest spread, signed so its largest component is positive."""
    if len(points) < 3:
        return np.array([0.0, 0.0, 1.0])
    _, vectors = np.linalg.eigh(np.cov(points.T))
    axis = vectors[:, -1]
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    return axis / np.linalg.norm(axis)


def _metric_extent(cam, rows, cols, depth_mm):
    """Width and height of the pixel bounding box at a single depth."""
    row_c, col_c = rows.mean(), cols.mean()
    ends = back_project_pixels(
        cam,
        [row_c, row_c, rows.min() - 0.5, rows.max() + 0.5],
        [cols.min() - 0.5, cols.max() + 0.5, col_c, col_c],
        np.full(4, depth_mm),
    )
    return float(np.linalg.norm(ends[1] - ends[0])), float(np.linalg.norm(ends[3] - ends[2]))


def build_superpixel(img: DepthImage, cam: CameraModel, rows, cols) -> Superpixel:
    depths = img.data[rows, cols].astype(float)
    median = float(np.median(depths))
    points = back_project_pixels(cam, rows, cols, depths)
    width, height = _metric_extent(cam, rows, cols, median)
    return Superpixel(
        rows=rows,
        cols=cols,
        image_shape=img.shape,
        points=points,
        median_depth_mm=median,
        metric_width=width,
        metric_height=height,
        centroid_3d=points.mean(axis=0),
        principal_axis=principal_axis(points),
    )


def size_matches(sp: Superpixel, params: SegParams):
    width_err = abs(sp.metric_width - params.expected_width_m) / params.expected_width_m
    height_err = abs(sp.metric_height - params.expected_height_m) / params.expected_height_m
    return width_err <= params.size_tol and height_err <= params.size_tol


def extract_rois(img: DepthImage, cam: CameraModel, params: SegParams, edges: EdgeMask | None = None):
    """
    Superpixels whose size matches the expected object.

    Invalid depth counts as edge. Regions under ``min_pixels`` or covering more
    than ``border_fraction`` of the image border are dropped before the
    metric size check.
    """
    if (img.height, img.width) != cam.shape:
        raise ValueError(f"Depth image {img.shape} does not match camera {cam.shape}")
    if edges is None:
        edges = detect_edges(img, params)
    blocked = dilate(edges.bits, params.dilate_close_r) | ~img.valid
    labels, stats = floodfill(~blocked)

    ring = _border_ring(img.shape)
    ring_total = ring.sum()
    ring_hits = np.bincount(labels[ring], minlength=len(stats))

    rois = []
    for label in range(1, len(stats)):
        if stats[label, cv2.CC_STAT_AREA] < params.min_pixels:
            continue
        if ring_hits[label] > params.border_fraction * ring_total:
            continue
        rows, cols = np.nonzero(labels == label)
        sp = build_superpixel(img, cam, rows, cols)
        if size_matches(sp, params):
            rois.append(sp)
        else:
            logger.debug(
                f"Rejected region of {sp.pixel_count} px: "
                f"{sp.metric_width:.3f} x {sp.metric_height:.3f} m"
            )
    logger.debug(f"{len(rois)} region(s) of interest among {len(stats) - 1} regions")
    return rois


@dataclass(frozen=True)
class SegmentationResult:
    edges: EdgeMask
    rois: list


class SegmentationService:
    """Edge detection and region extraction in one call."""

    @staticmethod
    def segment(img: DepthImage, cam: CameraModel, params: SegParams) -> SegmentationResult:
        edges = detect_edges(img, params)
        return SegmentationResult(edges=edges, rois=extract_rois(img, cam, params, edges=edges))
