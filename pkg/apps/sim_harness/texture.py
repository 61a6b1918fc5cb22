"""
Procedural keypoint texture of the cylinders.

Each object carries fixed anchor points on its side surface. An anchor's
descriptor is a hash of the texture seed and its surface coordinates,
expanded to D reals; every observation adds Gaussian noise.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from apps.geometry.camera import CameraModel, PixelCoord, project_points
from apps.matching.descriptors import Keypoint

from .scene import object_label

logger = logging.getLogger(__name__)

MIN_FACING_COS = 0.3
DEPTH_AGREEMENT_M = 0.015
KEYPOINT_SIZE_M = 0.01


def anchor_descriptor(seed, theta, z, length):
    digest = hashlib.blake2b(np.array([seed, theta, z], dtype='<f8').tobytes(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, 'little'))
    return rng.standard_normal(length)


@dataclass(frozen=True, eq=False)
class SurfaceTexture:
    thetas: np.ndarray
    heights: np.ndarray
    descriptors: np.ndarray


@lru_cache(maxsize=32)
def surface_texture(spec, density, length) -> SurfaceTexture:
    count = max(1, int(round(density * np.pi * spec.diameter * spec.height)))
    rng = np.random.default_rng(spec.texture_seed)
    thetas = rng.uniform(0, 2 * np.pi, count)
    heights = rng.uniform(0, spec.height, count)
    descriptors = np.vstack([
        anchor_descriptor(spec.texture_seed, theta, z, length) for theta, z in zip(thetas, heights)
    ])
    return SurfaceTexture(thetas, heights, descriptors)


@dataclass(frozen=True, eq=False)
class VisibleAnchors:
    rows: np.ndarray
    cols: np.ndarray
    descriptors: np.ndarray
    scales: np.ndarray
    object_index: np.ndarray

    def __len__(self):
        return int(self.rows.size)


def visible_anchors(world, cam: CameraModel, hits) -> VisibleAnchors:
    """Anchors that face the camera and are the nearest surface at their pixel."""
    config = world.config
    origin = cam.world_from_camera().translation
    found = {'rows': [], 'cols': [], 'descriptors': [], 'scales': [], 'object_index': []}

    for index, obj in enumerate(world.objects):
        texture = surface_texture(obj.spec, config.keypoint_density, config.descriptor_length)
        angles = texture.thetas + obj.yaw
        normals = np.column_stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)])
        points = np.column_stack([
            obj.x + obj.spec.radius * normals[:, 0],
            obj.y + obj.spec.radius * normals[:, 1],
            obj.base_z + texture.heights,
        ])
        views = origin - points
        facing = (normals * views).sum(axis=1) > MIN_FACING_COS * np.linalg.norm(views, axis=1)

        rows, cols, z, in_front = project_points(cam, points)
        r = np.rint(np.nan_to_num(rows, nan=-1.0)).astype(int)
        c = np.rint(np.nan_to_num(cols, nan=-1.0)).astype(int)
        keep = facing & in_front & (r >= 0) & (r < cam.height) & (c >= 0) & (c < cam.width)
        idx = np.flatnonzero(keep)
        seen = hits.labels[r[idx], c[idx]] == object_label(index)
        seen &= np.abs(hits.depth_m[r[idx], c[idx]] - z[idx]) < DEPTH_AGREEMENT_M
        idx = idx[seen]

        found['rows'].append(r[idx])
        found['cols'].append(c[idx])
        found['descriptors'].append(texture.descriptors[idx])
        found['scales'].append(KEYPOINT_SIZE_M * cam.fx / z[idx])
        found['object_index'].append(np.full(idx.size, index))

    return VisibleAnchors(
        rows=np.concatenate(found['rows']),
        cols=np.concatenate(found['cols']),
        descriptors=np.vstack(found['descriptors']),
        scales=np.concatenate(found['scales']),
        object_index=np.concatenate(found['object_index']),
    )


class ProceduralDescriptorSource:
    """Keypoints of a rendered frame, with fresh descriptor noise per call."""

    def __init__(self, noise_sigma, rng):
        self.noise_sigma = noise_sigma
        self.rng = rng

    def keypoints(self, frame) -> list[Keypoint]:
        anchors = frame.anchors
        if anchors is None or not len(anchors):
            return []
        noisy = anchors.descriptors + self.rng.normal(0.0, self.noise_sigma, anchors.descriptors.shape)
        return [
            Keypoint(PixelCoord(int(r), int(c)), d, float(s))
            for r, c, d, s in zip(anchors.rows, anchors.cols, noisy, anchors.scales)
        ]
