"""Cylinder position from the 3-D points of a region of interest."""
from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import least_squares

from apps.geometry.transforms import unit, vec3

logger = logging.getLogger(__name__)

TOP_BAND_M = 0.015


def _plane_basis(axis):
    helper = np.eye(3)[np.argmin(np.abs(axis))]
    u = unit(np.cross(axis, helper))
    return np.vstack([u, np.cross(axis, u)])


def locate_cylinder(points, axis, radius, viewpoint, top_band=TOP_BAND_M):
    """
    Axis point of a cylinder of known radius seen from ``viewpoint``.

    The top face is dropped (points within ``top_band`` of the highest point
    along the axis). The remaining side points are projected on the plane
    normal to the axis and fitted with a circle of the known radius; the
    axial coordinate is the mean of the side points.
    """
    points = np.asarray(points, dtype=float)
    axis = unit(axis)
    along = points @ axis
    side = points[along < along.max() - top_band]
    if len(side) < 3:
        side = points

    basis = _plane_basis(axis)
    flat = side @ basis.T
    mean = flat.mean(axis=0)
    away = mean - basis @ vec3(viewpoint)
    norm = np.linalg.norm(away)
    away = away / norm if norm > 0 else np.zeros(2)
    # The centroid of a visible half circle sits 2r/pi in front of the centre.
    start = mean + 2 * radius / np.pi * away

    fit = least_squares(
        lambda c: np.linalg.norm(flat - c, axis=1) - radius,
        start, loss='soft_l1', f_scale=0.005,
    )
    if not fit.success:
        logger.warning(f"Circle fit did not converge: {fit.message}")
    return basis.T @ fit.x + axis * float((side @ axis).mean())
