"""
Depth derivatives along image rows or columns.

The kernel for half-span k is [-1, 0 x (2k-1), 1] with a centered anchor.
Outputs are divided by 2k (mm per pixel, mm per pixel squared). Invalid
outputs are NaN: image borders the kernel overflows, and any position whose
end taps fall on an invalid input.
"""
from __future__ import annotations

import cv2
import numpy as np

from .images import DepthImage

HORIZONTAL = 'horizontal'
VERTICAL = 'vertical'
DIRECTIONS = (HORIZONTAL, VERTICAL)


def derivative_kernel(k: int) -> np.ndarray:
    if k < 1:
        raise ValueError(f"Kernel half-span must be >= 1, got {k}")
    kernel = np.zeros(2 * k + 1)
    kernel[0] = -1.0
    kernel[-1] = 1.0
    return kernel


def _span_difference(values, valid, k, direction):
    if direction not in DIRECTIONS:
        raise ValueError(f"Unknown direction {direction!r}")
    axis = 1 if direction == HORIZONTAL else 0
    if values.shape[axis] <= 2 * k:
        raise ValueError(f"Image of shape {values.shape} is too small for k={k}")

    kernel = derivative_kernel(k)
    kernel = kernel.reshape(1, -1) if axis == 1 else kernel.reshape(-1, 1)
    filled = np.where(valid, values, 0.0).astype(np.float64)
    out = cv2.filter2D(filled, cv2.CV_64F, kernel, borderType=cv2.BORDER_CONSTANT) / (2.0 * k)

    taps_ok = np.zeros_like(valid, dtype=bool)
    if axis == 1:
        taps_ok[:, k:-k] = valid[:, 2 * k:] & valid[:, :-2 * k]
    else:
        taps_ok[k:-k, :] = valid[2 * k:, :] & valid[:-2 * k, :]
    out[~taps_ok] = np.nan
    return out


def derivative_1(img: DepthImage, k1: int, direction: str) -> np.ndarray:
    """First derivative of depth in mm/p; NaN where invalid."""
    return _span_difference(img.data.astype(np.float64), img.valid, k1, direction)


def derivative_2(d1: np.ndarray, k2: int, direction: str) -> np.ndarray:
    """Derivative of a first-derivative grid (same direction) in mm/p^2."""
    d1 = np.asarray(d1, dtype=np.float64)
    return _span_difference(d1, ~np.isnan(d1), k2, direction)
