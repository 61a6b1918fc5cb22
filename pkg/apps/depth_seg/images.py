"""
Depth/color rasters and their PGM/PPM files.

Depth is stored as integer millimeters (0 = no return) and written as
16-bit binary PGM (P5, maxval 65535). Binary masks are written as 8-bit
PGM with values 0/255.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

MAX_DEPTH_MM = 10_000


@dataclass(frozen=True)
class DepthImage:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"Depth image must be 2-D, got shape {data.shape}")
        if data.size and int(data.max()) >= MAX_DEPTH_MM:
            raise ValueError(f"Depth values must stay below {MAX_DEPTH_MM} mm")
        if data.size and int(data.min()) < 0:
            raise ValueError("Depth values cannot be negative")
        data = data.astype(np.uint16)
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @property
    def valid(self):
        return self.data > 0

    @classmethod
    def blank(cls, height, width):
        return cls(np.zeros((height, width), dtype=np.uint16))


@dataclass(frozen=True)
class ColorImage:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"Color image must be HxWx3, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def shape(self):
        return self.data.shape[:2]


@dataclass(frozen=True)
class EdgeMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        bits.setflags(write=False)
        object.__setattr__(self, 'bits', bits)

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    def count(self):
        return int(self.bits.sum())


def read_depth_pgm(path) -> DepthImage:
    with Image.open(path) as img:
        if img.mode not in ('I;16', 'I;16B', 'I', 'L'):
            raise ValueError(f"{path}: unsupported PGM mode {img.mode}")
        data = np.array(img)
    logger.debug(f"Read depth image {path} ({data.shape[1]}x{data.shape[0]})")
    return DepthImage(data.astype(np.uint16))


def write_depth_pgm(depth: DepthImage, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(depth.data.astype(np.int32)).save(path, format='PPM')
    return path


def write_mask_pgm(mask, path):
    """Write a boolean mask (or EdgeMask) as an 8-bit 0/255 PGM."""
    bits = mask.bits if isinstance(mask, EdgeMask) else np.asarray(mask, dtype=bool)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(bits, 255, 0).astype(np.uint8)).save(path, format='PPM')
    return path


def write_color(image, path):
    """Write an RGB array; the format follows the file suffix (ppm, png)."""
    data = image.data if isinstance(image, ColorImage) else np.asarray(image, dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = 'PPM' if path.suffix.lower() in ('.ppm', '.pgm', '.pnm') else None
    Image.fromarray(np.ascontiguousarray(data)).save(path, format=fmt)
    return path
