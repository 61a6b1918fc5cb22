"""
Reference-to-region matching.

Descriptors are paired by brute-force nearest neighbour with a ratio test,
then RANSAC fits a homography from four-point perspective transforms. The
RANSAC inlier count is the match quality.

Pixel pairs are handled as (x, y) = (col, row) internally.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import cv2
import numpy as np

from .descriptors import Keypoint, descriptor_matrix, pixel_matrix

logger = logging.getLogger(__name__)

MIN_HOMOGRAPHY_PAIRS = 4


@dataclass(frozen=True)
class MatchingParams:
    ratio: float = 0.8
    ransac_iters: int = 200
    inlier_px: float = 3.0
    match_min: int = 8
    descriptor_length: int = 16


@dataclass(frozen=True, eq=False)
class MatchResult:
    pairs: tuple
    inlier_count: int
    homography: np.ndarray | None = None
    inliers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    success: bool = False

    def __post_init__(self):
        if self.inlier_count > len(self.pairs):
            raise ValueError("Inlier count cannot exceed the number of pairs")
        if (self.homography is not None) != (self.inlier_count >= MIN_HOMOGRAPHY_PAIRS):
            raise ValueError("A homography is present exactly when there are at least 4 inliers")

    @property
    def quality(self):
        return self.inlier_count

    @classmethod
    def empty(cls):
        return cls(pairs=(), inlier_count=0)


def match_descriptors(ref_kps, roi_kps, ratio=0.8):
    """
    Nearest-neighbour pairs (ref index, roi index) passing the ratio test.

    With a single roi keypoint the second-nearest distance is infinite, so
    the test always passes. Each roi keypoint appears at most once: the
    closest reference keypoint keeps it, ties going to the lower index.
    """
    if not ref_kps or not roi_kps:
        return []
    ref = descriptor_matrix(ref_kps).astype(np.float32)
    roi = descriptor_matrix(roi_kps).astype(np.float32)
    if ref.shape[1] != roi.shape[1]:
        raise ValueError(f"Descriptor lengths differ: {ref.shape[1]} vs {roi.shape[1]}")

    candidates = []
    for i, knn in enumerate(cv2.BFMatcher(cv2.NORM_L2).knnMatch(ref, roi, k=2)):
        if not knn:
            continue
        d2 = knn[1].distance if len(knn) > 1 else np.inf
        if knn[0].distance < ratio * d2:
            candidates.append((knn[0].distance, i, knn[0].trainIdx))

    taken = {}
    for _, i, j in sorted(candidates):
        taken.setdefault(j, i)
    return sorted((ref_i, roi_j) for roi_j, ref_i in taken.items())


def _apply(h, points):
    homogeneous = np.column_stack([points, np.ones(len(points))]) @ h.T
    w = homogeneous[:, 2:3]
    with np.errstate(divide='ignore', invalid='ignore'):
        return homogeneous[:, :2] / w


def fit_homography(src, dst):
    """Homography through at least four (x, y) correspondences; None if singular."""
    src = np.asarray(src, dtype=np.float32)
    dst = np.asarray(dst, dtype=np.float32)
    try:
        if len(src) == MIN_HOMOGRAPHY_PAIRS:
            h = cv2.getPerspectiveTransform(src, dst)
        else:
            h, _ = cv2.findHomography(src, dst, 0)
    except cv2.error:
        return None
    if h is None or h.size == 0 or not np.isfinite(h).all() or abs(h[2, 2]) < 1e-12:
        return None
    h = h / h[2, 2]
    # A failed solve comes back as a rank-deficient matrix
    if abs(np.linalg.det(h)) < 1e-9:
        return None
    return h


def reprojection_error(h, src, dst):
    err = np.linalg.norm(_apply(h, src) - dst, axis=1)
    return np.where(np.isfinite(err), err, np.inf)


def _has_collinear_triple(points):
    for a, b, c in itertools.combinations(points, 3):
        u, v = b - a, c - a
        scale = max(u @ u, v @ v, 1.0)
        if abs(u[0] * v[1] - u[1] * v[0]) <= 1e-6 * scale:
            return True
    return False


def _best_translation(src, dst, inlier_px):
    shifts = dst - src
    agree = np.linalg.norm(shifts[:, None, :] - shifts[None, :, :], axis=2) < inlier_px
    best = int(np.argmax(agree.sum(axis=1)))
    return agree[best], shifts[best]


def ransac_homography(pairs_px, iters=200, inlier_px=3.0, rng_seed=0, index_pairs=None):
    """
    Fit a homography mapping the first pixel of each pair onto the second.

    Args:
        pairs_px: sequence of (PixelCoord, PixelCoord)
        index_pairs: keypoint index pairs to carry into the result; defaults
            to (i, i) for each pair

    Returns:
        MatchResult: with fewer than 4 pairs the inlier count is the consensus
        of the best pure translation and there is no homography
    """
    n = len(pairs_px)
    pairs = tuple(index_pairs) if index_pairs is not None else tuple((i, i) for i in range(n))
    if n == 0:
        return MatchResult(pairs=pairs, inlier_count=0)
    src = np.array([(p.col, p.row) for p, _ in pairs_px], dtype=np.float64)
    dst = np.array([(q.col, q.row) for _, q in pairs_px], dtype=np.float64)

    if n < MIN_HOMOGRAPHY_PAIRS:
        inliers, _ = _best_translation(src, dst, inlier_px)
        return MatchResult(pairs=pairs, inlier_count=int(inliers.sum()), inliers=inliers)

    rng = np.random.default_rng(rng_seed)
    best_h, best_inliers = None, None
    for _ in range(iters):
        sample = rng.choice(n, MIN_HOMOGRAPHY_PAIRS, replace=False)
        if _has_collinear_triple(src[sample]) or _has_collinear_triple(dst[sample]):
            continue
        h = fit_homography(src[sample], dst[sample])
        if h is None:
            continue
        inliers = reprojection_error(h, src, dst) < inlier_px
        if best_inliers is None or inliers.sum() > best_inliers.sum():
            best_h, best_inliers = h, inliers

    if best_h is None:
        logger.debug(f"All {iters} RANSAC samples degenerate; using best translation")
        best_inliers, shift = _best_translation(src, dst, inlier_px)
        best_h = np.array([[1.0, 0.0, shift[0]], [0.0, 1.0, shift[1]], [0.0, 0.0, 1.0]])

    count = int(best_inliers.sum())
    homography = best_h if count >= MIN_HOMOGRAPHY_PAIRS else None
    return MatchResult(pairs=pairs, inlier_count=count, homography=homography, inliers=best_inliers)


def match_reference_to_roi(ref, roi, roi_kps, params: MatchingParams, rng_seed=0):
    """
    Match a stored reference against the keypoints inside one region.

    ``ref`` is anything with a ``keypoints`` list; ``roi`` anything with a
    ``contains(rows, cols)`` test. Pairs index into ``ref.keypoints`` and
    ``roi_kps``.
    """
    if not roi_kps:
        return MatchResult.empty()
    px = pixel_matrix(roi_kps)
    inside = np.flatnonzero(roi.contains(px[:, 0], px[:, 1]))
    candidates = [roi_kps[j] for j in inside]
    local_pairs = match_descriptors(ref.keypoints, candidates, params.ratio)
    pairs_px = [(ref.keypoints[i].px, candidates[j].px) for i, j in local_pairs]
    index_pairs = [(i, int(inside[j])) for i, j in local_pairs]
    result = ransac_homography(pairs_px, params.ransac_iters, params.inlier_px, rng_seed, index_pairs)
    return replace(result, success=result.inlier_count >= params.match_min)


class ReferenceMatcher:
    """
    Stateful front end that counts invocations.

    Each call to ``match`` is one reference-to-region comparison, the unit of
    per-frame matching cost.
    """

    def __init__(self, params: MatchingParams, seed=0):
        self.params = params
        self.seed = seed
        self.invocations = 0

    def match(self, ref, roi, roi_kps: list[Keypoint]) -> MatchResult:
        self.invocations += 1
        call_seed = np.random.SeedSequence([self.seed, self.invocations]).generate_state(1)[0]
        return match_reference_to_roi(ref, roi, roi_kps, self.params, rng_seed=int(call_seed))

    def reset(self):
        self.invocations = 0
