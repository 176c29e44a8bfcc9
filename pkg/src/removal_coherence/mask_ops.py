"""Binary mask primitives: components, boxes, crops, resampling, distances.

Masks are 2-D boolean numpy arrays indexed [y, x]. Boxes are half-open pixel
rectangles. Connected components use 8-connectivity so diagonally touching
pixels belong to one target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import cv2
import numpy as np

from .errors import EmptyMask, ShapeMismatch

MASK_PEAK = 255.0  # masks compare as 8-bit images {0, 255}


@dataclass(frozen=True)
class Box:
    """Half-open rectangle [x0, x1) x [y0, y1) in pixel coordinates."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


@dataclass(frozen=True)
class TargetRegion:
    """One connected component of a removal mask."""

    component_id: int
    component_mask: np.ndarray  # full mask dims, only this component set
    tight_box: Box
    expanded_box: Box


@dataclass(frozen=True)
class CropPair:
    """Synchronized image / mask crop taken from one box."""

    image_crop: np.ndarray
    mask_crop: np.ndarray
    source_box: Box


def as_mask(arr: np.ndarray) -> np.ndarray:
    """Validate and coerce an array to a 2-D boolean mask."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ShapeMismatch(f"mask must be 2-D, got shape {a.shape}")
    return a.astype(bool, copy=False)


def _require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")


def expand_box(box: Box, image_w: int, image_h: int) -> Box:
    """Grow a box outward by one third of its side length per axis, clamped."""
    mx = box.width // 3
    my = box.height // 3
    return Box(
        max(0, box.x0 - mx),
        max(0, box.y0 - my),
        min(image_w, box.x1 + mx),
        min(image_h, box.y1 + my),
    )


def bounding_box(mask: np.ndarray) -> Box:
    """Tight bounding box of the set pixels."""
    m = as_mask(mask)
    ys = np.flatnonzero(m.any(axis=1))
    if ys.size == 0:
        raise EmptyMask("mask has no set pixels")
    xs = np.flatnonzero(m.any(axis=0))
    return Box(int(xs[0]), int(ys[0]), int(xs[-1]) + 1, int(ys[-1]) + 1)


def connected_components(mask: np.ndarray) -> List[TargetRegion]:
    """Split a mask into 8-connected targets ordered by tight-box (y0, x0).

    Component ids are assigned 1..K after ordering.
    """
    m = as_mask(mask)
    n, labels, stats, _ = cv2.connectedComponentsWithStats(
        m.astype(np.uint8), connectivity=8
    )
    entries = []
    for lab in range(1, n):
        x, y, w, h = (int(stats[lab, k]) for k in range(4))
        entries.append((y, x, y + h, x + w, lab))
    entries.sort()
    h_img, w_img = m.shape
    regions = []
    for cid, (y0, x0, y1, x1, lab) in enumerate(entries, start=1):
        tight = Box(x0, y0, x1, y1)
        regions.append(
            TargetRegion(
                component_id=cid,
                component_mask=labels == lab,
                tight_box=tight,
                expanded_box=expand_box(tight, w_img, h_img),
            )
        )
    return regions


def crop_pair(image: np.ndarray, mask: np.ndarray, box: Box) -> CropPair:
    """Cut the same box out of an image and its mask."""
    m = as_mask(mask)
    if image.shape[:2] != m.shape:
        raise ShapeMismatch(
            f"image {image.shape[:2]} and mask {m.shape} dims differ"
        )
    h, w = m.shape
    if not (0 <= box.x0 and box.x1 <= w and 0 <= box.y0 and box.y1 <= h):
        raise ValueError(f"box {box} exceeds image {w}x{h}")
    return CropPair(
        image_crop=image[box.y0:box.y1, box.x0:box.x1],
        mask_crop=m[box.y0:box.y1, box.x0:box.x1],
        source_box=box,
    )


def _fractional_integral(mask: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Exact integral of the {0,1} pixel field over [0, y) x [0, x).

    Evaluated on the grid ys x xs; the integrand is constant per pixel, so
    linear interpolation of the 2-D cumulative sum plus a corner term is exact.
    """
    h, w = mask.shape
    m = mask.astype(np.float64)
    c = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(m, axis=0), axis=1, out=c[1:, 1:])

    ix = np.minimum(np.floor(xs).astype(np.int64), w - 1)
    iy = np.minimum(np.floor(ys).astype(np.int64), h - 1)
    fx = xs - ix
    fy = ys - iy

    base = c[np.ix_(iy, ix)]
    col = c[np.ix_(iy, ix + 1)] - base
    row = c[np.ix_(iy + 1, ix)] - base
    corner = m[np.ix_(iy, ix)]
    return base + fx[None, :] * col + fy[:, None] * row + np.outer(fy, fx) * corner


def resample_mask_area(
    mask: np.ndarray,
    window: Tuple[float, float, float, float],
    out_w: int,
    out_h: int,
) -> np.ndarray:
    """Area-resample a mask over a real-valued source window.

    Each output cell is set iff the mean of the source pixels covering it is
    at least 0.5 (exact fractional-area accounting).
    """
    m = as_mask(mask)
    h, w = m.shape
    x0, y0, x1, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate window {window}")
    if x0 < -1e-9 or y0 < -1e-9 or x1 > w + 1e-9 or y1 > h + 1e-9:
        raise ValueError(f"window {window} exceeds mask {w}x{h}")
    xs = np.clip(x0 + (x1 - x0) * np.arange(out_w + 1) / out_w, 0.0, float(w))
    ys = np.clip(y0 + (y1 - y0) * np.arange(out_h + 1) / out_h, 0.0, float(h))
    s = _fractional_integral(m, xs, ys)
    rect = s[1:, 1:] - s[:-1, 1:] - s[1:, :-1] + s[:-1, :-1]
    cell_area = ((x1 - x0) / out_w) * ((y1 - y0) / out_h)
    return rect / cell_area >= 0.5


def downsample_mask(mask: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Resize a mask by exact area averaging with a 0.5 set threshold."""
    m = as_mask(mask)
    h, w = m.shape
    if (target_h, target_w) == (h, w):
        return m.copy()
    return resample_mask_area(m, (0.0, 0.0, float(w), float(h)), target_w, target_h)


def mask_union(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_mask(a), as_mask(b)
    _require_same_shape(a, b)
    return a | b


def mask_intersection(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_mask(a), as_mask(b)
    _require_same_shape(a, b)
    return a & b


def mask_psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR between two masks rendered as 8-bit {0, 255} images.

    Identical masks have zero MSE; that case returns +inf and callers that
    average must cap it themselves.
    """
    a, b = as_mask(a), as_mask(b)
    _require_same_shape(a, b)
    frac = float(np.mean(a != b))
    if frac == 0.0:
        return math.inf
    mse = MASK_PEAK**2 * frac
    return 10.0 * math.log10(MASK_PEAK**2 / mse)


def artifact_mask(m_diff: np.ndarray, m_gt: np.ndarray) -> np.ndarray:
    """Pixels flagged as changed but outside the intended removal region."""
    a, b = as_mask(m_diff), as_mask(m_gt)
    _require_same_shape(a, b)
    return a & ~b


def max_component_area(mask: np.ndarray) -> int:
    """Area of the largest 8-connected component, 0 for an empty mask."""
    m = as_mask(mask)
    n, _, stats, _ = cv2.connectedComponentsWithStats(
        m.astype(np.uint8), connectivity=8
    )
    if n <= 1:
        return 0
    return int(stats[1:, cv2.CC_STAT_AREA].max())
