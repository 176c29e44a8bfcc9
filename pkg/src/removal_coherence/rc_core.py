"""Removal coherence scores.

RC-S compares the feature distribution inside the removal region against the
surrounding background, window by window, within a per-target crop. RC-T
compares the features of the same masked cells across adjacent frame pairs.
Both use a squared maximum mean discrepancy with a Gaussian kernel:

    MMD^2(X, Y) = mean K(x_i, x_j) + mean K(y_i, y_j) - 2 mean K(x_i, y_j)

computed as the biased V-statistic (self pairs included) and clamped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .config import RunConfig
from .errors import (
    DegenerateCrop,
    EmptyMask,
    EmptySet,
    ShapeMismatch,
    TooFewFrames,
    WindowTooLarge,
)
from .mask_ops import (
    bounding_box,
    connected_components,
    crop_pair,
    downsample_mask,
    expand_box,
    mask_union,
)


@dataclass(frozen=True)
class KernelParams:
    """Gaussian RBF bandwidth for the discrepancy kernel."""

    sigma: float = 10.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class WindowGrid:
    window_h: int
    window_w: int
    stride: int
    origins: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class WindowScore:
    y: int
    x: int
    value: float


@dataclass(frozen=True)
class TargetScore:
    component_id: int
    windows: Tuple[WindowScore, ...]
    mean: float


@dataclass(frozen=True)
class SpatialScore:
    per_target: Tuple[TargetScore, ...]
    rc_s_raw: float
    rc_s_normalized: float
    skipped_targets: Tuple[int, ...] = ()


@dataclass(frozen=True)
class PairScore:
    t: int  # index of the first frame in the pair
    windows: Tuple[WindowScore, ...]
    mean: float


@dataclass(frozen=True)
class TemporalScore:
    per_pair: Tuple[PairScore, ...]
    rc_t: Optional[float]
    n_pairs: int
    skipped_pairs: Tuple[int, ...] = ()


def mmd2(x: np.ndarray, y: np.ndarray, kernel: KernelParams) -> float:
    """Squared MMD between two vector sets (rows are samples)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise EmptySet("mmd2 needs at least one sample per set")
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatch(f"feature dims differ: {x.shape[1]} vs {y.shape[1]}")
    s2 = 2.0 * kernel.sigma * kernel.sigma
    kxx = np.exp(-cdist(x, x, "sqeuclidean") / s2)
    kyy = np.exp(-cdist(y, y, "sqeuclidean") / s2)
    kxy = np.exp(-cdist(x, y, "sqeuclidean") / s2)
    val = float(kxx.mean() + kyy.mean() - 2.0 * kxy.mean())
    return max(val, 0.0)


def window_grid(height: int, width: int, window_size: int, stride: int) -> WindowGrid:
    """Dense square sliding-window grid with the last row/column flush."""
    if window_size < 1 or stride < 1:
        raise ValueError("window_size and stride must be positive")
    if window_size > min(height, width):
        raise WindowTooLarge(
            f"window {window_size} exceeds feature map {height}x{width}"
        )

    def axis(dim: int) -> List[int]:
        pos = list(range(0, dim - window_size + 1, stride))
        if pos[-1] != dim - window_size:
            pos.append(dim - window_size)
        return pos

    origins = tuple((y, x) for y in axis(height) for x in axis(width))
    return WindowGrid(window_size, window_size, stride, origins)


def _full_grid(height: int, width: int) -> WindowGrid:
    return WindowGrid(height, width, max(height, width), ((0, 0),))


def _resolve_grid(height: int, width: int, cfg: RunConfig) -> WindowGrid:
    base = min(height, width)
    ws = max(1, int(base * cfg.window_fraction))
    st = max(1, int(base * cfg.stride_fraction))
    return window_grid(height, width, ws, st)


def rcs_target(
    fm: np.ndarray,
    mask_aligned: np.ndarray,
    grid: WindowGrid,
    kernel: KernelParams,
) -> Tuple[List[WindowScore], float]:
    """Per-window discrepancies for one target's feature map.

    Windows that touch no masked cell are skipped. A window whose own
    background is empty borrows every unmasked cell of the crop instead.
    """
    c, h, w = fm.shape
    if mask_aligned.shape != (h, w):
        raise ShapeMismatch(
            f"mask {mask_aligned.shape} does not match feature map {(h, w)}"
        )
    flat = mask_aligned.ravel().astype(bool)
    if not flat.any():
        raise EmptyMask("aligned mask has no set cells")
    feats = fm.reshape(c, h * w).T.astype(np.float64)
    global_bg = feats[~flat]
    if global_bg.shape[0] == 0:
        raise DegenerateCrop("crop has no unmasked cells to reference")

    scores: List[WindowScore] = []
    for y, x in grid.origins:
        idx = (
            np.arange(y, y + grid.window_h)[:, None] * w
            + np.arange(x, x + grid.window_w)
        ).ravel()
        inside = flat[idx]
        masked_idx = idx[inside]
        if masked_idx.size == 0:
            continue
        bg_idx = idx[~inside]
        ref = feats[bg_idx] if bg_idx.size else global_bg
        d = mmd2(feats[masked_idx], ref, kernel)
        scores.append(WindowScore(y=int(y), x=int(x), value=d))
    mean = float(np.mean([s.value for s in scores]))
    return scores, mean


def normalized_score(raw: float, tau: float) -> float:
    """Map a raw discrepancy to (0, 1], 1 meaning indistinguishable."""
    return math.exp(-raw / tau)


def _maybe_unit_norm(fm: np.ndarray, cfg: RunConfig) -> np.ndarray:
    if not cfg.l2_normalize:
        return fm
    norms = np.linalg.norm(fm, axis=0, keepdims=True)
    return fm / np.maximum(norms, 1e-12)


def _spatial(image, mask, backend, cfg: RunConfig, global_window: bool) -> SpatialScore:
    kernel = KernelParams(sigma=cfg.sigma)
    regions = connected_components(mask)
    if not regions:
        raise EmptyMask("mask has no components to score")
    per_target: List[TargetScore] = []
    skipped: List[int] = []
    for region in regions:
        cp = crop_pair(image, region.component_mask, region.expanded_box)
        fm = _maybe_unit_norm(backend.extract(cp.image_crop), cfg)
        _, h, w = fm.shape
        aligned = downsample_mask(cp.mask_crop, w, h)
        if not aligned.any():
            skipped.append(region.component_id)
            continue
        grid = _full_grid(h, w) if global_window else _resolve_grid(h, w, cfg)
        windows, mean = rcs_target(fm, aligned, grid, kernel)
        per_target.append(
            TargetScore(region.component_id, tuple(windows), mean)
        )
    if not per_target:
        raise DegenerateCrop("no target is visible at feature resolution")
    raw = float(np.mean([t.mean for t in per_target]))
    return SpatialScore(
        per_target=tuple(per_target),
        rc_s_raw=raw,
        rc_s_normalized=normalized_score(raw, cfg.tau),
        skipped_targets=tuple(skipped),
    )


def rc_s(image: np.ndarray, mask: np.ndarray, backend, cfg: RunConfig) -> SpatialScore:
    """Spatial removal coherence of one image against its removal mask."""
    return _spatial(image, mask, backend, cfg, global_window=False)


def rc_s_global(image, mask, backend, cfg: RunConfig) -> SpatialScore:
    """RC-S with a single window spanning the whole feature map per target."""
    return _spatial(image, mask, backend, cfg, global_window=True)


def rc_t(
    frames: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    backend,
    cfg: RunConfig,
) -> TemporalScore:
    """Temporal removal coherence over adjacent frame pairs.

    Each pair is cropped to the expanded bounding box of the union mask; the
    discrepancy compares the two frames' features on the cells where both
    aligned masks are set. Pairs with no such cells follow
    cfg.empty_pair_policy ("exclude" or "zero").
    """
    if len(frames) != len(masks):
        raise ShapeMismatch(
            f"{len(frames)} frames but {len(masks)} masks"
        )
    if len(frames) < 2:
        raise TooFewFrames("temporal score needs at least two frames")
    shape = frames[0].shape
    for i, (f, m) in enumerate(zip(frames, masks)):
        if f.shape != shape:
            raise ShapeMismatch(f"frame {i} shape {f.shape} != {shape}")
        if m.shape != shape[:2]:
            raise ShapeMismatch(f"mask {i} shape {m.shape} != {shape[:2]}")

    kernel = KernelParams(sigma=cfg.sigma)
    h_img, w_img = shape[:2]
    per_pair: List[PairScore] = []
    skipped: List[int] = []

    for t in range(len(frames) - 1):
        union = mask_union(masks[t], masks[t + 1])
        if not union.any():
            if cfg.empty_pair_policy == "zero":
                per_pair.append(PairScore(t=t, windows=(), mean=0.0))
            else:
                skipped.append(t)
            continue
        box = expand_box(bounding_box(union), w_img, h_img)
        crop_a = crop_pair(frames[t], masks[t], box)
        crop_b = crop_pair(frames[t + 1], masks[t + 1], box)
        fa = _maybe_unit_norm(backend.extract(crop_a.image_crop), cfg)
        fb = _maybe_unit_norm(backend.extract(crop_b.image_crop), cfg)
        if fa.shape != fb.shape:
            raise ShapeMismatch(
                f"pair {t}: feature shapes differ {fa.shape} vs {fb.shape}"
            )
        _, h, w = fa.shape
        inter = downsample_mask(crop_a.mask_crop, w, h) & downsample_mask(
            crop_b.mask_crop, w, h
        )
        if not inter.any():
            if cfg.empty_pair_policy == "zero":
                per_pair.append(PairScore(t=t, windows=(), mean=0.0))
            else:
                skipped.append(t)
            continue
        feats_a = fa.reshape(fa.shape[0], h * w).T.astype(np.float64)
        feats_b = fb.reshape(fb.shape[0], h * w).T.astype(np.float64)
        flat = inter.ravel()
        grid = _resolve_grid(h, w, cfg)
        windows: List[WindowScore] = []
        for y, x in grid.origins:
            idx = (
                np.arange(y, y + grid.window_h)[:, None] * w
                + np.arange(x, x + grid.window_w)
            ).ravel()
            cells = idx[flat[idx]]
            if cells.size == 0:
                continue
            d = mmd2(feats_a[cells], feats_b[cells], kernel)
            windows.append(WindowScore(y=int(y), x=int(x), value=d))
        mean = float(np.mean([s.value for s in windows]))
        per_pair.append(PairScore(t=t, windows=tuple(windows), mean=mean))

    value = float(np.mean([p.mean for p in per_pair])) if per_pair else None
    return TemporalScore(
        per_pair=tuple(per_pair),
        rc_t=value,
        n_pairs=len(frames) - 1,
        skipped_pairs=tuple(skipped),
    )
