"""Benchmark screening and camera-motion augmentation for removal samples.

Two-stage quality control: stage 1 ranks samples by how well the
input-vs-GT difference mask agrees with the annotated target mask
(PSNR on binary masks), stage 2 rejects samples whose difference
leaks outside the annotation in large connected blobs. A simulated
camera track ("Ken Burns") can then be applied to retained samples,
moving the input, GT, and mask streams through the identical
per-frame window so scores stay comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import AmplitudeTooLarge, InputError, ShapeMismatch
from .mask_ops import (
    artifact_mask,
    as_mask,
    mask_psnr,
    max_component_area,
    resample_mask_area,
)

DIFF_THRESHOLD = 25
PSNR_CAP_DB = 100.0
KEEP_FRACTION = 0.4
AREA_THRESHOLD = 1000
STYLES = ("shake", "zoom", "follow")

_OPEN_KERNEL = np.ones((3, 3), dtype=np.uint8)


@dataclass
class PairedSample:
    """One benchmark item: removal result, clean plate, and target masks."""

    sample_id: str
    input_frames: List[np.ndarray]
    gt_frames: List[np.ndarray]
    gt_masks: List[np.ndarray]
    meta: Dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.input_frames)
        if n == 0:
            raise InputError(f"sample {self.sample_id!r} has no frames")
        if len(self.gt_frames) != n or len(self.gt_masks) != n:
            raise ShapeMismatch(
                f"sample {self.sample_id!r}: stream lengths differ "
                f"({n} input, {len(self.gt_frames)} gt, {len(self.gt_masks)} masks)"
            )
        h, w = self.input_frames[0].shape[:2]
        for f in list(self.input_frames) + list(self.gt_frames):
            if f.ndim != 3 or f.shape[:2] != (h, w) or f.shape[2] != 3:
                raise ShapeMismatch(
                    f"sample {self.sample_id!r}: frame shape {f.shape} != ({h}, {w}, 3)"
                )
        self.gt_masks = [as_mask(m) for m in self.gt_masks]
        for m in self.gt_masks:
            if m.shape != (h, w):
                raise ShapeMismatch(
                    f"sample {self.sample_id!r}: mask shape {m.shape} != ({h}, {w})"
                )

    @property
    def n_frames(self) -> int:
        return len(self.input_frames)

    @property
    def frame_dims(self) -> Tuple[int, int]:
        h, w = self.input_frames[0].shape[:2]
        return (w, h)


def diff_mask(result: np.ndarray, reference: np.ndarray,
              threshold: int = DIFF_THRESHOLD) -> np.ndarray:
    """Where the two frames visibly differ: grayscale absolute difference
    strictly above ``threshold``, then a 3x3 morphological opening to drop
    isolated speckle."""
    if result.shape != reference.shape:
        raise ShapeMismatch(f"frame shapes differ: {result.shape} vs {reference.shape}")
    ga = cv2.cvtColor(result, cv2.COLOR_RGB2GRAY)
    gb = cv2.cvtColor(reference, cv2.COLOR_RGB2GRAY)
    raw = (cv2.absdiff(ga, gb) > threshold).astype(np.uint8)
    opened = cv2.morphologyEx(raw, cv2.MORPH_OPEN, _OPEN_KERNEL)
    return opened.astype(bool)


def stage1_score(sample: PairedSample, threshold: int = DIFF_THRESHOLD) -> float:
    """Mean per-frame PSNR (dB) between the difference mask and the GT mask.
    A perfect frame has infinite PSNR; it is capped at 100 dB before
    averaging so one perfect frame cannot dominate."""
    total = 0.0
    for inp, gt, m in zip(sample.input_frames, sample.gt_frames, sample.gt_masks):
        total += min(mask_psnr(diff_mask(inp, gt, threshold), m), PSNR_CAP_DB)
    return total / sample.n_frames


def _rank_stage1(samples: Sequence[PairedSample],
                 threshold: int) -> List[Tuple[PairedSample, float]]:
    scored = [(s, stage1_score(s, threshold)) for s in samples]
    scored.sort(key=lambda p: (-p[1], p[0].sample_id))
    return scored


def stage1_filter(samples: Sequence[PairedSample],
                  keep_fraction: float = KEEP_FRACTION,
                  threshold: int = DIFF_THRESHOLD) -> List[PairedSample]:
    """Keep the best ceil(keep_fraction * N) samples by stage-1 score,
    breaking score ties by sample id."""
    if not 0.0 < keep_fraction <= 1.0:
        raise InputError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if not samples:
        return []
    k = math.ceil(keep_fraction * len(samples))
    return [s for s, _ in _rank_stage1(samples, threshold)[:k]]


@dataclass(frozen=True)
class Stage2Result:
    passed: bool
    per_frame_areas: Tuple[int, ...]


def stage2_check(sample: PairedSample, area_threshold: int = AREA_THRESHOLD,
                 threshold: int = DIFF_THRESHOLD) -> Stage2Result:
    """Fail a sample iff any frame has a connected difference component
    outside the GT mask whose area strictly exceeds ``area_threshold``."""
    areas = []
    for inp, gt, m in zip(sample.input_frames, sample.gt_frames, sample.gt_masks):
        art = artifact_mask(diff_mask(inp, gt, threshold), m)
        areas.append(max_component_area(art))
    return Stage2Result(
        passed=all(a <= area_threshold for a in areas),
        per_frame_areas=tuple(areas),
    )


def run_qc(samples: Sequence[PairedSample],
           keep_fraction: float = KEEP_FRACTION,
           area_threshold: int = AREA_THRESHOLD,
           threshold: int = DIFF_THRESHOLD) -> Dict:
    """Full screening pass. Returns a JSON-ready report with one row per
    sample and a manifest of ids that survive both stages."""
    ids = [s.sample_id for s in samples]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate sample ids")
    ranked = _rank_stage1(samples, threshold)
    k = math.ceil(keep_fraction * len(samples)) if samples else 0
    if not 0.0 < keep_fraction <= 1.0:
        raise InputError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    retained = {s.sample_id for s, _ in ranked[:k]}
    rows = []
    manifest = []
    for s, score in sorted(ranked, key=lambda p: p[0].sample_id):
        st2 = stage2_check(s, area_threshold, threshold)
        kept1 = s.sample_id in retained
        rows.append({
            "id": s.sample_id,
            "stage1_db": score,
            "retained_stage1": kept1,
            "stage2_passed": st2.passed,
            "max_artifact_area": int(max(st2.per_frame_areas)),
        })
        if kept1 and st2.passed:
            manifest.append(s.sample_id)
    return {
        "n_samples": len(samples),
        "keep_fraction": keep_fraction,
        "area_threshold": area_threshold,
        "diff_threshold": threshold,
        "samples": rows,
        "manifest": manifest,
    }


# --------------------------------------------------------------------------
# simulated camera tracks


@dataclass(frozen=True)
class KenBurnsConfig:
    amplitude: float = 8.0       # max translation in source pixels
    zoom_min: float = 1.0
    zoom_max: float = 1.2
    smooth_frames: float = 9.0   # temporal gaussian sigma for jitter styles

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise InputError(f"amplitude must be >= 0, got {self.amplitude}")
        if not 1.0 <= self.zoom_min <= self.zoom_max:
            raise InputError(
                f"need 1 <= zoom_min <= zoom_max, got {self.zoom_min}, {self.zoom_max}"
            )
        if self.smooth_frames < 0:
            raise InputError("smooth_frames must be >= 0")


@dataclass(frozen=True)
class TrackEntry:
    """Per-frame camera pose: isotropic scale, window-center offset, and the
    resulting source-space crop window (x0, y0, x1, y1)."""

    scale: float
    tx: float
    ty: float
    window: Tuple[float, float, float, float]


@dataclass(frozen=True)
class KenBurnsTrack:
    style: str
    seed: int
    entries: Tuple[TrackEntry, ...]

    @property
    def n_frames(self) -> int:
        return len(self.entries)


def _entry(scale: float, tx: float, ty: float, w: int, h: int) -> TrackEntry:
    cw = w / scale
    ch = h / scale
    x0 = w / 2.0 + tx - cw / 2.0
    y0 = h / 2.0 + ty - ch / 2.0
    window = (x0, y0, x0 + cw, y0 + ch)
    if x0 < -1e-6 or y0 < -1e-6 or window[2] > w + 1e-6 or window[3] > h + 1e-6:
        raise AmplitudeTooLarge(
            f"window {window} leaves the {w}x{h} frame (scale {scale}, "
            f"offset ({tx}, {ty}))"
        )
    return TrackEntry(scale=scale, tx=tx, ty=ty, window=window)


def _jitter_scale(w: int, h: int, amplitude: float) -> float:
    # zoom in just enough that both margins can absorb the full amplitude
    side = min(w, h)
    if 2.0 * amplitude >= side:
        raise AmplitudeTooLarge(
            f"amplitude {amplitude} needs a margin wider than the "
            f"{w}x{h} frame allows"
        )
    return side / (side - 2.0 * amplitude)


def _smooth(series: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return series
    return gaussian_filter1d(series, sigma=sigma, axis=-1, mode="nearest")


def make_kenburns_track(
    style: str,
    seed: int,
    n_frames: int,
    frame_dims: Tuple[int, int],
    config: Optional[KenBurnsConfig] = None,
    centroids: Optional[Sequence[Tuple[float, float]]] = None,
) -> KenBurnsTrack:
    """Build a deterministic per-frame camera track.

    shake   smoothed random translation inside a fixed slight zoom
    zoom    linear scale ramp zoom_min -> zoom_max about the frame center
    follow  translation tracking the supplied (x, y) mask centroids,
            clamped to +/- amplitude
    """
    if style not in STYLES:
        raise InputError(f"unknown style {style!r}, expected one of {STYLES}")
    if n_frames < 1:
        raise InputError(f"n_frames must be >= 1, got {n_frames}")
    cfg = config if config is not None else KenBurnsConfig()
    w, h = frame_dims
    if w < 1 or h < 1:
        raise InputError(f"bad frame dims {frame_dims}")

    if style == "zoom":
        entries = []
        for i in range(n_frames):
            t = i / (n_frames - 1) if n_frames > 1 else 0.0
            s = cfg.zoom_min + (cfg.zoom_max - cfg.zoom_min) * t
            entries.append(_entry(s, 0.0, 0.0, w, h))
        return KenBurnsTrack(style=style, seed=seed, entries=tuple(entries))

    amp = cfg.amplitude
    scale = 1.0 if amp == 0.0 else _jitter_scale(w, h, amp)
    if style == "shake":
        if amp == 0.0:
            offsets = np.zeros((2, n_frames))
        else:
            rng = np.random.default_rng([seed, STYLES.index(style)])
            noise = _smooth(rng.standard_normal((2, n_frames)), cfg.smooth_frames)
            peaks = np.abs(noise).max(axis=1, keepdims=True)
            peaks[peaks == 0] = 1.0
            offsets = amp * noise / peaks
    else:  # follow
        if centroids is None:
            raise InputError("follow style requires per-frame centroids")
        pts = np.asarray(centroids, dtype=np.float64)
        if pts.shape != (n_frames, 2):
            raise ShapeMismatch(
                f"need {n_frames} (x, y) centroids, got array of shape {pts.shape}"
            )
        disp = (pts - pts[0]).T  # (2, n): camera follows the target
        offsets = np.clip(_smooth(disp, cfg.smooth_frames), -amp, amp)

    entries = tuple(
        _entry(scale, float(offsets[0, i]), float(offsets[1, i]), w, h)
        for i in range(n_frames)
    )
    return KenBurnsTrack(style=style, seed=seed, entries=entries)


def forward_map(entry: TrackEntry,
                out_dims: Tuple[int, int]) -> Tuple[float, float, float, float]:
    """Continuous source->output coordinate map (ax, bx, ay, by):
    u = ax * x + bx, v = ay * y + by. Both the frame warp and the mask
    resample are derived from this one map."""
    x0, y0, x1, y1 = entry.window
    ax = out_dims[0] / (x1 - x0)
    ay = out_dims[1] / (y1 - y0)
    return (ax, -x0 * ax, ay, -y0 * ay)


def _warp_matrix(entry: TrackEntry, out_dims: Tuple[int, int]) -> np.ndarray:
    # inverse map on pixel centers: dst index (u, v) samples src index
    # ((u + .5 - bx) / ax - .5, (v + .5 - by) / ay - .5)
    ax, bx, ay, by = forward_map(entry, out_dims)
    return np.array(
        [
            [1.0 / ax, 0.0, (0.5 - bx) / ax - 0.5],
            [0.0, 1.0 / ay, (0.5 - by) / ay - 0.5],
        ],
        dtype=np.float64,
    )


def _warp_frame(frame: np.ndarray, entry: TrackEntry,
                out_dims: Tuple[int, int]) -> np.ndarray:
    return cv2.warpAffine(
        frame,
        _warp_matrix(entry, out_dims),
        out_dims,
        flags=cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP,
        borderMode=cv2.BORDER_REPLICATE,
    )


def apply_kenburns(sample: PairedSample, track: KenBurnsTrack,
                   out_dims: Optional[Tuple[int, int]] = None) -> PairedSample:
    """Run all three streams of a sample through the track. Frames are
    warped bilinearly; masks are resampled by exact window coverage so the
    geometry matches the frame path."""
    if track.n_frames != sample.n_frames:
        raise InputError(
            f"track has {track.n_frames} entries for {sample.n_frames} frames"
        )
    w, h = sample.frame_dims
    out = out_dims if out_dims is not None else (w, h)
    for e in track.entries:
        if e.window[2] > w + 1e-6 or e.window[3] > h + 1e-6:
            raise ShapeMismatch(
                f"track window {e.window} does not fit {w}x{h} frames"
            )
    inp, gt, masks = [], [], []
    for i, e in enumerate(track.entries):
        inp.append(_warp_frame(sample.input_frames[i], e, out))
        gt.append(_warp_frame(sample.gt_frames[i], e, out))
        masks.append(resample_mask_area(sample.gt_masks[i], e.window, out[0], out[1]))
    meta = dict(sample.meta)
    meta["kenburns"] = {"style": track.style, "seed": track.seed}
    return PairedSample(
        sample_id=sample.sample_id,
        input_frames=inp,
        gt_frames=gt,
        gt_masks=masks,
        meta=meta,
    )
