"""Seeded video corruption protocols: frame drop, frame replace, mask blur.

A plan fixes which frame indices are touched at every level before anything
is applied. Levels nest: the level-L+1 selection contains the level-L one, so
corruption accumulates progressively and sensitivity curves are comparable
across levels. Endpoint frames are never dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import numpy as np

from .config import RunConfig
from .errors import LevelTooLarge, NoDonorAvailable
from .mask_ops import as_mask
from .rc_core import rc_s

KINDS = ("drop", "replace", "mask_blur")
_DONOR_SALT = 7919  # decorrelates donor draws from index selection


@dataclass(frozen=True)
class CorruptionPlan:
    kind: str
    seed: int
    video_len: int
    levels: Tuple[int, ...]
    selected: Dict[int, Tuple[int, ...]] = field(compare=True)


@dataclass(frozen=True)
class BlurSweep:
    """Blur strengths for a sensitivity sweep; starts at the clean baseline."""

    sigmas: Tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0)

    def __post_init__(self):
        if not self.sigmas or self.sigmas[0] != 0.0:
            raise ValueError("sweep must start at sigma 0")
        if any(b <= a for a, b in zip(self.sigmas, self.sigmas[1:])):
            raise ValueError("sigmas must increase strictly")


def plan_corruption(
    kind: str, seed: int, video_len: int, levels: Sequence[int]
) -> CorruptionPlan:
    """Fix the corrupted frame indices for every requested level."""
    if kind not in KINDS:
        raise ValueError(f"unknown corruption kind {kind!r}, expected one of {KINDS}")
    lv = sorted(set(int(x) for x in levels))
    if not lv:
        raise ValueError("levels must be non-empty")
    if lv[0] < 1:
        raise ValueError("levels must be positive")
    if video_len < 2:
        raise ValueError("video must have at least two frames")
    if kind == "drop":
        eligible = np.arange(1, video_len - 1)  # endpoints stay
    else:
        eligible = np.arange(video_len)
    if lv[-1] > eligible.size:
        raise LevelTooLarge(
            f"level {lv[-1]} exceeds the {eligible.size} selectable frames"
        )
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    perm = rng.permutation(eligible)
    selected = {level: tuple(sorted(int(i) for i in perm[:level])) for level in lv}
    return CorruptionPlan(
        kind=kind,
        seed=seed,
        video_len=video_len,
        levels=tuple(lv),
        selected=selected,
    )


def _level_indices(plan: CorruptionPlan, level: int) -> Tuple[int, ...]:
    if level == 0:
        return ()
    if level not in plan.selected:
        raise ValueError(f"level {level} is not part of the plan {plan.levels}")
    return plan.selected[level]


def _check_lengths(frames, masks, plan: CorruptionPlan) -> None:
    if len(frames) != plan.video_len or len(masks) != plan.video_len:
        raise ValueError(
            f"plan covers {plan.video_len} frames, got {len(frames)}/{len(masks)}"
        )


def apply_drop(frames, masks, plan: CorruptionPlan, level: int):
    """Remove the selected frames (and their masks) from the sequence."""
    _check_lengths(frames, masks, plan)
    dropped = set(_level_indices(plan, level))
    keep = [i for i in range(plan.video_len) if i not in dropped]
    return [frames[i] for i in keep], [masks[i] for i in keep]


def apply_replace(
    frames,
    masks,
    plan: CorruptionPlan,
    level: int,
    min_distance: Optional[int] = None,
):
    """Substitute each selected frame with a temporally distant donor.

    The donor for index t depends only on (plan.seed, t), so donors stay put
    as the level grows. Donor content always comes from the original
    sequence.
    """
    _check_lengths(frames, masks, plan)
    t_total = plan.video_len
    dist = max(1, t_total // 4) if min_distance is None else int(min_distance)
    out_f = list(frames)
    out_m = list(masks)
    for t in _level_indices(plan, level):
        candidates = [i for i in range(t_total) if abs(i - t) >= dist]
        if not candidates:
            raise NoDonorAvailable(
                f"no donor at distance >= {dist} for frame {t} of {t_total}"
            )
        rng = np.random.default_rng([plan.seed, _DONOR_SALT, t])
        donor = candidates[int(rng.integers(len(candidates)))]
        out_f[t] = np.asarray(frames[donor]).copy()
        out_m[t] = np.asarray(masks[donor]).copy()
    return out_f, out_m


def blur_masked_region(image: np.ndarray, mask: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-blur a frame inside the mask only.

    Kernel radius is ceil(3 sigma); borders replicate edge pixels. Pixels
    outside the mask are returned bit-identical.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    m = as_mask(mask)
    if image.shape[:2] != m.shape:
        raise ValueError(f"image {image.shape[:2]} and mask {m.shape} dims differ")
    radius = math.ceil(3.0 * sigma)
    ksize = 2 * radius + 1
    blurred = cv2.GaussianBlur(
        image, (ksize, ksize), sigmaX=sigma, sigmaY=sigma,
        borderType=cv2.BORDER_REPLICATE,
    )
    out = image.copy()
    out[m] = blurred[m]
    return out


def apply_mask_blur(frames, masks, plan: CorruptionPlan, level: int, sigma: float = 2.0):
    """Blur the masked region of each selected frame; masks are unchanged."""
    _check_lengths(frames, masks, plan)
    chosen = set(_level_indices(plan, level))
    return [
        blur_masked_region(frames[t], masks[t], sigma) if t in chosen else frames[t]
        for t in range(plan.video_len)
    ]


def blur_sweep_rcs(
    image: np.ndarray,
    mask: np.ndarray,
    backend,
    cfg: RunConfig,
    sweep: BlurSweep,
) -> List[Tuple[float, float]]:
    """Normalized RC-S at each blur strength; sigma 0 scores the input as is."""
    rows: List[Tuple[float, float]] = []
    for sigma in sweep.sigmas:
        img = image if sigma == 0.0 else blur_masked_region(image, mask, sigma)
        score = rc_s(img, mask, backend, cfg)
        rows.append((float(sigma), score.rc_s_normalized))
    return rows
