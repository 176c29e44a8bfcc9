"""Seeded synthetic scenes for experiments and self-tests.

Textures are low-resolution noise upsampled bilinearly, giving smooth
locally-correlated backgrounds. Scenes carve a square target region
into the texture and fill it either with a fresh draw from the same
texture process (statistically coherent) or with iid uniform noise
(incoherent), which is the controlled contrast the spatial score is
supposed to resolve.
"""

from __future__ import annotations

from typing import List, Tuple

import cv2
import numpy as np

FILLS = ("none", "coherent", "noise")


def make_texture(seed: int, h: int, w: int, scale: int = 8) -> np.ndarray:
    rng = np.random.default_rng([seed, 0])
    low = rng.integers(
        0, 256, (h // scale + 2, w // scale + 2, 3)
    ).astype(np.float32)
    up = cv2.resize(low, (w, h), interpolation=cv2.INTER_LINEAR)
    return np.clip(np.rint(up), 0, 255).astype(np.uint8)


def _mask_box(seed: int, h: int, w: int, frac: float) -> Tuple[int, int, int]:
    rng = np.random.default_rng([seed, 1])
    size = max(4, int(min(h, w) * frac))
    margin_y = max(1, (h - size) // 8)
    margin_x = max(1, (w - size) // 8)
    y0 = int(rng.integers(margin_y, h - size - margin_y + 1))
    x0 = int(rng.integers(margin_x, w - size - margin_x + 1))
    return y0, x0, size


def make_scene(
    seed: int,
    h: int = 128,
    w: int = 128,
    fill: str = "coherent",
    mask_frac: float = 1 / 3,
) -> Tuple[np.ndarray, np.ndarray]:
    """A textured image plus a square removal mask whose interior is
    filled per `fill`: "none" leaves the texture, "coherent" pastes an
    independent draw of the same texture process, "noise" pastes iid
    uniform noise."""
    if fill not in FILLS:
        raise ValueError(f"fill must be one of {FILLS}, got {fill!r}")
    img = make_texture(seed, h, w).copy()
    y0, x0, size = _mask_box(seed, h, w, mask_frac)
    mask = np.zeros((h, w), dtype=bool)
    mask[y0:y0 + size, x0:x0 + size] = True
    if fill == "coherent":
        donor = make_texture(seed + 100003, h, w)
        img[mask] = donor[mask]
    elif fill == "noise":
        rng = np.random.default_rng([seed, 2])
        img[mask] = rng.integers(0, 256, (int(mask.sum()), 3), dtype=np.uint8)
    return img, mask


def make_drifting_video(
    seed: int,
    n_frames: int = 8,
    h: int = 96,
    w: int = 96,
    drift: int = 2,
    mask_frac: float = 1 / 3,
    scale: int = 8,
    contrast: float = 1.0,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """A texture panning horizontally by `drift` px per frame under a
    static square mask. With drift 0 the sequence is static.

    scale/contrast shape the texture: larger scale and contrast < 1 give
    gentler frame-to-frame feature changes, useful when a discrepancy
    measure would otherwise saturate on hard random texture.
    """
    base = make_texture(seed, h, w, scale=scale)
    if contrast != 1.0:
        flat = (base.astype(np.float32) - 128.0) * float(contrast) + 128.0
        base = np.clip(np.rint(flat), 0, 255).astype(np.uint8)
    y0, x0, size = _mask_box(seed, h, w, mask_frac)
    mask = np.zeros((h, w), dtype=bool)
    mask[y0:y0 + size, x0:x0 + size] = True
    frames = [np.roll(base, drift * i, axis=1) for i in range(n_frames)]
    return frames, [mask.copy() for _ in range(n_frames)]
