"""Frequency-domain diagnostics.

Two tools: spectral difference maps between paired frame sets (where in
frequency space two results disagree) and a Fourier-basis sensitivity
sweep answering how strongly a feature backend reacts to a single
spatial frequency of fixed magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import cv2
import numpy as np

from .errors import EmptyInput, InputError, ShapeMismatch
from .features import BackendSpec, make_backend

DEFAULT_GRID = 31
DEFAULT_EPSILON = 4.0


@dataclass(frozen=True, eq=False)
class SpectrumMap:
    """Mean centered log-magnitude spectrum difference, S_a - S_b."""

    values: np.ndarray
    n_frames: int


@dataclass(frozen=True, eq=False)
class SensitivityGrid:
    """values[i, j] is the response at frequency (u, v) = (j - G//2, i - G//2)."""

    values: np.ndarray
    epsilon: float
    grid_size: int

    def freq_at(self, i: int, j: int) -> Tuple[int, int]:
        half = self.grid_size // 2
        return (j - half, i - half)


def _log_spectrum(frame: np.ndarray) -> np.ndarray:
    gray = cv2.cvtColor(frame, cv2.COLOR_RGB2GRAY).astype(np.float64)
    return np.log1p(np.abs(np.fft.fftshift(np.fft.fft2(gray))))


def spectral_diff(frames_a: Sequence[np.ndarray],
                  frames_b: Sequence[np.ndarray]) -> SpectrumMap:
    """Average over pairs of S_a - S_b where S is the centered
    log(1 + |F|) magnitude spectrum of the grayscale frame."""
    if len(frames_a) == 0 or len(frames_b) == 0:
        raise EmptyInput("need at least one frame pair")
    if len(frames_a) != len(frames_b):
        raise ShapeMismatch(
            f"{len(frames_a)} frames vs {len(frames_b)} frames"
        )
    acc = None
    for a, b in zip(frames_a, frames_b):
        if a.shape != b.shape:
            raise ShapeMismatch(f"paired frame shapes differ: {a.shape} vs {b.shape}")
        d = _log_spectrum(a) - _log_spectrum(b)
        if acc is None:
            acc = d
        elif acc.shape != d.shape:
            raise ShapeMismatch("all pairs must share one frame size")
        else:
            acc += d
    return SpectrumMap(values=acc / len(frames_a), n_frames=len(frames_a))


def _basis(h: int, w: int, u: int, v: int) -> np.ndarray:
    x = np.arange(w, dtype=np.float64)[None, :]
    y = np.arange(h, dtype=np.float64)[:, None]
    b = np.cos(2.0 * math.pi * (u * x / w + v * y / h))
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        return b
    return b / norm


def fourier_sensitivity(
    backend: BackendSpec,
    frames: Sequence[np.ndarray],
    grid: int = DEFAULT_GRID,
    epsilon: float = DEFAULT_EPSILON,
) -> SensitivityGrid:
    """Feature response to unit-energy cosine perturbations.

    For each (u, v) on the centered G x G grid the L2-normalized real
    cosine basis image, scaled to magnitude epsilon, is added to every
    channel; the response is the L2 norm of the flattened feature
    change, averaged over frames.
    """
    if len(frames) == 0:
        raise EmptyInput("need at least one frame")
    if grid < 1 or grid % 2 == 0:
        raise InputError(f"grid must be odd and positive, got {grid}")
    if epsilon < 0:
        raise InputError(f"epsilon must be >= 0, got {epsilon}")
    h, w = frames[0].shape[:2]
    for f in frames:
        if f.shape != (h, w, 3):
            raise ShapeMismatch(
                f"all frames must be ({h}, {w}, 3), got {f.shape}"
            )
    extractor = make_backend(backend)
    half = grid // 2
    out = np.zeros((grid, grid), dtype=np.float64)
    for frame in frames:
        base = extractor.extract(frame).astype(np.float64).ravel()
        floating = frame.astype(np.float64)
        for i in range(grid):
            for j in range(grid):
                delta = epsilon * _basis(h, w, j - half, i - half)
                perturbed = floating + delta[:, :, None]
                feats = extractor.extract(perturbed).astype(np.float64).ravel()
                out[i, j] += float(np.linalg.norm(feats - base))
    return SensitivityGrid(
        values=out / len(frames), epsilon=float(epsilon), grid_size=grid
    )
