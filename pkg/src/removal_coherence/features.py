"""Feature extraction backends and the on-disk feature tensor format.

A feature map is a float32 array of shape (C, H', W'): one C-dimensional
descriptor per spatial cell. Three backends produce them:

* ``toy``    -- deterministic patch statistics, no model needed. The crop is
  bilinearly resized to ``input_resize`` and every patch_stride x patch_stride
  patch yields 10 channels: per-channel mean (3), per-channel std (3), and
  mean/std of the in-patch horizontal and vertical luma gradient magnitudes.
* ``file``   -- precomputed tensors looked up by a content hash of the crop.
* ``neural`` -- an exported extractor graph (ONNX), run with the bundled
  numpy executor. Input contract: float32 RGB in [0, 1], shape [1, 3, S, S],
  any normalization baked into the graph; output [1, C, H', W'].
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from .errors import FeatureUnavailable, FormatError, ModelLoadError, ShapeMismatch

FEATURE_MAGIC = b"RCFT"
FEATURE_VERSION = 1
_CROP_KEY_PREFIX = b"RCCROP"
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class BackendSpec:
    """Declarative description of a feature backend."""

    kind: str
    input_resize: int = 448
    patch_stride: int = 14
    feature_dir: Optional[str] = None
    model_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("toy", "file", "neural"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "toy":
            if self.input_resize % self.patch_stride != 0:
                raise ValueError("input_resize must be a multiple of patch_stride")


def _check_crop(crop: np.ndarray) -> np.ndarray:
    a = np.asarray(crop)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ShapeMismatch(f"crop must be HxWx3, got {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeMismatch("crop must be non-empty")
    return a


class ToyBackend:
    """Model-free patch-statistics features (10 channels)."""

    def __init__(self, spec: BackendSpec):
        self.spec = spec
        self.grid = spec.input_resize // spec.patch_stride

    def extract(self, crop: np.ndarray) -> np.ndarray:
        a = _check_crop(crop).astype(np.float32)
        size = self.spec.input_resize
        if a.shape[:2] != (size, size):
            a = cv2.resize(
                np.ascontiguousarray(a), (size, size), interpolation=cv2.INTER_LINEAR
            )
        g, s = self.grid, self.spec.patch_stride
        patches = a.reshape(g, s, g, s, 3)
        means = patches.mean(axis=(1, 3))
        stds = patches.std(axis=(1, 3))

        luma = a @ _LUMA
        lp = luma.reshape(g, s, g, s)
        if s > 1:
            dx = np.abs(np.diff(lp, axis=3))
            dy = np.abs(np.diff(lp, axis=1))
            gx_mean, gx_std = dx.mean(axis=(1, 3)), dx.std(axis=(1, 3))
            gy_mean, gy_std = dy.mean(axis=(1, 3)), dy.std(axis=(1, 3))
        else:
            gx_mean = gx_std = gy_mean = gy_std = np.zeros((g, g), np.float32)

        fm = np.stack(
            [
                means[..., 0], means[..., 1], means[..., 2],
                stds[..., 0], stds[..., 1], stds[..., 2],
                gx_mean, gy_mean, gx_std, gy_std,
            ]
        )
        return np.ascontiguousarray(fm, dtype=np.float32)


class FileBackend:
    """Looks up precomputed feature tensors keyed by crop content hash."""

    def __init__(self, spec: BackendSpec):
        if not spec.feature_dir:
            raise ValueError("file backend needs feature_dir")
        self.spec = spec
        self.root = Path(spec.feature_dir)

    def _path(self, crop: np.ndarray) -> Path:
        return self.root / f"{crop_content_key(crop)}.rcft"

    def extract(self, crop: np.ndarray) -> np.ndarray:
        crop = _check_crop(crop)
        path = self._path(crop)
        if not path.exists():
            raise FeatureUnavailable(f"no precomputed features for crop: {path.name}")
        return read_feature_file(path)

    def store(self, crop: np.ndarray, fm: np.ndarray) -> str:
        """Persist features for a crop; returns the content key."""
        crop = _check_crop(crop)
        self.root.mkdir(parents=True, exist_ok=True)
        write_feature_file(self._path(crop), fm)
        return crop_content_key(crop)


class NeuralBackend:
    """Runs an exported extractor graph. Deterministic, single session."""

    def __init__(self, spec: BackendSpec):
        path = spec.model_path or os.environ.get("RC_MODEL_PATH")
        if not path:
            raise ModelLoadError(
                "no model configured: pass model_path or set RC_MODEL_PATH"
            )
        if not Path(path).is_file():
            raise ModelLoadError(f"model file not found: {path}")
        from . import onnx_rt

        try:
            self.session = onnx_rt.load_model(path)
        except FormatError as exc:
            raise ModelLoadError(f"invalid model file {path}: {exc}") from exc
        dims = self.session.input_shape
        if len(dims) != 4 or dims[0] != 1 or dims[1] != 3 or dims[2] != dims[3]:
            raise ModelLoadError(
                f"model input must be [1, 3, S, S], got {dims}"
            )
        self.spec = spec
        self.input_size = int(dims[2])

    def extract(self, crop: np.ndarray) -> np.ndarray:
        a = _check_crop(crop).astype(np.float32)
        size = self.input_size
        if a.shape[:2] != (size, size):
            a = cv2.resize(
                np.ascontiguousarray(a), (size, size), interpolation=cv2.INTER_LINEAR
            )
        x = (a / 255.0).transpose(2, 0, 1)[None]
        out = self.session.run(np.ascontiguousarray(x))
        if out.ndim != 4 or out.shape[0] != 1:
            raise ModelLoadError(f"model output must be [1, C, H', W'], got {out.shape}")
        fm = np.ascontiguousarray(out[0], dtype=np.float32)
        if not np.isfinite(fm).all():
            raise ModelLoadError("model produced non-finite features")
        return fm


def make_backend(spec: BackendSpec):
    if spec.kind == "toy":
        return ToyBackend(spec)
    if spec.kind == "file":
        return FileBackend(spec)
    return NeuralBackend(spec)


def extract_features(backend, crop: np.ndarray) -> np.ndarray:
    """Run a backend on one crop."""
    return backend.extract(crop)


def crop_content_key(crop: np.ndarray) -> str:
    """Content hash of an 8-bit RGB crop (dims + raw bytes, sha256 hex)."""
    import hashlib

    a = _check_crop(crop)
    if a.dtype != np.uint8:
        raise ShapeMismatch("content keys are defined for uint8 crops")
    a = np.ascontiguousarray(a)
    h = hashlib.sha256()
    h.update(_CROP_KEY_PREFIX)
    h.update(struct.pack("<3I", a.shape[0], a.shape[1], a.shape[2]))
    h.update(a.tobytes())
    return h.hexdigest()


def write_feature_file(path, fm: np.ndarray) -> None:
    """Serialize a feature map: 'RCFT', u32 version, u32 C/H'/W', f32 payload."""
    a = np.asarray(fm)
    if a.ndim != 3:
        raise FormatError(f"feature map must be 3-D, got {a.shape}")
    if not np.isfinite(a).all():
        raise FormatError("feature map contains non-finite values")
    c, h, w = a.shape
    header = FEATURE_MAGIC + struct.pack("<4I", FEATURE_VERSION, c, h, w)
    payload = np.ascontiguousarray(a, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_feature_file(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != FEATURE_MAGIC:
        raise FormatError(f"not a feature file: {path}")
    version, c, h, w = struct.unpack("<4I", raw[4:20])
    if version != FEATURE_VERSION:
        raise FormatError(f"unsupported feature file version {version}")
    if min(c, h, w) < 1:
        raise FormatError(f"bad feature dims ({c}, {h}, {w})")
    expected = 20 + 4 * c * h * w
    if len(raw) != expected:
        raise FormatError(
            f"payload size mismatch: expected {expected} bytes, found {len(raw)}"
        )
    fm = np.frombuffer(raw, dtype="<f4", offset=20).reshape(c, h, w).copy()
    if not np.isfinite(fm).all():
        raise FormatError("feature file contains non-finite values")
    return fm
