"""Disk layout: PNG frames, binary masks, paired-sample directories.

Masks are single-channel 8-bit PNGs where value >= 128 means "set".
Videos are directories of zero-padded `%05d.png` frames. A paired
sample lives under `<root>/<id>/{input,gt,mask}/` plus `meta.json`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Sequence

import cv2
import numpy as np

from .bench_qc import PairedSample
from .errors import InputError, ShapeMismatch
from .mask_ops import as_mask

_FRAME_PATTERNS = ("*.png", "*.jpg", "*.jpeg")


def frame_name(index: int) -> str:
    return f"{index:05d}.png"


def read_image(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise InputError(f"cannot read image: {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def write_image(path, image: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bgr = cv2.cvtColor(np.ascontiguousarray(image, dtype=np.uint8),
                       cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), bgr):
        raise InputError(f"cannot write image: {path}")


def read_mask(path) -> np.ndarray:
    gray = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if gray is None:
        raise InputError(f"cannot read mask: {path}")
    return gray >= 128


def write_mask(path, mask: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = np.where(as_mask(mask), 255, 0).astype(np.uint8)
    if not cv2.imwrite(str(path), img):
        raise InputError(f"cannot write mask: {path}")


def _frame_files(directory) -> List[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"not a directory: {d}")
    files: List[Path] = []
    for pat in _FRAME_PATTERNS:
        files.extend(d.glob(pat))
    if not files:
        raise InputError(f"no frames found in {d}")
    return sorted(files, key=lambda p: p.name)


def read_frames(directory) -> List[np.ndarray]:
    return [read_image(p) for p in _frame_files(directory)]


def read_masks(directory) -> List[np.ndarray]:
    return [read_mask(p) for p in _frame_files(directory)]


def write_frames(directory, frames: Sequence[np.ndarray]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        write_image(d / frame_name(i), f)


def write_masks(directory, masks: Sequence[np.ndarray]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(masks):
        write_mask(d / frame_name(i), m)


def read_meta(path) -> Dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"missing meta file: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"bad JSON in {p}: {e}") from e


def write_meta(path, meta: Dict) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def save_sample(root, sample: PairedSample) -> Path:
    base = Path(root) / sample.sample_id
    write_frames(base / "input", sample.input_frames)
    write_frames(base / "gt", sample.gt_frames)
    write_masks(base / "mask", sample.gt_masks)
    w, h = sample.frame_dims
    meta = {"n_frames": sample.n_frames, "width": w, "height": h}
    meta.update(sample.meta)
    write_meta(base / "meta.json", meta)
    return base


def load_sample(root, sample_id: str) -> PairedSample:
    base = Path(root) / sample_id
    if not base.is_dir():
        raise InputError(f"no such sample: {base}")
    frames = read_frames(base / "input")
    gt = read_frames(base / "gt")
    masks = read_masks(base / "mask")
    meta = read_meta(base / "meta.json") if (base / "meta.json").is_file() else {}
    return PairedSample(
        sample_id=sample_id,
        input_frames=frames,
        gt_frames=gt,
        gt_masks=masks,
        meta=meta,
    )


def list_sample_ids(root) -> List[str]:
    r = Path(root)
    if not r.is_dir():
        raise InputError(f"not a directory: {r}")
    return sorted(
        d.name for d in r.iterdir() if d.is_dir() and (d / "input").is_dir()
    )
