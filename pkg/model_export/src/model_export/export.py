"""One-shot backbone export: weights in, verified model file + manifest out.

Each export is checked before the manifest is written: the serialized
graph is executed through the removal-coherence runtime on a fixed test
image and compared against the source model's own forward pass. The
largest absolute difference is recorded in the manifest and must stay
within PARITY_TOL.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Tuple

import numpy as np
import torch
from torchvision.models.vision_transformer import (
    VisionTransformer,
    interpolate_embeddings,
)

from removal_coherence import onnx_rt

from .vit_graph import build_graph

PARITY_TOL = 1e-3
_NATIVE_RESOLUTION = 224
_TEST_IMAGE_SEED = 20240501


class ExportError(RuntimeError):
    """Export could not be completed."""


class UnsupportedModel(ExportError):
    """Requested model name is not in the registry."""


class DownloadError(ExportError):
    """Pretrained weights could not be fetched."""


ModelBuild = Tuple[torch.nn.Module, Sequence[float], Sequence[float]]


def _build_tiny(resolution: int) -> ModelBuild:
    # Small randomly initialized backbone for offline smoke tests; the
    # fixed seed makes repeated exports bit-identical.
    torch.manual_seed(0)
    model = VisionTransformer(
        image_size=resolution,
        patch_size=16,
        num_layers=2,
        num_heads=2,
        hidden_dim=32,
        mlp_dim=64,
    )
    return model, (0.485, 0.456, 0.406), (0.229, 0.224, 0.225)


def _build_pretrained(arch: str, resolution: int) -> ModelBuild:
    from torchvision.models import ViT_B_16_Weights, ViT_B_32_Weights

    catalog = {
        "vit_b_16": (ViT_B_16_Weights.IMAGENET1K_V1, 16),
        "vit_b_32": (ViT_B_32_Weights.IMAGENET1K_V1, 32),
    }
    weights, patch = catalog[arch]
    try:
        state = weights.get_state_dict(progress=False)
    except (OSError, RuntimeError) as exc:
        raise DownloadError(f"could not fetch weights for {arch!r}: {exc}") from exc
    if resolution != _NATIVE_RESOLUTION:
        state = interpolate_embeddings(resolution, patch, state)
    model = VisionTransformer(
        image_size=resolution,
        patch_size=patch,
        num_layers=12,
        num_heads=12,
        hidden_dim=768,
        mlp_dim=3072,
    )
    model.load_state_dict(state)
    preset = weights.transforms()
    return model, tuple(preset.mean), tuple(preset.std)


@dataclass(frozen=True)
class _Entry:
    patch: int
    build: Callable[[int], ModelBuild]


MODELS = {
    "tiny": _Entry(16, _build_tiny),
    "vit_b_16": _Entry(16, lambda r: _build_pretrained("vit_b_16", r)),
    "vit_b_32": _Entry(32, lambda r: _build_pretrained("vit_b_32", r)),
}


def _test_image(size: int) -> np.ndarray:
    """Fixed [1, 3, S, S] float32 image in [0, 1] used for parity checks."""
    rng = np.random.default_rng(_TEST_IMAGE_SEED)
    img = rng.integers(0, 256, size=(1, 3, size, size), dtype=np.uint8)
    return img.astype(np.float32) / 255.0


def reference_patch_features(
    model: torch.nn.Module,
    x01: np.ndarray,
    mean: Sequence[float],
    std: Sequence[float],
) -> np.ndarray:
    """Source-framework forward pass yielding [1, C, H', W'] patch tokens."""
    model.eval()
    with torch.no_grad():
        t = torch.from_numpy(np.ascontiguousarray(x01, dtype=np.float32))
        t = (t - torch.tensor(mean).view(1, 3, 1, 1)) / torch.tensor(std).view(
            1, 3, 1, 1
        )
        feats = model._process_input(t)
        cls = model.class_token.expand(t.shape[0], -1, -1)
        feats = torch.cat([cls, feats], dim=1)
        feats = model.encoder(feats)[:, 1:]
    grid = model.image_size // model.patch_size
    return (
        feats.permute(0, 2, 1)
        .reshape(1, model.hidden_dim, grid, grid)
        .numpy()
        .astype(np.float32)
    )


def export_module(
    model: torch.nn.Module,
    name: str,
    out_path,
    mean: Sequence[float],
    std: Sequence[float],
) -> dict:
    """Serialize an already-built VisionTransformer and write its manifest.

    Returns the manifest dict; raises ExportError if the serialized
    graph disagrees with the torch forward pass beyond PARITY_TOL.
    """
    model.eval()
    out = Path(out_path)
    blob, meta = build_graph(model, mean, std)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(blob)

    session = onnx_rt.load_model(out)
    resolution = session.input_shape[2]
    x01 = _test_image(resolution)
    got = session.run(x01)
    want = reference_patch_features(model, x01, mean, std)
    if got.shape != want.shape:
        raise ExportError(
            f"exported output shape {got.shape} != source {want.shape}"
        )
    deviation = float(np.max(np.abs(got.astype(np.float64) - want)))
    if not math.isfinite(deviation) or deviation > PARITY_TOL:
        raise ExportError(
            f"parity check failed: max deviation {deviation:.3e} "
            f"exceeds {PARITY_TOL:.0e}"
        )

    manifest = {
        "model": name,
        "input_resolution": resolution,
        "patch_size": meta["patch"],
        "output_dims": [meta["channels"], meta["grid"], meta["grid"]],
        "sha256": hashlib.sha256(blob).hexdigest(),
        "max_abs_deviation": deviation,
        "normalization": {
            "mean": [float(v) for v in mean],
            "std": [float(v) for v in std],
        },
    }
    manifest_path = out.parent / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def export_backbone(model_name: str, resolution: int, out_path) -> dict:
    """Build a registered backbone at `resolution` and export it."""
    if model_name not in MODELS:
        known = ", ".join(sorted(MODELS))
        raise UnsupportedModel(f"unknown model {model_name!r} (choose from: {known})")
    entry = MODELS[model_name]
    if resolution < entry.patch or resolution % entry.patch:
        raise ExportError(
            f"resolution {resolution} must be a positive multiple of "
            f"the {entry.patch}px patch size"
        )
    model, mean, std = entry.build(resolution)
    return export_module(model, model_name, out_path, mean, std)
