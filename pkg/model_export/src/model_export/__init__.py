"""Export vision transformer backbones for the removal-coherence toolkit."""

from .export import (
    MODELS,
    PARITY_TOL,
    DownloadError,
    ExportError,
    UnsupportedModel,
    export_backbone,
    export_module,
    reference_patch_features,
)

__all__ = [
    "MODELS",
    "PARITY_TOL",
    "DownloadError",
    "ExportError",
    "UnsupportedModel",
    "export_backbone",
    "export_module",
    "reference_patch_features",
]
