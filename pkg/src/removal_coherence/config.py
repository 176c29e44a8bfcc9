"""Run configuration shared by the library and the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .errors import InputError

BACKENDS = ("toy", "file", "neural")
EMPTY_PAIR_POLICIES = ("exclude", "zero")


@dataclass
class RunConfig:
    """Effective scoring configuration, echoed verbatim into every report.

    window_fraction / stride_fraction are resolved against min(H', W') of the
    feature map at scoring time (floor, at least 1 cell). empty_pair_policy
    controls frame pairs whose mask intersection vanishes at feature
    resolution: "exclude" drops them from the temporal mean, "zero" counts
    them as zero discrepancy.
    """

    backend: str = "toy"
    model: Optional[str] = None      # path to an exported extractor
    feature_dir: Optional[str] = None  # precomputed-feature store (file backend)
    input_resize: int = 448
    patch_stride: int = 14
    window_fraction: float = 0.25
    stride_fraction: float = 0.125
    sigma: float = 10.0
    tau: float = 3.0
    l2_normalize: bool = False
    empty_pair_policy: str = "exclude"
    seed: int = 0
    jobs: Optional[int] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise InputError(f"unknown backend {self.backend!r}, expected one of {BACKENDS}")
        if self.empty_pair_policy not in EMPTY_PAIR_POLICIES:
            raise InputError(
                f"unknown empty_pair_policy {self.empty_pair_policy!r}, "
                f"expected one of {EMPTY_PAIR_POLICIES}"
            )
        if not (0.0 < self.window_fraction <= 1.0):
            raise InputError("window_fraction must be in (0, 1]")
        if not (0.0 < self.stride_fraction <= 1.0):
            raise InputError("stride_fraction must be in (0, 1]")
        if self.sigma <= 0:
            raise InputError("sigma must be positive")
        if self.tau <= 0:
            raise InputError("tau must be positive")
        if self.input_resize < 1 or self.patch_stride < 1:
            raise InputError("input_resize and patch_stride must be positive")
        if self.input_resize % self.patch_stride != 0:
            raise InputError("input_resize must be a multiple of patch_stride")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config file is not valid JSON: {path}") from exc
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def merged(self, **overrides: Any) -> "RunConfig":
        """Return a copy with the non-None overrides applied."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **updates)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)
