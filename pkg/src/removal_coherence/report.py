"""Report serialization: score JSON documents, batch CSV, matrix CSV,
and the CSV inputs of the correlation pipeline.

All real values are printed with 6 significant digits and JSON keys
are sorted, so identical runs serialize byte-identically.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .errors import InputError
from .rc_core import SpatialScore, TemporalScore, normalized_score
from .stats import RankingTable


def sig6(x: Optional[float]) -> Optional[float]:
    if x is None:
        return None
    return float(f"{float(x):.6g}")


def _rounded(obj):
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return sig6(float(obj))
    return obj


def render_json(doc: Dict) -> str:
    return json.dumps(_rounded(doc), sort_keys=True, indent=2) + "\n"


def write_json(path, doc: Dict) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_json(doc))


def config_dict(cfg: RunConfig) -> Dict:
    # window_size / stride carry the fractional window parameters
    return {
        "backend": cfg.backend,
        "window_size": cfg.window_fraction,
        "stride": cfg.stride_fraction,
        "sigma": cfg.sigma,
        "tau": cfg.tau,
        "input_resize": cfg.input_resize,
        "patch_stride": cfg.patch_stride,
        "model": cfg.model,
        "feature_dir": cfg.feature_dir,
        "l2_normalize": cfg.l2_normalize,
        "empty_pair_policy": cfg.empty_pair_policy,
        "seed": cfg.seed,
    }


def _target_entries(score: SpatialScore) -> List[Dict]:
    return [
        {
            "target": t.component_id,
            "mean": sig6(t.mean),
            "n_windows": len(t.windows),
            "windows": [
                {"y": w.y, "x": w.x, "value": sig6(w.value)} for w in t.windows
            ],
        }
        for t in score.per_target
    ]


def image_report(score: SpatialScore, cfg: RunConfig) -> Dict:
    return {
        "rc_s_raw": sig6(score.rc_s_raw),
        "rc_s_normalized": sig6(score.rc_s_normalized),
        "rc_t": None,
        "per_target": _target_entries(score),
        "per_pair": [],
        "config": config_dict(cfg),
    }


def video_report(
    spatial: Sequence[SpatialScore],
    temporal: Optional[TemporalScore],
    cfg: RunConfig,
) -> Dict:
    mean_raw = float(np.mean([s.rc_s_raw for s in spatial]))
    frames = [
        {
            "frame": i,
            "rc_s_raw": sig6(s.rc_s_raw),
            "rc_s_normalized": sig6(s.rc_s_normalized),
            "per_target": _target_entries(s),
        }
        for i, s in enumerate(spatial)
    ]
    if temporal is not None:
        per_pair = [
            {
                "t": p.t,
                "mean": sig6(p.mean),
                "n_windows": len(p.windows),
                "windows": [
                    {"y": w.y, "x": w.x, "value": sig6(w.value)}
                    for w in p.windows
                ],
            }
            for p in temporal.per_pair
        ]
        rc_t_value = sig6(temporal.rc_t)
        skipped = list(temporal.skipped_pairs)
    else:
        per_pair = []
        rc_t_value = None
        skipped = []
    return {
        "rc_s_raw": sig6(mean_raw),
        "rc_s_normalized": sig6(normalized_score(mean_raw, cfg.tau)),
        "rc_t": rc_t_value,
        "frames": frames,
        "per_pair": per_pair,
        "skipped_pairs": skipped,
        "config": config_dict(cfg),
    }


BATCH_HEADER = ("item", "method", "rc_s", "rc_t", "error")


def _cell(x: Optional[float]) -> str:
    return "" if x is None else f"{float(x):.6g}"


def write_batch_csv(
    path,
    rows: Sequence[Tuple[str, str, Optional[float], Optional[float], Optional[str]]],
) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BATCH_HEADER)
        for item, method, rcs, rct, err in rows:
            w.writerow([item, method, _cell(rcs), _cell(rct), err or ""])


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise InputError(f"matrix must be 2-D, got shape {m.shape}")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(f"{v:.6g}" for v in row) for row in m]
    p.write_text("\n".join(lines) + "\n")


def _read_csv_rows(path, header: Tuple[str, ...]) -> List[Dict[str, str]]:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"missing CSV: {p}")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise InputError(f"empty CSV: {p}") from None
        if tuple(h.strip() for h in got) != header:
            raise InputError(
                f"{p}: expected header {','.join(header)}, got {','.join(got)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{p}:{lineno}: expected {len(header)} columns")
            rows.append(dict(zip(header, (c.strip() for c in row))))
    return rows


def load_metric_scores(path) -> Dict[str, Dict[str, float]]:
    """Parse `item,method,score` CSV into the mapping `correlate` expects."""
    out: Dict[str, Dict[str, float]] = {}
    for row in _read_csv_rows(path, ("item", "method", "score")):
        try:
            value = float(row["score"])
        except ValueError:
            raise InputError(
                f"bad score {row['score']!r} for {row['item']}/{row['method']}"
            ) from None
        per_item = out.setdefault(row["item"], {})
        if row["method"] in per_item:
            raise InputError(f"duplicate entry {row['item']}/{row['method']}")
        per_item[row["method"]] = value
    if not out:
        raise InputError(f"no data rows in {path}")
    return out


def load_rankings(path) -> RankingTable:
    """Parse `item,rater,method,rank` CSV into a RankingTable. Items,
    raters, and methods keep first-appearance order."""
    rows = _read_csv_rows(path, ("item", "rater", "method", "rank"))
    if not rows:
        raise InputError(f"no data rows in {path}")
    items: List[str] = []
    raters: List[str] = []
    methods: List[str] = []
    for row in rows:
        if row["item"] not in items:
            items.append(row["item"])
        if row["rater"] not in raters:
            raters.append(row["rater"])
        if row["method"] not in methods:
            methods.append(row["method"])
    ranks = np.zeros((len(raters), len(items), len(methods)), dtype=np.int64)
    seen = set()
    for row in rows:
        key = (row["rater"], row["item"], row["method"])
        if key in seen:
            raise InputError(f"duplicate ranking row {key}")
        seen.add(key)
        try:
            rank = int(row["rank"])
        except ValueError:
            raise InputError(f"bad rank {row['rank']!r} in row {key}") from None
        ranks[raters.index(row["rater"]), items.index(row["item"]),
              methods.index(row["method"])] = rank
    if len(seen) != ranks.size:
        raise InputError(
            f"incomplete table: {len(seen)} rows for "
            f"{len(raters)} raters x {len(items)} items x {len(methods)} methods"
        )
    return RankingTable(items=tuple(items), methods=tuple(methods), ranks=ranks)
