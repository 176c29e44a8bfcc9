"""Command line front end: `rc <command>`.

One executable covers scoring, corruption protocols, benchmark QC,
camera-motion augmentation, rank correlation, and frequency diagnostics.
Exit codes: 0 success, 2 input problem (bad paths, malformed files,
invalid flags), 3 scoring/processing failure. Flags override --config
file values; the effective configuration is embedded in every JSON
report so results stay reproducible.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import bench_qc, corruption, diagnostics, fileio, report, stats
from .config import BACKENDS, RunConfig
from .errors import (
    AmplitudeTooLarge,
    EmptyInput,
    EmptyMask,
    InputError,
    InvalidPermutation,
    ItemMismatch,
    LengthMismatch,
    LevelTooLarge,
    RemovalCoherenceError,
    ShapeMismatch,
    TooFewFrames,
)
from .features import BackendSpec, make_backend
from .rc_core import normalized_score, rc_s, rc_t

# errors that mean the user handed us something unusable (exit 2), as
# opposed to a failure while computing scores (exit 3)
_INPUT_ERRORS = (
    InputError,
    ShapeMismatch,
    EmptyInput,
    EmptyMask,
    TooFewFrames,
    LevelTooLarge,
    LengthMismatch,
    ItemMismatch,
    InvalidPermutation,
    AmplitudeTooLarge,
    ValueError,
    OSError,
)


def _spec(cfg: RunConfig) -> BackendSpec:
    return BackendSpec(
        kind=cfg.backend,
        input_resize=cfg.input_resize,
        patch_stride=cfg.patch_stride,
        feature_dir=cfg.feature_dir,
        model_path=cfg.model,
    )


def _effective_config(args: argparse.Namespace) -> RunConfig:
    """defaults < --config file < environment < flags."""
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    model = args.model or os.environ.get("RC_MODEL_PATH") or cfg.model
    backend = args.backend
    if backend is None and model and cfg.backend == "toy":
        # a model path only makes sense for the neural backend
        backend = "neural"
    return cfg.merged(
        backend=backend, model=model, jobs=args.jobs, seed=args.seed
    )


def _emit_json(payload: Dict, out: Optional[str]) -> None:
    if out:
        report.write_json(out, payload)
    else:
        sys.stdout.write(report.render_json(payload))


# ------------------------------------------------------------- commands


def cmd_score_image(args, cfg: RunConfig) -> int:
    image = fileio.read_image(args.image)
    mask = fileio.read_mask(args.mask)
    score = rc_s(image, mask, make_backend(_spec(cfg)), cfg)
    _emit_json(report.image_report(score, cfg), args.out)
    return 0


def cmd_score_video(args, cfg: RunConfig) -> int:
    frames = fileio.read_frames(args.frames)
    masks = fileio.read_masks(args.masks)
    if len(frames) != len(masks):
        raise ShapeMismatch(
            f"{len(frames)} frames vs {len(masks)} masks"
        )
    backend = make_backend(_spec(cfg))
    spatial = [rc_s(f, m, backend, cfg) for f, m in zip(frames, masks)]
    temporal = rc_t(frames, masks, backend, cfg) if len(frames) >= 2 else None
    _emit_json(report.video_report(spatial, temporal, cfg), args.out)
    return 0


def _read_manifest(path) -> List[Dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in ("item", "method", "result", "mask"):
                if col not in header:
                    raise InputError(
                        f"manifest {path} is missing column {col!r}"
                    )
            rows = [row for row in reader if any((v or "").strip() for v in row.values())]
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    if not rows:
        raise InputError(f"manifest {path} has no data rows")
    return rows


def _score_entry(row: Dict[str, str], backend, cfg: RunConfig):
    item, method = row["item"], row["method"]
    try:
        result = Path(row["result"])
        if result.is_dir():
            frames = fileio.read_frames(result)
            masks = fileio.read_masks(row["mask"])
            if len(frames) != len(masks):
                raise ShapeMismatch(
                    f"{len(frames)} frames vs {len(masks)} masks"
                )
            raws = [rc_s(f, m, backend, cfg).rc_s_raw for f, m in zip(frames, masks)]
            rcs = normalized_score(float(np.mean(raws)), cfg.tau)
            rct = rc_t(frames, masks, backend, cfg).rc_t if len(frames) >= 2 else None
        else:
            image = fileio.read_image(result)
            mask = fileio.read_mask(row["mask"])
            rcs = rc_s(image, mask, backend, cfg).rc_s_normalized
            rct = None
        return (item, method, rcs, rct, None)
    except (RemovalCoherenceError, ValueError, OSError) as exc:
        return (item, method, None, None, f"{type(exc).__name__}: {exc}")


def cmd_batch(args, cfg: RunConfig) -> int:
    rows = _read_manifest(args.manifest)
    backend = make_backend(_spec(cfg))
    workers = cfg.jobs or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda r: _score_entry(r, backend, cfg), rows))
    report.write_batch_csv(args.out, results)
    failed = sum(1 for r in results if r[4])
    if failed:
        print(f"rc: {failed}/{len(results)} entries failed, see error column",
              file=sys.stderr)
    return 0


def _parse_levels(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise InputError(f"bad --levels value {text!r}, expected e.g. 2,4,8,16") from None


def cmd_corrupt(args, cfg: RunConfig) -> int:
    kind = args.kind.replace("-", "_")
    levels = _parse_levels(args.levels)
    src = Path(args.src)
    frames = fileio.read_frames(src / "input")
    masks = fileio.read_masks(src / "mask")
    if len(frames) != len(masks):
        raise ShapeMismatch(f"{len(frames)} frames vs {len(masks)} masks")
    plan = corruption.plan_corruption(kind, cfg.seed, len(frames), levels)
    out_root = Path(args.out)
    for level in plan.levels:
        if kind == "drop":
            out_f, out_m = corruption.apply_drop(frames, masks, plan, level)
        elif kind == "replace":
            out_f, out_m = corruption.apply_replace(frames, masks, plan, level)
        else:
            out_f = corruption.apply_mask_blur(
                frames, masks, plan, level, sigma=args.blur_sigma
            )
            out_m = list(masks)
        base = out_root / f"level_{level}"
        fileio.write_frames(base / "input", out_f)
        fileio.write_masks(base / "mask", out_m)
    payload = {
        "kind": plan.kind,
        "seed": plan.seed,
        "video_len": plan.video_len,
        "levels": list(plan.levels),
        "selected": {str(lv): list(plan.selected[lv]) for lv in plan.levels},
        "config": report.config_dict(cfg),
    }
    report.write_json(out_root / "plan.json", payload)
    return 0


def cmd_sweep_blur(args, cfg: RunConfig) -> int:
    image = fileio.read_image(args.image)
    mask = fileio.read_mask(args.mask)
    if args.sigmas:
        sweep = corruption.BlurSweep(
            tuple(float(s) for s in args.sigmas.split(",") if s.strip() != "")
        )
    else:
        sweep = corruption.BlurSweep()
    points = corruption.blur_sweep_rcs(image, mask, make_backend(_spec(cfg)), cfg, sweep)
    payload = {
        "sweep": [{"sigma": s, "rc_s_normalized": v} for s, v in points],
        "config": report.config_dict(cfg),
    }
    _emit_json(payload, args.out)
    return 0


def cmd_qc(args, cfg: RunConfig) -> int:
    root = Path(args.root)
    ids = fileio.list_sample_ids(root)
    if not ids:
        raise InputError(f"no samples found under {root}")
    samples = [fileio.load_sample(root, sid) for sid in ids]
    result = bench_qc.run_qc(
        samples, keep_fraction=args.keep, area_threshold=args.area_threshold
    )
    result["config"] = report.config_dict(cfg)
    report.write_json(args.report, result)
    kept = len(result["manifest"])
    print(f"rc: retained {kept}/{len(samples)} samples", file=sys.stderr)
    return 0


def _mask_centroids(masks, dims) -> List[Tuple[float, float]]:
    w, h = dims
    center = ((w - 1) / 2.0, (h - 1) / 2.0)
    out = []
    for m in masks:
        ys, xs = np.nonzero(m)
        out.append((float(xs.mean()), float(ys.mean())) if xs.size else center)
    return out


def cmd_augment(args, cfg: RunConfig) -> int:
    src = Path(args.src)
    sample = fileio.load_sample(src.parent, src.name)
    n_frames = args.frames if args.frames is not None else sample.n_frames
    if n_frames != sample.n_frames:
        raise InputError(
            f"--frames {n_frames} does not match the {sample.n_frames}-frame sample"
        )
    kb_cfg = bench_qc.KenBurnsConfig(amplitude=args.amplitude)
    centroids = None
    if args.style == "follow":
        centroids = _mask_centroids(sample.gt_masks, sample.frame_dims)
    track = bench_qc.make_kenburns_track(
        args.style, cfg.seed, n_frames, sample.frame_dims,
        config=kb_cfg, centroids=centroids,
    )
    fileio.save_sample(args.out, bench_qc.apply_kenburns(sample, track))
    return 0


def _load_scores(path, column: str) -> Dict[str, Dict[str, float]]:
    if column == "score":
        return report.load_metric_scores(path)
    # batch CSV: pick one score column out of item,method,rc_s,rc_t[,error]
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in ("item", "method", column):
                if col not in header:
                    raise InputError(f"{path} is missing column {col!r}")
            rows = list(reader)
    except FileNotFoundError:
        raise InputError(f"scores file not found: {path}") from None
    out: Dict[str, Dict[str, float]] = {}
    for row in rows:
        raw = (row[column] or "").strip()
        if raw == "":
            detail = (row.get("error") or "no value").strip()
            raise InputError(
                f"{row['item']}/{row['method']} has no {column} ({detail})"
            )
        per_item = out.setdefault(row["item"], {})
        if row["method"] in per_item:
            raise InputError(f"duplicate entry {row['item']}/{row['method']}")
        per_item[row["method"]] = float(raw)
    if not out:
        raise InputError(f"no data rows in {path}")
    return out


def cmd_correlate(args, cfg: RunConfig) -> int:
    scores = _load_scores(args.scores, args.column)
    human = report.load_rankings(args.rankings)
    result = stats.correlate(scores, args.higher_is_better, human)
    payload = result.to_dict()
    payload["config"] = report.config_dict(cfg)
    _emit_json(payload, args.out)
    return 0


def cmd_spectra(args, cfg: RunConfig) -> int:
    frames_a = fileio.read_frames(args.a)
    frames_b = fileio.read_frames(args.b)
    diff = diagnostics.spectral_diff(frames_a, frames_b)
    report.write_matrix_csv(args.out, diff.values)
    return 0


def cmd_fourier_sens(args, cfg: RunConfig) -> int:
    frames = fileio.read_frames(args.frames)
    grid = diagnostics.fourier_sensitivity(
        _spec(cfg), frames, grid=args.grid, epsilon=args.eps
    )
    report.write_matrix_csv(args.out, grid.values)
    return 0


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--backend", choices=BACKENDS, help="feature backend")
    common.add_argument("--model", metavar="PATH",
                        help="exported extractor (or set RC_MODEL_PATH)")
    common.add_argument("--jobs", type=int, metavar="N", help="parallel workers")
    common.add_argument("--seed", type=int, metavar="N", help="RNG seed")

    parser = argparse.ArgumentParser(
        prog="rc", description="Removal coherence scoring and benchmark tooling."
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("score-image", parents=[common],
                       help="score one removal result image")
    p.add_argument("--image", required=True, help="result image (PNG/JPEG)")
    p.add_argument("--mask", required=True, help="removal mask (8-bit PNG)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_score_image)

    p = sub.add_parser("score-video", parents=[common],
                       help="score a frame directory")
    p.add_argument("--frames", required=True, help="directory of result frames")
    p.add_argument("--masks", required=True, help="directory of per-frame masks")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_score_video)

    p = sub.add_parser("batch", parents=[common],
                       help="score a manifest of items in parallel")
    p.add_argument("--manifest", required=True,
                   help="CSV with columns item,method,result,mask")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("corrupt", parents=[common],
                       help="apply a controlled temporal corruption")
    p.add_argument("--kind", required=True, choices=("drop", "replace", "mask-blur"))
    p.add_argument("--levels", required=True, help="comma list, e.g. 2,4,8,16")
    p.add_argument("--in", required=True, dest="src",
                   help="sample directory containing input/ and mask/")
    p.add_argument("--out", required=True, help="output root, one level_N dir each")
    p.add_argument("--blur-sigma", type=float, default=2.0,
                   help="sigma for --kind mask-blur")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("sweep-blur", parents=[common],
                       help="normalized RC-S across in-mask blur strengths")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--sigmas", help="comma list of blur sigmas (default 0..5)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_sweep_blur)

    p = sub.add_parser("qc", parents=[common],
                       help="two-stage benchmark quality filter")
    p.add_argument("--root", required=True, help="dataset root of paired samples")
    p.add_argument("--keep", type=float, default=0.4,
                   help="stage-1 retention fraction")
    p.add_argument("--area-threshold", type=int, default=1000,
                   help="stage-2 max artifact component area (px)")
    p.add_argument("--report", default="qc_report.json", help="output JSON path")
    p.set_defaults(func=cmd_qc)

    p = sub.add_parser("augment", parents=[common],
                       help="synchronized camera-motion augmentation")
    p.add_argument("--style", required=True, choices=bench_qc.STYLES)
    p.add_argument("--frames", type=int,
                   help="expected frame count (defaults to the sample length)")
    p.add_argument("--amplitude", type=float, default=8.0,
                   help="max pan/shake displacement in pixels")
    p.add_argument("--in", required=True, dest="src", help="sample directory")
    p.add_argument("--out", required=True, help="output dataset root")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("correlate", parents=[common],
                       help="rank agreement between metric scores and human rankings")
    p.add_argument("--scores", required=True,
                   help="CSV of item,method,score (or a batch CSV with --column)")
    p.add_argument("--rankings", required=True,
                   help="CSV of item,rater,method,rank")
    p.add_argument("--column", default="score",
                   help="score column to use: score, rc_s, or rc_t")
    p.add_argument("--higher-is-better", action="store_true",
                   help="metric scores improve upward (e.g. normalized RC-S)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("spectra", parents=[common],
                       help="mean log-spectrum difference between two frame sets")
    p.add_argument("--a", required=True, help="first frame directory")
    p.add_argument("--b", required=True, help="second frame directory")
    p.add_argument("--out", required=True, help="output CSV matrix")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("fourier-sens", parents=[common],
                       help="feature sensitivity across a Fourier frequency grid")
    p.add_argument("--frames", required=True, help="probe frame directory")
    p.add_argument("--grid", type=int, default=diagnostics.DEFAULT_GRID,
                   help="odd grid side length")
    p.add_argument("--eps", type=float, default=diagnostics.DEFAULT_EPSILON,
                   help="perturbation amplitude in pixel units")
    p.add_argument("--out", required=True, help="output CSV matrix")
    p.set_defaults(func=cmd_fourier_sens)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        return args.func(args, cfg)
    except _INPUT_ERRORS as exc:
        print(f"rc: {exc}", file=sys.stderr)
        return 2
    except RemovalCoherenceError as exc:
        print(f"rc: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
