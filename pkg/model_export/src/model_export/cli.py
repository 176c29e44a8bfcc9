"""Command line entry point: `export_backbone`."""

from __future__ import annotations

import argparse
import sys

from .export import MODELS, ExportError, export_backbone


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="export_backbone",
        description="Export a vision transformer's patch features to a "
        "verified model file plus manifest.json",
    )
    p.add_argument("--model", required=True, choices=sorted(MODELS))
    p.add_argument("--resolution", type=int, default=448)
    p.add_argument("--out", default="model.onnx")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export_backbone(args.model, args.resolution, args.out)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    c, h, w = manifest["output_dims"]
    print(
        f"wrote {args.out}: {manifest['model']} @ {manifest['input_resolution']}px "
        f"-> [{c}, {h}, {w}], max deviation {manifest['max_abs_deviation']:.2e}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
