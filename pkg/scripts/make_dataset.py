"""Build a small synthetic paired benchmark on disk.

Each sample gets input/, gt/, and mask/ frame directories plus
meta.json, in the layout the qc and augment commands expect. Inputs are
the clean plate with the masked region refilled (coherently or with
noise), so stage-1 mask-consistency scoring has real signal.

Usage: python3 scripts/make_dataset.py --out data/synth --n 8 --frames 12
"""

import argparse
import sys

import numpy as np

from removal_coherence import synthetic
from removal_coherence.bench_qc import PairedSample
from removal_coherence.fileio import save_sample


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="dataset root to create")
    ap.add_argument("--n", type=int, default=8, help="number of samples")
    ap.add_argument("--frames", type=int, default=12)
    ap.add_argument("--size", type=int, default=96)
    args = ap.parse_args()

    for i in range(args.n):
        gt_frames, masks = synthetic.make_drifting_video(
            i, n_frames=args.frames, h=args.size, w=args.size
        )
        # refill the target region; odd samples get the sloppy noise fill
        fill = "coherent" if i % 2 == 0 else "noise"
        if fill == "coherent":
            content = synthetic.make_texture(100003 + i, args.size, args.size)
        else:
            content = np.random.default_rng([i, 9]).integers(
                0, 256, (args.size, args.size, 3)
            ).astype(np.uint8)
        inputs = []
        for frame, mask in zip(gt_frames, masks):
            out = frame.copy()
            out[mask] = content[mask]
            inputs.append(out)
        sample = PairedSample(
            f"synth{i:03d}", inputs, list(gt_frames), list(masks),
            meta={"fill": fill},
        )
        path = save_sample(args.out, sample)
        print(f"wrote {path} ({fill})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
