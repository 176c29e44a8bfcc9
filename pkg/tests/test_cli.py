"""End-to-end tests for the `rc` command line tool.

Commands run in-process through cli.main so exit codes and emitted
artifacts are checked directly. A small feature-map config keeps the toy
backend fast.
"""

import csv
import json

import numpy as np
import pytest

from removal_coherence import bench_qc, fileio, synthetic
from removal_coherence.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(
        {"backend": "toy", "input_resize": 64, "patch_stride": 8}
    ))
    return path


@pytest.fixture
def scene_files(tmp_path):
    frame, mask = synthetic.make_scene(3, h=64, w=64, fill="noise")
    img_path = tmp_path / "image.png"
    mask_path = tmp_path / "mask.png"
    fileio.write_image(img_path, frame)
    fileio.write_mask(mask_path, mask)
    return img_path, mask_path


def make_video_dirs(tmp_path, n_frames=6, name="vid"):
    frames, masks = synthetic.make_drifting_video(5, n_frames=n_frames, h=64, w=64)
    frames_dir = tmp_path / name / "frames"
    masks_dir = tmp_path / name / "masks"
    fileio.write_frames(frames_dir, frames)
    fileio.write_masks(masks_dir, masks)
    return frames_dir, masks_dir


# ------------------------------------------------------------ score-image


def test_score_image_writes_report(tmp_path, cfg_file, scene_files):
    img, mask = scene_files
    out = tmp_path / "report.json"
    code = run("score-image", "--config", cfg_file, "--image", img,
               "--mask", mask, "--out", out)
    assert code == 0
    payload = json.loads(out.read_text())
    assert set(payload) >= {"rc_s_raw", "rc_s_normalized", "per_target", "config"}
    assert payload["config"]["backend"] == "toy"
    assert payload["config"]["window_size"] == 0.25
    assert 0.0 < payload["rc_s_normalized"] <= 1.0


def test_score_image_stdout(capsys, cfg_file, scene_files):
    img, mask = scene_files
    assert run("score-image", "--config", cfg_file,
               "--image", img, "--mask", mask) == 0
    payload = json.loads(capsys.readouterr().out)
    assert "rc_s_raw" in payload


def test_score_image_missing_mask_is_input_error(tmp_path, cfg_file, scene_files):
    img, _ = scene_files
    code = run("score-image", "--config", cfg_file, "--image", img,
               "--mask", tmp_path / "nope.png", "--out", tmp_path / "r.json")
    assert code == 2


def test_score_image_degenerate_mask_is_scoring_error(tmp_path, cfg_file):
    frame, _ = synthetic.make_scene(1, h=64, w=64)
    img = tmp_path / "i.png"
    mask = tmp_path / "m.png"
    fileio.write_image(img, frame)
    fileio.write_mask(mask, np.ones((64, 64), bool))  # nothing left to reference
    code = run("score-image", "--config", cfg_file, "--image", img,
               "--mask", mask, "--out", tmp_path / "r.json")
    assert code == 3


def test_score_image_deterministic_bytes(tmp_path, cfg_file, scene_files):
    img, mask = scene_files
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run("score-image", "--config", cfg_file, "--image", img,
                   "--mask", mask, "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()


def test_flags_override_config_file(tmp_path, scene_files):
    img, mask = scene_files
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(
        {"backend": "toy", "input_resize": 64, "patch_stride": 8,
         "sigma": 5.0, "seed": 1}
    ))
    out = tmp_path / "r.json"
    assert run("score-image", "--config", cfg, "--seed", 9,
               "--image", img, "--mask", mask, "--out", out) == 0
    conf = json.loads(out.read_text())["config"]
    assert conf["sigma"] == 5.0  # from file
    assert conf["seed"] == 9     # flag wins


def test_env_model_path_is_picked_up(tmp_path, cfg_file, scene_files, monkeypatch):
    img, mask = scene_files
    monkeypatch.setenv("RC_MODEL_PATH", "/no/such/model.onnx")
    out = tmp_path / "r.json"
    # explicit --backend toy: the model path is recorded but unused
    assert run("score-image", "--config", cfg_file, "--backend", "toy",
               "--image", img, "--mask", mask, "--out", out) == 0
    assert json.loads(out.read_text())["config"]["model"] == "/no/such/model.onnx"


# ------------------------------------------------------------ score-video


def test_score_video_report_counts(tmp_path, cfg_file):
    frames_dir, masks_dir = make_video_dirs(tmp_path, n_frames=6)
    out = tmp_path / "video.json"
    assert run("score-video", "--config", cfg_file, "--frames", frames_dir,
               "--masks", masks_dir, "--out", out) == 0
    payload = json.loads(out.read_text())
    assert len(payload["frames"]) == 6
    assert len(payload["per_pair"]) == 5
    assert isinstance(payload["rc_t"], float)


def test_score_video_single_frame_has_no_temporal(tmp_path, cfg_file):
    frames_dir, masks_dir = make_video_dirs(tmp_path, n_frames=1)
    out = tmp_path / "video.json"
    assert run("score-video", "--config", cfg_file, "--frames", frames_dir,
               "--masks", masks_dir, "--out", out) == 0
    payload = json.loads(out.read_text())
    assert payload["rc_t"] is None
    assert payload["per_pair"] == []


def test_score_video_count_mismatch(tmp_path, cfg_file):
    frames_dir, masks_dir = make_video_dirs(tmp_path, n_frames=4)
    (masks_dir / "00003.png").unlink()
    code = run("score-video", "--config", cfg_file, "--frames", frames_dir,
               "--masks", masks_dir, "--out", tmp_path / "r.json")
    assert code == 2


def test_score_video_deterministic_bytes(tmp_path, cfg_file):
    frames_dir, masks_dir = make_video_dirs(tmp_path, n_frames=4)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run("score-video", "--config", cfg_file, "--frames", frames_dir,
                   "--masks", masks_dir, "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------------ batch


def write_manifest(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "method", "result", "mask"])
        writer.writerows(rows)


def test_batch_partial_failure_keeps_going(tmp_path, cfg_file):
    entries = []
    for i, fill in enumerate(("coherent", "noise")):
        frame, mask = synthetic.make_scene(10 + i, h=64, w=64, fill=fill)
        img, msk = tmp_path / f"r{i}.png", tmp_path / f"m{i}.png"
        fileio.write_image(img, frame)
        fileio.write_mask(msk, mask)
        entries.append((f"item{i}", "methodA", img, msk))
    manifest = tmp_path / "manifest.csv"
    write_manifest(manifest, entries + [("item9", "methodA", tmp_path / "gone.png",
                                         tmp_path / "m0.png")])
    out = tmp_path / "scores.csv"
    assert run("batch", "--config", cfg_file, "--manifest", manifest,
               "--out", out) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["item"] for r in rows] == ["item0", "item1", "item9"]
    assert rows[0]["error"] == "" and float(rows[0]["rc_s"]) > 0
    assert rows[1]["rc_t"] == ""  # image entries have no temporal score
    assert rows[2]["rc_s"] == "" and "InputError" in rows[2]["error"]


def test_batch_video_entry_scores_both_metrics(tmp_path, cfg_file):
    frames_dir, masks_dir = make_video_dirs(tmp_path, n_frames=4)
    manifest = tmp_path / "manifest.csv"
    write_manifest(manifest, [("vid", "methodA", frames_dir, masks_dir)])
    out = tmp_path / "scores.csv"
    assert run("batch", "--config", cfg_file, "--manifest", manifest,
               "--out", out) == 0
    with open(out, newline="") as fh:
        row = next(csv.DictReader(fh))
    assert 0.0 < float(row["rc_s"]) <= 1.0
    assert float(row["rc_t"]) >= 0.0


def test_batch_empty_manifest(tmp_path, cfg_file):
    manifest = tmp_path / "manifest.csv"
    write_manifest(manifest, [])
    assert run("batch", "--config", cfg_file, "--manifest", manifest,
               "--out", tmp_path / "s.csv") == 2


# ---------------------------------------------------------------- corrupt


def make_sample_dir(tmp_path, n_frames=8, name="sample"):
    frames, masks = synthetic.make_drifting_video(7, n_frames=n_frames, h=48, w=48)
    base = tmp_path / name
    fileio.write_frames(base / "input", frames)
    fileio.write_masks(base / "mask", masks)
    return base, frames, masks


def test_corrupt_drop_writes_nested_levels(tmp_path):
    src, frames, _ = make_sample_dir(tmp_path)
    out = tmp_path / "out"
    assert run("corrupt", "--kind", "drop", "--seed", 3, "--levels", "1,2",
               "--in", src, "--out", out) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert plan["kind"] == "drop" and plan["levels"] == [1, 2]
    assert set(plan["selected"]["1"]) <= set(plan["selected"]["2"])
    assert 0 not in plan["selected"]["2"] and len(frames) - 1 not in plan["selected"]["2"]
    assert len(fileio.read_frames(out / "level_1" / "input")) == len(frames) - 1
    assert len(fileio.read_frames(out / "level_2" / "input")) == len(frames) - 2
    assert len(fileio.read_masks(out / "level_2" / "mask")) == len(frames) - 2


def test_corrupt_is_deterministic(tmp_path):
    src, _, _ = make_sample_dir(tmp_path)
    outs = [tmp_path / "out_a", tmp_path / "out_b"]
    for out in outs:
        assert run("corrupt", "--kind", "replace", "--seed", 11, "--levels", "2",
                   "--in", src, "--out", out) == 0
    assert (outs[0] / "plan.json").read_bytes() == (outs[1] / "plan.json").read_bytes()
    for name in ("00000.png", "00003.png"):
        assert ((outs[0] / "level_2" / "input" / name).read_bytes()
                == (outs[1] / "level_2" / "input" / name).read_bytes())


def test_corrupt_mask_blur_touches_only_masked_pixels(tmp_path):
    src, frames, masks = make_sample_dir(tmp_path)
    out = tmp_path / "out"
    assert run("corrupt", "--kind", "mask-blur", "--seed", 5, "--levels", "3",
               "--in", src, "--out", out) == 0
    got_frames = fileio.read_frames(out / "level_3" / "input")
    got_masks = fileio.read_masks(out / "level_3" / "mask")
    assert len(got_frames) == len(frames)
    for orig, got, mask in zip(frames, got_frames, got_masks):
        assert np.array_equal(orig[~mask], got[~mask])
    for orig, got in zip(masks, got_masks):
        assert np.array_equal(orig, got)


def test_corrupt_rejects_unknown_kind(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("corrupt", "--kind", "melt", "--levels", "1",
            "--in", tmp_path, "--out", tmp_path / "o")
    assert exc.value.code == 2


def test_corrupt_bad_levels_value(tmp_path):
    src, _, _ = make_sample_dir(tmp_path)
    assert run("corrupt", "--kind", "drop", "--levels", "two",
               "--in", src, "--out", tmp_path / "o") == 2


# -------------------------------------------------------------- sweep-blur


def test_sweep_blur_reports_each_sigma(tmp_path, cfg_file, scene_files):
    img, mask = scene_files
    out = tmp_path / "sweep.json"
    assert run("sweep-blur", "--config", cfg_file, "--image", img, "--mask", mask,
               "--sigmas", "0,2", "--out", out) == 0
    payload = json.loads(out.read_text())
    assert [p["sigma"] for p in payload["sweep"]] == [0.0, 2.0]
    assert all(0.0 < p["rc_s_normalized"] <= 1.0 for p in payload["sweep"])
    assert payload["config"]["backend"] == "toy"


# --------------------------------------------------------------------- qc


def qc_sample(sid, with_artifact=False):
    h = w = 64
    gt = [np.full((h, w, 3), 128, np.uint8) for _ in range(2)]
    mask = np.zeros((h, w), bool)
    mask[8:24, 8:24] = True
    inputs = []
    for g in gt:
        frame = g.copy()
        frame[8:24, 8:24] = 228  # result differs from the plate exactly in-mask
        if with_artifact:
            frame[28:63, 20:60] = 0  # 35x40 stray blob outside the mask
        inputs.append(frame)
    return bench_qc.PairedSample(sid, inputs, gt, [mask.copy() for _ in gt])


def test_qc_writes_report_and_manifest(tmp_path, cfg_file):
    root = tmp_path / "data"
    for sample in (qc_sample("ok1"), qc_sample("ok2"), qc_sample("bad", True)):
        fileio.save_sample(root, sample)
    out = tmp_path / "qc.json"
    assert run("qc", "--config", cfg_file, "--root", root, "--keep", "1.0",
               "--report", out) == 0
    payload = json.loads(out.read_text())
    assert payload["manifest"] == ["ok1", "ok2"]
    bad = next(r for r in payload["samples"] if r["id"] == "bad")
    assert bad["stage2_passed"] is False and bad["max_artifact_area"] == 35 * 40
    assert payload["config"]["backend"] == "toy"


def test_qc_empty_root(tmp_path, cfg_file):
    root = tmp_path / "empty"
    root.mkdir()
    assert run("qc", "--config", cfg_file, "--root", root,
               "--report", tmp_path / "qc.json") == 2


# ---------------------------------------------------------------- augment


def augment_source(tmp_path, n_frames=10):
    frames, masks = synthetic.make_drifting_video(9, n_frames=n_frames, h=64, w=64)
    sample = bench_qc.PairedSample(
        "clip", [f.copy() for f in frames], frames, masks
    )
    root = tmp_path / "src"
    return fileio.save_sample(root, sample)


def test_augment_zoom_roundtrip(tmp_path):
    src = augment_source(tmp_path)
    out = tmp_path / "aug"
    assert run("augment", "--style", "zoom", "--seed", 4, "--in", src,
               "--out", out) == 0
    sample = fileio.load_sample(out, "clip")
    assert sample.n_frames == 10
    assert sample.meta["kenburns"] == {"style": "zoom", "seed": 4}


def test_augment_is_deterministic(tmp_path):
    src = augment_source(tmp_path)
    outs = [tmp_path / "aug_a", tmp_path / "aug_b"]
    for out in outs:
        assert run("augment", "--style", "shake", "--seed", 2, "--in", src,
                   "--out", out) == 0
    for name in ("00000.png", "00007.png"):
        assert ((outs[0] / "clip" / "input" / name).read_bytes()
                == (outs[1] / "clip" / "input" / name).read_bytes())


def test_augment_follow_uses_mask_centroids(tmp_path):
    src = augment_source(tmp_path)
    assert run("augment", "--style", "follow", "--seed", 1, "--in", src,
               "--out", tmp_path / "aug") == 0


def test_augment_frame_count_mismatch(tmp_path):
    src = augment_source(tmp_path, n_frames=6)
    assert run("augment", "--style", "zoom", "--frames", 81, "--in", src,
               "--out", tmp_path / "aug") == 2


# -------------------------------------------------------------- correlate


def test_correlate_perfect_agreement(tmp_path):
    scores = tmp_path / "scores.csv"
    scores.write_text(
        "item,method,score\n"
        "a,m1,0.9\na,m2,0.5\na,m3,0.1\n"
        "b,m1,0.8\nb,m2,0.6\nb,m3,0.2\n"
    )
    rankings = tmp_path / "rank.csv"
    lines = ["item,rater,method,rank"]
    for item in ("a", "b"):
        for rater in ("r1", "r2"):
            for rank, method in enumerate(("m1", "m2", "m3"), start=1):
                lines.append(f"{item},{rater},{method},{rank}")
    rankings.write_text("\n".join(lines) + "\n")
    out = tmp_path / "corr.json"
    assert run("correlate", "--scores", scores, "--rankings", rankings,
               "--higher-is-better", "--out", out) == 0
    payload = json.loads(out.read_text())
    assert payload["tau"] == 1.0
    assert payload["mean_rho"] == 1.0
    assert payload["n_items"] == 2 and payload["n_raters"] == 2


def test_correlate_reads_batch_column(tmp_path, cfg_file):
    entries = []
    for i, fill in enumerate(("coherent", "noise")):
        frame, mask = synthetic.make_scene(20 + i, h=64, w=64, fill=fill)
        img, msk = tmp_path / f"r{i}.png", tmp_path / f"m{i}.png"
        fileio.write_image(img, frame)
        fileio.write_mask(msk, mask)
        entries.append(("itemA", f"m{i}", img, msk))
    manifest = tmp_path / "manifest.csv"
    write_manifest(manifest, entries)
    batch_csv = tmp_path / "scores.csv"
    assert run("batch", "--config", cfg_file, "--manifest", manifest,
               "--out", batch_csv) == 0
    rankings = tmp_path / "rank.csv"
    rankings.write_text(
        "item,rater,method,rank\nitemA,r1,m0,1\nitemA,r1,m1,2\n"
    )
    out = tmp_path / "corr.json"
    assert run("correlate", "--scores", batch_csv, "--rankings", rankings,
               "--column", "rc_s", "--higher-is-better", "--out", out) == 0
    assert "tau" in json.loads(out.read_text())


# ------------------------------------------------------------ diagnostics


def test_spectra_identical_dirs_gives_zero_matrix(tmp_path, cfg_file):
    frames = [synthetic.make_texture(s, 16, 16) for s in range(3)]
    adir = tmp_path / "a"
    fileio.write_frames(adir, frames)
    out = tmp_path / "diff.csv"
    assert run("spectra", "--config", cfg_file, "--a", adir, "--b", adir,
               "--out", out) == 0
    with open(out, newline="") as fh:
        matrix = [[float(c) for c in row] for row in csv.reader(fh)]
    assert len(matrix) == 16 and len(matrix[0]) == 16
    assert all(v == 0.0 for row in matrix for v in row)


def test_fourier_sens_writes_grid(tmp_path, cfg_file):
    frames = [synthetic.make_texture(7, 32, 32)]
    fdir = tmp_path / "frames"
    fileio.write_frames(fdir, frames)
    out = tmp_path / "grid.csv"
    assert run("fourier-sens", "--config", cfg_file, "--frames", fdir,
               "--grid", 3, "--eps", 4.0, "--out", out) == 0
    with open(out, newline="") as fh:
        matrix = [[float(c) for c in row] for row in csv.reader(fh)]
    assert len(matrix) == 3 and len(matrix[0]) == 3
    assert all(v >= 0.0 for row in matrix for v in row)
