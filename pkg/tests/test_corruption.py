import numpy as np
import pytest

from removal_coherence import corruption, rc_core
from removal_coherence.config import RunConfig
from removal_coherence.errors import LevelTooLarge, NoDonorAvailable
from removal_coherence.features import BackendSpec, make_backend


def indexed_frames(t, size=24):
    """Frames whose every pixel equals the frame index, for provenance checks."""
    frames = [np.full((size, size, 3), i, dtype=np.uint8) for i in range(t)]
    masks = [np.zeros((size, size), dtype=bool) for _ in range(t)]
    for m in masks:
        m[8:16, 8:16] = True
    return frames, masks


# -------------------------------------------------------------------- plans

def test_plan_deterministic():
    a = corruption.plan_corruption("drop", 123, 40, [2, 4, 8])
    b = corruption.plan_corruption("drop", 123, 40, [2, 4, 8])
    assert a.selected == b.selected
    c = corruption.plan_corruption("drop", 124, 40, [2, 4, 8])
    assert a.selected != c.selected


def test_plan_levels_nest():
    plan = corruption.plan_corruption("replace", 7, 60, [2, 4, 8, 16])
    prev = set()
    for level in (2, 4, 8, 16):
        cur = set(plan.selected[level])
        assert len(cur) == level
        assert prev < cur
        prev = cur


def test_plan_is_prefix_stable_across_level_lists():
    a = corruption.plan_corruption("drop", 5, 40, [2, 8])
    b = corruption.plan_corruption("drop", 5, 40, [2, 4, 8])
    assert a.selected[2] == b.selected[2]
    assert a.selected[8] == b.selected[8]


def test_plan_drop_never_selects_endpoints():
    for seed in range(30):
        plan = corruption.plan_corruption("drop", seed, 12, [10])
        sel = plan.selected[10]
        assert 0 not in sel and 11 not in sel


def test_plan_drop_level_too_large():
    # 12 frames leave 10 droppable interior frames
    with pytest.raises(LevelTooLarge):
        corruption.plan_corruption("drop", 0, 12, [11])


def test_plan_rejects_bad_arguments():
    with pytest.raises(ValueError):
        corruption.plan_corruption("melt", 0, 10, [2])
    with pytest.raises(ValueError):
        corruption.plan_corruption("drop", 0, 10, [])
    with pytest.raises(ValueError):
        corruption.plan_corruption("drop", 0, 10, [0, 2])


# --------------------------------------------------------------------- drop

def test_drop_shortens_and_keeps_endpoints():
    frames, masks = indexed_frames(10)
    plan = corruption.plan_corruption("drop", 3, 10, [8])
    out_f, out_m = corruption.apply_drop(frames, masks, plan, 8)
    assert len(out_f) == len(out_m) == 2
    assert out_f[0][0, 0, 0] == 0 and out_f[1][0, 0, 0] == 9


def test_drop_preserves_order():
    frames, masks = indexed_frames(20)
    plan = corruption.plan_corruption("drop", 9, 20, [5])
    out_f, _ = corruption.apply_drop(frames, masks, plan, 5)
    vals = [int(f[0, 0, 0]) for f in out_f]
    assert vals == sorted(vals)
    assert len(vals) == 15


def test_apply_level_zero_is_identity():
    frames, masks = indexed_frames(6)
    plan = corruption.plan_corruption("drop", 1, 6, [2])
    out_f, out_m = corruption.apply_drop(frames, masks, plan, 0)
    assert len(out_f) == 6
    assert all(np.array_equal(a, b) for a, b in zip(out_f, frames))
    assert all(np.array_equal(a, b) for a, b in zip(out_m, masks))


# ------------------------------------------------------------------- replace

def test_replace_touches_exactly_level_frames():
    frames, masks = indexed_frames(81)
    plan = corruption.plan_corruption("replace", 11, 81, [5])
    out_f, out_m = corruption.apply_replace(frames, masks, plan, 5)
    assert len(out_f) == 81
    changed = [t for t in range(81) if out_f[t][0, 0, 0] != t]
    assert len(changed) == 5
    assert sorted(changed) == sorted(plan.selected[5])


def test_replace_respects_min_distance():
    frames, masks = indexed_frames(81)
    plan = corruption.plan_corruption("replace", 2, 81, [12])
    out_f, _ = corruption.apply_replace(frames, masks, plan, 12)
    for t in plan.selected[12]:
        donor = int(out_f[t][0, 0, 0])
        assert abs(donor - t) >= 81 // 4


def test_replace_donors_stable_across_levels():
    frames, masks = indexed_frames(40)
    plan = corruption.plan_corruption("replace", 6, 40, [3, 9])
    lo, _ = corruption.apply_replace(frames, masks, plan, 3)
    hi, _ = corruption.apply_replace(frames, masks, plan, 9)
    for t in plan.selected[3]:
        assert np.array_equal(lo[t], hi[t])


def test_replace_moves_masks_with_frames():
    frames, masks = indexed_frames(20)
    masks = [np.full((24, 24), False) for _ in range(20)]
    for i, m in enumerate(masks):
        m[0, i] = True  # unique mask per frame
    plan = corruption.plan_corruption("replace", 4, 20, [4])
    out_f, out_m = corruption.apply_replace(frames, masks, plan, 4)
    for t in plan.selected[4]:
        donor = int(out_f[t][0, 0, 0])
        assert out_m[t][0, donor]


def test_replace_no_donor():
    frames, masks = indexed_frames(4)
    plan = corruption.plan_corruption("replace", 0, 4, [1])
    with pytest.raises(NoDonorAvailable):
        corruption.apply_replace(frames, masks, plan, 1, min_distance=4)


# ----------------------------------------------------------------- mask blur

def textured_frames(t=6, size=48, seed=0):
    rng = np.random.default_rng(seed)
    frames = [rng.integers(0, 256, (size, size, 3), dtype=np.uint8) for _ in range(t)]
    mask = np.zeros((size, size), dtype=bool)
    mask[12:36, 12:36] = True
    return frames, [mask.copy() for _ in range(t)]


def test_mask_blur_only_touches_masked_pixels():
    frames, masks = textured_frames()
    plan = corruption.plan_corruption("mask_blur", 8, 6, [3])
    out = corruption.apply_mask_blur(frames, masks, plan, 3, sigma=2.0)
    for t in range(6):
        same = np.array_equal(out[t], frames[t])
        if t in plan.selected[3]:
            assert not same
            outside = ~masks[t]
            assert np.array_equal(out[t][outside], frames[t][outside])
        else:
            assert same


def test_mask_blur_constant_frame_unchanged():
    frames = [np.full((32, 32, 3), 77, dtype=np.uint8) for _ in range(3)]
    mask = np.zeros((32, 32), dtype=bool)
    mask[8:24, 8:24] = True
    plan = corruption.plan_corruption("mask_blur", 0, 3, [2])
    out = corruption.apply_mask_blur(frames, [mask] * 3, plan, 2, sigma=1.5)
    for a, b in zip(out, frames):
        assert np.array_equal(a, b)


def test_mask_blur_reduces_masked_variance():
    frames, masks = textured_frames(t=3, seed=5)
    plan = corruption.plan_corruption("mask_blur", 1, 3, [3])
    out = corruption.apply_mask_blur(frames, masks, plan, 3, sigma=0.5)
    for t in range(3):
        before = frames[t][masks[t]].astype(np.float64).var()
        after = out[t][masks[t]].astype(np.float64).var()
        assert after < before


def test_mask_blur_deterministic_bytes():
    frames, masks = textured_frames()
    plan = corruption.plan_corruption("mask_blur", 8, 6, [3])
    a = corruption.apply_mask_blur(frames, masks, plan, 3, sigma=2.0)
    b = corruption.apply_mask_blur(frames, masks, plan, 3, sigma=2.0)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))


def test_mask_blur_requires_positive_sigma():
    frames, masks = textured_frames(t=3)
    plan = corruption.plan_corruption("mask_blur", 0, 3, [1])
    with pytest.raises(ValueError):
        corruption.apply_mask_blur(frames, masks, plan, 1, sigma=0.0)


# -------------------------------------------------------------- blur sweep

def test_blur_sweep_requires_zero_baseline():
    with pytest.raises(ValueError):
        corruption.BlurSweep(sigmas=(1.0, 2.0))
    with pytest.raises(ValueError):
        corruption.BlurSweep(sigmas=(0.0, 2.0, 1.0))


def test_blur_sweep_first_point_is_unblurred_score():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (80, 80, 3), dtype=np.uint8)
    mask = np.zeros((80, 80), dtype=bool)
    mask[20:60, 20:60] = True
    cfg = RunConfig(backend="toy", input_resize=112, patch_stride=14)
    backend = make_backend(BackendSpec(kind="toy", input_resize=112, patch_stride=14))
    sweep = corruption.BlurSweep(sigmas=(0.0, 1.0, 3.0))
    rows = corruption.blur_sweep_rcs(img, mask, backend, cfg, sweep)
    assert [s for s, _ in rows] == [0.0, 1.0, 3.0]
    base = rc_core.rc_s(img, mask, backend, cfg)
    assert rows[0][1] == base.rc_s_normalized
