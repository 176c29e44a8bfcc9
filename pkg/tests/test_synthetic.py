import numpy as np

from removal_coherence import synthetic


def test_texture_deterministic_and_shaped():
    a = synthetic.make_texture(5, 48, 64)
    b = synthetic.make_texture(5, 48, 64)
    c = synthetic.make_texture(6, 48, 64)
    assert a.shape == (48, 64, 3) and a.dtype == np.uint8
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_texture_is_spatially_smooth():
    t = synthetic.make_texture(1, 64, 64).astype(np.int32)
    dx = np.abs(np.diff(t, axis=1)).mean()
    rng = np.random.default_rng(1)
    iid = rng.integers(0, 256, (64, 64, 3)).astype(np.int32)
    assert dx < np.abs(np.diff(iid, axis=1)).mean() / 2


def test_scene_fills():
    img_c, mask = synthetic.make_scene(3, 96, 96, fill="coherent")
    img_n, mask2 = synthetic.make_scene(3, 96, 96, fill="noise")
    assert np.array_equal(mask, mask2)
    assert mask.any() and not mask.all()
    # same seed -> identical background outside the mask
    assert np.array_equal(img_c[~mask], img_n[~mask])
    assert not np.array_equal(img_c[mask], img_n[mask])
    # noise fill has much stronger local gradients inside the mask
    inside = lambda im: np.abs(
        np.diff(im.astype(np.int32), axis=1)
    )[mask[:, 1:]].mean()
    assert inside(img_n) > 2 * inside(img_c)


def test_scene_untouched_fill():
    img, mask = synthetic.make_scene(9, 64, 64, fill="none")
    base = synthetic.make_texture(9, 64, 64)
    assert np.array_equal(img, base)
    assert mask.any()


def test_drifting_video():
    frames, masks = synthetic.make_drifting_video(2, n_frames=6, h=48, w=48)
    assert len(frames) == 6 and len(masks) == 6
    assert all(np.array_equal(masks[0], m) for m in masks)
    assert not np.array_equal(frames[0], frames[1])
    # drift is a roll: frame 1 equals frame 0 shifted by the drift step
    assert np.array_equal(frames[1], np.roll(frames[0], 2, axis=1))


def test_static_video():
    frames, masks = synthetic.make_drifting_video(4, n_frames=4, h=32, w=32,
                                                  drift=0)
    assert all(np.array_equal(frames[0], f) for f in frames)


def test_drifting_video_contrast_compresses_range():
    full, _ = synthetic.make_drifting_video(3, n_frames=1)
    soft, _ = synthetic.make_drifting_video(3, n_frames=1, contrast=0.25)
    assert np.ptp(soft[0]) < np.ptp(full[0]) / 2
    # contrast 1 is the identity, not a float round trip
    again, _ = synthetic.make_drifting_video(3, n_frames=1, contrast=1.0)
    assert np.array_equal(full[0], again[0])
