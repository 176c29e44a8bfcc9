import math

import cv2
import numpy as np
import pytest

from removal_coherence import diagnostics
from removal_coherence.errors import EmptyInput, InputError, ShapeMismatch
from removal_coherence.features import BackendSpec, make_backend


def textured(seed, h=64, w=64):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (h, w, 3), dtype=np.uint8)


def tiny_toy():
    return BackendSpec(kind="toy", input_resize=16, patch_stride=8)


# ------------------------------------------------------------ spectral diff

def test_spectral_diff_identical_is_zero():
    frames = [textured(i) for i in range(3)]
    m = diagnostics.spectral_diff(frames, [f.copy() for f in frames])
    assert m.n_frames == 3
    assert m.values.shape == (64, 64)
    assert np.all(m.values == 0.0)


def test_spectral_diff_antisymmetric():
    a = [textured(1), textured(2)]
    b = [textured(3), textured(4)]
    ab = diagnostics.spectral_diff(a, b).values
    ba = diagnostics.spectral_diff(b, a).values
    assert np.allclose(ab, -ba, atol=1e-12)


def test_spectral_diff_blur_suppresses_high_frequencies():
    a = [textured(7, 64, 64)]
    b = [cv2.GaussianBlur(a[0], (0, 0), 2.0)]
    d = diagnostics.spectral_diff(a, b).values
    yy, xx = np.mgrid[0:64, 0:64]
    r = np.hypot(yy - 32, xx - 32)
    high = d[r > 24]
    assert high.mean() > 0.5  # blur removed energy there
    assert abs(d[32, 32]) < 0.1  # DC barely moves


def test_spectral_diff_mean_of_identical_pairs():
    a, b = textured(5), textured(6)
    one = diagnostics.spectral_diff([a], [b]).values
    many = diagnostics.spectral_diff([a] * 4, [b] * 4).values
    assert np.allclose(one, many, atol=1e-12)


def test_spectral_diff_input_errors():
    with pytest.raises(EmptyInput):
        diagnostics.spectral_diff([], [])
    with pytest.raises(ShapeMismatch):
        diagnostics.spectral_diff([textured(1)], [textured(1), textured(2)])
    with pytest.raises(ShapeMismatch):
        diagnostics.spectral_diff([textured(1)], [textured(1, 32, 32)])


# ------------------------------------------------------- fourier sensitivity

def test_sensitivity_zero_epsilon_is_zero_grid():
    g = diagnostics.fourier_sensitivity(tiny_toy(), [textured(0, 32, 32)],
                                        grid=5, epsilon=0.0)
    assert g.values.shape == (5, 5)
    assert np.all(g.values == 0.0)
    assert g.epsilon == 0.0


def test_sensitivity_grid_is_31_by_default_and_centered():
    g = diagnostics.fourier_sensitivity(tiny_toy(), [textured(1, 32, 32)])
    assert g.grid_size == 31
    assert g.values.shape == (31, 31)
    assert g.freq_at(15, 15) == (0, 0)
    assert g.freq_at(15, 16) == (1, 0)
    assert g.freq_at(16, 15) == (0, 1)
    assert np.all(g.values >= 0.0)


def test_sensitivity_dc_closed_form_for_toy_backend():
    # a DC perturbation adds eps/sqrt(HW) to every pixel; the toy backend
    # shifts only its three mean channels by that constant, so the feature
    # delta has L2 norm (eps / sqrt(HW)) * sqrt(3 * H' * W')
    frame = textured(3, 32, 32)
    g = diagnostics.fourier_sensitivity(tiny_toy(), [frame], grid=3, epsilon=4.0)
    expected = (4.0 / math.sqrt(32 * 32)) * math.sqrt(3 * 2 * 2)
    assert g.values[1, 1] == pytest.approx(expected, rel=1e-3)


def test_sensitivity_negated_frequency_is_identical():
    g = diagnostics.fourier_sensitivity(tiny_toy(), [textured(9, 24, 24)],
                                        grid=5, epsilon=2.0)
    c = 2
    for v in range(-2, 3):
        for u in range(-2, 3):
            assert g.values[c + v, c + u] == pytest.approx(
                g.values[c - v, c - u], abs=1e-9
            )


def test_sensitivity_locally_linear_in_epsilon():
    # epsilon small enough to stay near-linear, large enough that float32
    # feature quantization does not drown the signal
    frame = textured(12, 32, 32)
    small = diagnostics.fourier_sensitivity(tiny_toy(), [frame], grid=3,
                                            epsilon=0.25)
    double = diagnostics.fourier_sensitivity(tiny_toy(), [frame], grid=3,
                                             epsilon=0.5)
    ratio = double.values / np.maximum(small.values, 1e-12)
    assert np.all(ratio < 2.1)
    assert np.all(ratio > 1.9)


def test_sensitivity_averages_over_frames():
    frames = [textured(20, 32, 32), textured(21, 32, 32)]
    both = diagnostics.fourier_sensitivity(tiny_toy(), frames, grid=3,
                                           epsilon=1.0)
    singles = [
        diagnostics.fourier_sensitivity(tiny_toy(), [f], grid=3, epsilon=1.0)
        for f in frames
    ]
    want = (singles[0].values + singles[1].values) / 2
    assert np.allclose(both.values, want, atol=1e-12)


def test_sensitivity_validation():
    with pytest.raises(EmptyInput):
        diagnostics.fourier_sensitivity(tiny_toy(), [], grid=3)
    with pytest.raises(InputError):
        diagnostics.fourier_sensitivity(tiny_toy(), [textured(0)], grid=4)
    with pytest.raises(InputError):
        diagnostics.fourier_sensitivity(tiny_toy(), [textured(0)], grid=3,
                                        epsilon=-1.0)
    with pytest.raises(ShapeMismatch):
        diagnostics.fourier_sensitivity(
            tiny_toy(), [textured(0, 32, 32), textured(0, 16, 16)], grid=3
        )
