import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mrflow.flow import FlowImage
from mrflow.noise import (
    DepthNoiseParams,
    FlowNoiseParams,
    MaskNoiseParams,
    NoiseConfig,
    binary_closing,
    depth_noise,
    flow_noise,
    mask_noise,
)


def reference_closing(mask, r):
    """Per-pixel dilation then erosion with a disk; out-of-image neighbours are skipped."""
    h, w = mask.shape
    offs = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dy * dy + dx * dx <= r * r]

    def sweep(img, combine):
        out = np.zeros_like(img)
        for y in range(h):
            for x in range(w):
                vals = [img[y + dy, x + dx] for dy, dx in offs if 0 <= y + dy < h and 0 <= x + dx < w]
                out[y, x] = combine(vals)
        return out

    return sweep(sweep(mask, any), all)


def reference_mask_noise(mask, params, seed):
    flips = np.random.default_rng(seed).random(mask.shape) < params.salt_pepper_rate
    noisy = mask ^ flips
    return reference_closing(noisy, params.closing_radius) if params.closing_radius > 0 else noisy


def test_depth_zero_params_identity(rng):
    d = rng.uniform(0.5, 3, size=(20, 30))
    np.testing.assert_array_equal(depth_noise(d, DepthNoiseParams(0.0, 8, 0.0), 1), d)


def test_depth_std_monte_carlo():
    d = np.full((480, 640), 2.0)
    out = depth_noise(d, DepthNoiseParams(0.005, 8, 1e9), 7)
    assert abs((out - d).std() / (0.005 / 8) - 1) < 0.15


def test_depth_gamma_mean_one():
    d = np.full((480, 640), 2.0)
    out = depth_noise(d, DepthNoiseParams(0.0, 8, 1000.0), 3)
    ratio = out / d
    assert abs(ratio.mean() - 1) < 1e-3
    assert abs(ratio.std() - 1 / np.sqrt(1000)) < 2e-3


@given(arrays(float, (12, 12), elements=st.sampled_from([0.0, 0.7, 2.5])),
       st.floats(0, 0.05), st.integers(0, 10), st.sampled_from([0.0, 10.0, 1000.0]), st.integers(0, 2**32))
def test_depth_zero_stays_zero(d, sigma, scale, k, seed):
    out = depth_noise(d, DepthNoiseParams(sigma, scale, k), seed)
    assert out.shape == d.shape
    assert np.all(out[d == 0] == 0)
    assert np.all(out >= 0)


def test_depth_deterministic_and_independent():
    d = np.full((240, 320), 1.0)
    p = DepthNoiseParams(0.005, 1, 0.0)
    a, b, c = depth_noise(d, p, 1), depth_noise(d, p, 1), depth_noise(d, p, 2)
    np.testing.assert_array_equal(a, b)
    assert abs(np.corrcoef((a - 1).ravel(), (c - 1).ravel())[0, 1]) < 0.05


def test_mask_identity(rng):
    m = rng.random((30, 30)) < 0.5
    np.testing.assert_array_equal(mask_noise(m, MaskNoiseParams(0.0, 0), 4), m)


@pytest.mark.parametrize("radius", [0, 1, 2, 3])
def test_mask_matches_reference(radius):
    rng = np.random.default_rng(radius)
    for seed in range(6):
        m = np.zeros((24, 32), bool)
        m[4:18, 6:25] = True
        m[rng.random(m.shape) < 0.1] ^= True
        p = MaskNoiseParams(0.08, radius)
        np.testing.assert_array_equal(mask_noise(m, p, seed), reference_mask_noise(m, p, seed))


def test_isolated_pepper_filled():
    m = np.ones((20, 20), bool)
    m[5, 5] = m[12, 14] = False
    assert binary_closing(m, 1).all()


def test_full_mask_stays_full():
    m = np.ones((48, 64), bool)
    for seed in range(30):
        assert mask_noise(m, MaskNoiseParams(0.05, 2), seed).all()


def test_mask_params_validation():
    with pytest.raises(ValueError):
        MaskNoiseParams(0.6, 1)
    with pytest.raises(ValueError):
        MaskNoiseParams(0.1, -1)
    with pytest.raises(ValueError):
        DepthNoiseParams(-1.0)
    with pytest.raises(ValueError):
        FlowNoiseParams(0.0, -0.1)


def test_flow_identity_and_support(rng):
    data = np.zeros((40, 50, 3))
    sup = np.zeros((40, 50), bool)
    sup[10:20, 10:30] = True
    data[sup] = rng.normal(size=(sup.sum(), 3))
    f = FlowImage(data, sup)
    same = flow_noise(f, FlowNoiseParams(), 0)
    np.testing.assert_array_equal(same.data, data)
    noisy = flow_noise(f, FlowNoiseParams(0.01, 0.02), 0)
    assert not noisy.data[~sup].any()
    np.testing.assert_array_equal(noisy.support, sup)


def test_flow_per_pixel_std():
    sup = np.ones((400, 300), bool)
    f = FlowImage(np.zeros((400, 300, 3)), sup)
    out = flow_noise(f, FlowNoiseParams(0.005, 0.0), 11)
    for c in range(3):
        assert abs(out.data[..., c].std() / 0.005 - 1) < 0.05


def test_flow_bias_shared():
    sup = np.ones((10, 10), bool)
    out = flow_noise(FlowImage(np.zeros((10, 10, 3)), sup), FlowNoiseParams(0.0, 0.1), 5)
    v = out.data.reshape(-1, 3)
    assert np.all(v == v[0]) and np.any(v[0] != 0)


def test_noise_config_roundtrip():
    cfg = NoiseConfig(DepthNoiseParams(0.003, 8, 0.0), MaskNoiseParams(0.01, 1), FlowNoiseParams(0.005), seed=3)
    assert NoiseConfig.from_dict(cfg.to_dict()) == cfg
    assert NoiseConfig().is_zero and not cfg.is_zero
    assert NoiseConfig(DepthNoiseParams(0.0, 8, 0.0)).is_zero
    with pytest.raises(ValueError):
        NoiseConfig.from_dict({"depht": {}})
