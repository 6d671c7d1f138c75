import numpy as np
import pytest

import oracles
from dpmseg import synth
from dpmseg.errors import SpecInfeasible
from dpmseg.synth import (ShapeSpec, blob_polygon, gen_dataset, gen_mask,
                          gen_pair, render_image)


def circle_spec(**kw):
    base = dict(family="circle", size_range=(50.0, 50.0), center_jitter=0.0,
                seed=0)
    base.update(kw)
    return ShapeSpec(**base)


# --- masks ------------------------------------------------------------------

def test_circle_mask_area():
    mask = gen_mask(circle_spec(), np.random.default_rng(0))
    area = int(mask.sum())
    assert abs(area - np.pi * 50.0 ** 2) <= 0.01 * np.pi * 50.0 ** 2


def test_zero_amplitude_blob_is_circle():
    seed_rng = lambda: np.random.default_rng(5)
    blob = gen_mask(ShapeSpec(family="blob", amplitude=0.0, seed=3,
                              size_range=(40.0, 40.0), center_jitter=0.0),
                    seed_rng())
    circ = gen_mask(ShapeSpec(family="circle", seed=3,
                              size_range=(40.0, 40.0), center_jitter=0.0),
                    seed_rng())
    assert np.array_equal(blob, circ)


def test_mask_is_binary_and_two_class():
    for i in range(5):
        _, mask = gen_pair(ShapeSpec(seed=9), i)
        assert mask.dtype == np.uint8
        assert set(np.unique(mask)) == {0, 1}
        assert 0 < mask.sum() < mask.size


def test_mask_respects_margin():
    spec = ShapeSpec(seed=2)
    for i in range(5):
        _, mask = gen_pair(spec, i)
        ys, xs = np.nonzero(mask)
        m = spec.margin
        n = spec.image_size
        assert xs.min() >= m and xs.max() <= n - 1 - m
        assert ys.min() >= m and ys.max() <= n - 1 - m


def test_ellipse_family():
    spec = ShapeSpec(family="ellipse", seed=6)
    _, mask = gen_pair(spec, 0)
    assert 0 < mask.sum() < mask.size


# --- determinism ------------------------------------------------------------

def test_gen_pair_deterministic_bytes():
    spec = ShapeSpec(seed=11)
    i1, m1 = gen_pair(spec, 4)
    i2, m2 = gen_pair(ShapeSpec(seed=11), 4)
    assert i1.tobytes() == i2.tobytes()
    assert m1.tobytes() == m2.tobytes()


def test_gen_pair_index_independent():
    spec = ShapeSpec(seed=11)
    m4 = gen_pair(spec, 4)[1]
    # drawing other indices first must not disturb index 4
    for i in (0, 1, 2):
        gen_pair(spec, i)
    assert np.array_equal(gen_pair(spec, 4)[1], m4)


def test_gen_dataset_count_and_determinism():
    spec = ShapeSpec(seed=13)
    a = gen_dataset(3, spec)
    b = gen_dataset(3, ShapeSpec(seed=13))
    assert len(a) == 3
    for (ia, ma), (ib, mb) in zip(a, b):
        assert np.array_equal(ia, ib) and np.array_equal(ma, mb)


def test_gen_dataset_rejects_zero():
    with pytest.raises(SpecInfeasible):
        gen_dataset(0, ShapeSpec())


def test_different_indices_differ():
    spec = ShapeSpec(seed=1)
    assert not np.array_equal(gen_pair(spec, 0)[1], gen_pair(spec, 1)[1])


# --- render_image -----------------------------------------------------------

def test_render_range_and_contrast():
    img, mask = gen_pair(ShapeSpec(seed=21), 0)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert img[mask == 1].mean() > img[mask == 0].mean() + 0.3


def test_render_noiseless_two_level():
    spec = ShapeSpec(seed=22, noise_sigma=0.0, blur_sigma=0.0)
    img, mask = gen_pair(spec, 0)
    vals = set(np.unique(img))
    assert vals == {spec.bg_mean, spec.fg_mean}
    assert np.array_equal(img == spec.fg_mean, mask.astype(bool))


# --- spec validation --------------------------------------------------------

def test_validate_rejects_oversized_shape():
    with pytest.raises(SpecInfeasible):
        ShapeSpec(size_range=(30.0, 90.0)).validate()


def test_validate_rejects_amplitude():
    with pytest.raises(SpecInfeasible):
        ShapeSpec(amplitude=0.5).validate()


def test_validate_rejects_unknown_family():
    with pytest.raises(SpecInfeasible):
        ShapeSpec(family="torus").validate()


def test_validate_rejects_bad_means():
    with pytest.raises(SpecInfeasible):
        ShapeSpec(fg_mean=1.5).validate()


# --- blob_polygon -----------------------------------------------------------

def test_polygon_matches_mask_rasterization():
    from dpmseg import metrics
    spec = ShapeSpec(seed=31)
    for i in range(4):
        _, mask = gen_pair(spec, i)
        poly = blob_polygon(spec, i)
        pred = metrics.rasterize(poly, spec.image_size, spec.image_size)
        assert metrics.dice(metrics.confusion(pred, mask)) >= 0.995


def test_polygon_simple_closed_curve():
    for seed in range(20):
        poly = blob_polygon(ShapeSpec(seed=seed, amplitude=0.35), 0,
                            samples=240)
        assert not oracles.segments_self_intersect(poly)


def test_polygon_ellipse_family():
    spec = ShapeSpec(family="ellipse", seed=6)
    from dpmseg import metrics
    _, mask = gen_pair(spec, 0)
    poly = blob_polygon(spec, 0)
    pred = metrics.rasterize(poly, spec.image_size, spec.image_size)
    assert metrics.dice(metrics.confusion(pred, mask)) >= 0.995
