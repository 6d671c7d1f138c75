import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dpmseg import metrics, synth
from dpmseg.estimator import DeepPoincareSegmenter


def small_corpus(seed, n):
    spec = synth.ShapeSpec(seed=seed)
    pairs = [synth.gen_pair(spec, i) for i in range(n)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def centroid(mask):
    ys, xs = np.nonzero(mask)
    return float(xs.mean()), float(ys.mean())


@pytest.fixture(scope="module")
def fitted():
    images, masks = small_corpus(seed=55, n=4)
    est = DeepPoincareSegmenter(rho=0.05, band_px=3.0, epochs=3,
                                random_state=7)
    est.fit(images, masks)
    return est, images, masks


def test_get_set_params_round_trip():
    est = DeepPoincareSegmenter()
    params = est.get_params()
    assert params["patch_size"] == 64
    assert params["eps"] == 2.0
    est.set_params(epochs=1, rho=0.1)
    assert est.epochs == 1 and est.rho == 0.1


def test_clone_preserves_params():
    est = DeepPoincareSegmenter(epochs=2, band_px=5.0)
    dup = clone(est)
    assert dup.get_params() == est.get_params()


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        DeepPoincareSegmenter().predict_contour(np.zeros((256, 256)))


def test_fit_sets_state(fitted):
    est, _, _ = fitted
    assert est.n_samples_ > 100
    assert len(est.history_) == 3
    assert est.history_[-1] < est.history_[0]


def test_predict_contour_matches_truth(fitted):
    est, images, masks = fitted
    contour = est.predict_contour(images[0], seed=centroid(masks[0]))
    assert contour.shape == (est.cycle_points, 2)
    pred = metrics.rasterize(contour, 256, 256)
    assert metrics.dice(metrics.confusion(pred, masks[0])) >= 0.9


def test_predict_returns_masks(fitted):
    est, images, masks = fitted
    preds = est.predict(images[:2], seeds=[centroid(m) for m in masks[:2]])
    assert len(preds) == 2
    for p in preds:
        assert p.shape == (256, 256) and p.dtype == np.uint8
        assert set(np.unique(p)) <= {0, 1}


def test_predict_default_seed_is_center(fitted):
    est, images, masks = fitted
    # generator jitter keeps the image center inside the object
    contour = est.predict_contour(images[1])
    pred = metrics.rasterize(contour, 256, 256)
    assert metrics.dice(metrics.confusion(pred, masks[1])) >= 0.9


def test_score_is_mean_dice(fitted):
    est, images, masks = fitted
    seeds = [centroid(m) for m in masks[:2]]
    s = est.score(images[:2], masks[:2], seeds=seeds)
    assert 0.9 <= s <= 1.0


def test_fit_deterministic():
    images, masks = small_corpus(seed=56, n=2)
    kw = dict(rho=0.03, band_px=3.0, epochs=1, random_state=3)
    a = DeepPoincareSegmenter(**kw).fit(images, masks)
    b = DeepPoincareSegmenter(**kw).fit(images, masks)
    assert a.history_ == b.history_
    for p, q in zip(a.model_.params, b.model_.params):
        assert np.array_equal(p, q)
