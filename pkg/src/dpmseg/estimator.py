"""Estimator-style wrapper around the train/segment pipeline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import agent, metrics, model, patches
from .validation import check_image, check_mask, check_same_shape


class DeepPoincareSegmenter(BaseEstimator):
    """Learns a patch-to-displacement policy and segments by limit-cycle rollout.

    fit() builds the attraction dynamic for every training mask, samples
    oriented patches near the boundary, and trains the policy CNN.  predict()
    drops an agent at a seed point in each image and integrates the learned
    displacement field until the Poincare return map settles, then rasterizes
    the recovered cycle back into a mask.

    Parameters follow the library defaults; see RunConfig for the full story.
    """

    def __init__(self, patch_size=64, step=2.0, rho=0.05, band_px=32.0,
                 offsets_deg=(45.0, -45.0), arch=model.DEFAULT_ARCH,
                 epochs=10, batch=64, lr=1e-3, warmup=200, eps=2.0,
                 consecutive=2, max_steps=4000, cycle_points=200,
                 random_state=0):
        self.patch_size = patch_size
        self.step = step
        self.rho = rho
        self.band_px = band_px
        self.offsets_deg = offsets_deg
        self.arch = arch
        self.epochs = epochs
        self.batch = batch
        self.lr = lr
        self.warmup = warmup
        self.eps = eps
        self.consecutive = consecutive
        self.max_steps = max_steps
        self.cycle_points = cycle_points
        self.random_state = random_state

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predict")

    def fit(self, images, masks):
        pairs = []
        for img, m in zip(images, masks):
            img = check_image(np.asarray(img))
            m = check_mask(np.asarray(m))
            check_same_shape(img, m)
            pairs.append((img, m))
        dcfg = patches.DatasetConfig(
            rho=self.rho, band_px=self.band_px, offsets_deg=tuple(self.offsets_deg),
            step=self.step, patch_size=self.patch_size, seed=self.random_state)
        ds = patches.build_dataset(pairs, dcfg)
        tcfg = model.TrainConfig(
            epochs=self.epochs, batch=self.batch, lr=self.lr,
            seed=self.random_state, arch=tuple(self.arch),
            init_seed=self.random_state)
        self.model_, self.history_ = model.train(ds, tcfg)
        self.n_samples_ = len(ds)
        return self

    def predict_contour(self, image, seed=None, heading=None):
        """Segment one image, returning the closed contour as an (M, 2) array."""
        self._check_fitted()
        img = check_image(np.asarray(image))
        h, w = img.shape
        if seed is None:
            seed = ((w - 1) / 2.0, (h - 1) / 2.0)
        rng = np.random.default_rng(self.random_state)
        state = agent.init_state(seed, img.shape, seed_heading=heading, rng=rng,
                                 patch_size=self.patch_size)
        policy = agent.LearnedPolicy(self.model_)
        scfg = agent.StepConfig(step=self.step, patch_size=self.patch_size)
        pcfg = agent.StopConfig(warmup=self.warmup, eps=self.eps,
                                consecutive=self.consecutive,
                                max_steps=self.max_steps,
                                cycle_points=self.cycle_points)
        _, contour, _, _ = agent.rollout(policy, img, state, pcfg, scfg)
        return contour

    def predict(self, images, seeds=None):
        """Segment each image; returns a list of uint8 masks."""
        self._check_fitted()
        out = []
        for i, img in enumerate(images):
            img = np.asarray(img)
            seed = None if seeds is None else seeds[i]
            contour = self.predict_contour(img, seed=seed)
            h, w = img.shape
            out.append(metrics.rasterize(contour, w, h))
        return out

    def score(self, images, masks, seeds=None):
        """Mean Dice of predictions against the given masks."""
        preds = self.predict(images, seeds=seeds)
        vals = []
        for pred, m in zip(preds, masks):
            m = check_mask(np.asarray(m))
            c = metrics.confusion(pred, m)
            d = metrics.dice(c)
            if d is not None:
                vals.append(d)
        return float(np.mean(vals))
