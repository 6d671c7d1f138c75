"""Synthetic (image, mask) generation: circles, ellipses, Fourier blobs.

Blobs are star-shaped radial functions r(phi) = r0 * (1 + sum_k a_k
sin(k*phi + psi_k)) with the total harmonic amplitude bounded, so the
boundary is always a simple closed curve and the induced field has a
well-defined limit cycle. All randomness flows through per-index derived
seeds, so (spec, n) fully determines every byte.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import SpecInfeasible

DEFAULT_IMAGE_SIZE = 256
DEFAULT_MARGIN = 40.0  # patch half-size + 8


@dataclass
class ShapeSpec:
    family: str = "blob"                 # circle | ellipse | blob
    size_range: tuple = (30.0, 48.0)     # base radius range, px
    harmonics: int = 4                   # blob harmonic count (k = 2..harmonics+1)
    amplitude: float = 0.25              # total |a_k| bound (<= 0.35)
    image_size: int = DEFAULT_IMAGE_SIZE
    fg_mean: float = 0.75
    bg_mean: float = 0.25
    noise_sigma: float = 0.03
    blur_sigma: float = 0.8
    center_jitter: float = 10.0          # max |center - image center|, px
    margin: float = DEFAULT_MARGIN
    seed: int = 0

    def validate(self):
        if self.family not in ("circle", "ellipse", "blob"):
            raise SpecInfeasible(f"unknown family {self.family!r}")
        if not (0.0 <= self.amplitude <= 0.35):
            raise SpecInfeasible("harmonic amplitude must lie in [0, 0.35]")
        if not (0.0 <= self.bg_mean <= 1.0 and 0.0 <= self.fg_mean <= 1.0):
            raise SpecInfeasible("intensity means must lie in [0, 1]")
        if self.noise_sigma < 0 or self.blur_sigma < 0:
            raise SpecInfeasible("sigmas must be >= 0")
        rmax = self.size_range[1] * (1.0 + self.amplitude)
        half = (self.image_size - 1) / 2.0
        if rmax + self.margin + self.center_jitter > half:
            raise SpecInfeasible(
                f"max radius {rmax:.1f} + margin {self.margin} + jitter "
                f"{self.center_jitter} exceeds half-size {half:.1f}")
        return self


def _radial_profile(spec: ShapeSpec, rng):
    """Base radius plus harmonic coefficients for one shape instance."""
    r0 = rng.uniform(*spec.size_range)
    if spec.family == "circle" or spec.harmonics == 0 or spec.amplitude == 0.0:
        return r0, np.zeros(0), np.zeros(0), np.zeros(2)
    ks = np.arange(2, 2 + spec.harmonics)
    raw = rng.uniform(-1.0, 1.0, size=spec.harmonics)
    total = rng.uniform(0.5, 1.0) * spec.amplitude
    denom = np.abs(raw).sum()
    amps = raw * (total / denom) if denom > 0 else raw * 0.0
    phases = rng.uniform(0.0, 2.0 * np.pi, size=spec.harmonics)
    return r0, amps, phases, ks


def gen_mask(spec: ShapeSpec, rng) -> np.ndarray:
    """Analytic rasterization: pixel centers inside the shape are foreground."""
    spec.validate()
    n = spec.image_size
    cx = (n - 1) / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter)
    cy = (n - 1) / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter)
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    dx, dy = xx - cx, yy - cy

    if spec.family == "ellipse":
        a = rng.uniform(*spec.size_range)
        b = a * rng.uniform(0.6, 1.0)
        ang = rng.uniform(0.0, np.pi)
        ca, sa = math.cos(ang), math.sin(ang)
        u = ca * dx + sa * dy
        v = -sa * dx + ca * dy
        inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    else:
        r0, amps, phases, ks = _radial_profile(spec, rng)
        rr = np.hypot(dx, dy)
        if amps.size:
            phi = np.arctan2(dy, dx)
            mod = np.zeros_like(phi)
            for a_k, psi, k in zip(amps, phases, ks):
                mod += a_k * np.sin(k * phi + psi)
            inside = rr <= r0 * (1.0 + mod)
        else:
            inside = rr <= r0
    return inside.astype(np.uint8)


def render_image(mask: np.ndarray, spec: ShapeSpec, rng) -> np.ndarray:
    """Two-level image + Gaussian noise, then Gaussian blur, clamped to [0,1]."""
    img = np.where(mask.astype(bool), spec.fg_mean, spec.bg_mean)
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    if spec.blur_sigma > 0:
        img = gaussian_filter(img, spec.blur_sigma)
    return np.clip(img, 0.0, 1.0)


def gen_pair(spec: ShapeSpec, index: int):
    """(image, mask) for one index; rng derived from (spec.seed, index)."""
    rng = np.random.default_rng([spec.seed, index])
    mask = gen_mask(spec, rng)
    img = render_image(mask, spec, rng)
    return img, mask


def gen_dataset(n: int, spec: ShapeSpec):
    """n deterministic (image, mask) pairs."""
    if n < 1:
        raise SpecInfeasible(f"need n >= 1 pairs, got {n}")
    spec.validate()
    return [gen_pair(spec, i) for i in range(n)]


def blob_polygon(spec: ShapeSpec, index: int, samples: int = 720) -> np.ndarray:
    """The analytic boundary polygon for a generated shape (test support)."""
    rng = np.random.default_rng([spec.seed, index])
    n = spec.image_size
    cx = (n - 1) / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter)
    cy = (n - 1) / 2.0 + rng.uniform(-spec.center_jitter, spec.center_jitter)
    if spec.family == "ellipse":
        a = rng.uniform(*spec.size_range)
        b = a * rng.uniform(0.6, 1.0)
        ang = rng.uniform(0.0, np.pi)
        t = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
        u, v = a * np.cos(t), b * np.sin(t)
        ca, sa = math.cos(ang), math.sin(ang)
        return np.stack([cx + ca * u - sa * v, cy + sa * u + ca * v], axis=-1)
    r0, amps, phases, ks = _radial_profile(spec, rng)
    phi = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    r = np.full_like(phi, r0)
    for a_k, psi, k in zip(amps, phases, ks):
        r += r0 * a_k * np.sin(k * phi + psi)
    return np.stack([cx + r * np.cos(phi), cy + r * np.sin(phi)], axis=-1)
