"""Input validation helpers.

All public entry points funnel raw arrays through these checks so the rest of
the code can assume: masks are uint8 {0,1} (H, W), images are float64 in
[0, 1] (H, W). Coordinates are (x, y) with x = column, y = row; arrays are
indexed [y, x].
"""
from __future__ import annotations

import numpy as np

from .errors import AllBackground, AllForeground, DimensionMismatch


def check_mask(mask) -> np.ndarray:
    """Validate and normalize a binary mask to uint8 {0,1}."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    vals = np.unique(m)
    if not np.isin(vals, (0, 1)).all():
        raise ValueError(f"mask values must be 0/1, got {vals[:8]}")
    return m.astype(np.uint8, copy=False)


def check_two_class(mask: np.ndarray) -> np.ndarray:
    """Mask must contain at least one foreground and one background pixel."""
    m = check_mask(mask)
    if not m.any():
        raise AllBackground("mask has no foreground pixels")
    if m.all():
        raise AllForeground("mask has no background pixels")
    return m


def check_image(img) -> np.ndarray:
    """Validate a grayscale image: 2-D, finite, intensities in [0, 1]."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("image contains non-finite values")
    if a.min() < 0.0 or a.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    return a


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")


def check_spacing(spacing_mm: float) -> float:
    s = float(spacing_mm)
    if not np.isfinite(s) or s <= 0:
        raise ValueError(f"spacing_mm must be > 0, got {spacing_mm}")
    return s


def check_contour(contour) -> np.ndarray:
    """Validate a contour as an (N, 2) float array of (x, y) vertices."""
    c = np.asarray(contour, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 2:
        raise ValueError(f"contour must be (N, 2), got shape {c.shape}")
    if not np.isfinite(c).all():
        raise ValueError("contour contains non-finite vertices")
    return c
