"""Segmentation quality metrics: Dice, APD, confusion-derived rates, and
mean(std) aggregation.

A predicted contour is rasterized with an even-odd scanline fill (pixel
centers on the polygon count as inside) and compared against the truth mask
over the full grid. APD is the symmetrized mean point-to-polyline distance
over 100 uniform-arclength resampled points, scaled by the pixel spacing.
Rates with a zero denominator are reported as None and excluded from
aggregates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateContour, EmptyList
from .poincare import resample_closed
from .validation import check_contour, check_mask, check_same_shape, check_spacing

GOOD_APD_MM = 5.0
APD_SAMPLES = 100


@dataclass
class MetricsReport:
    dice: float
    apd_mm: float
    good: bool
    sensitivity: float | None
    specificity: float | None
    ppv: float | None
    npv: float | None

    def as_dict(self):
        return {
            "dice": self.dice, "apd_mm": self.apd_mm, "good": self.good,
            "sensitivity": self.sensitivity, "specificity": self.specificity,
            "ppv": self.ppv, "npv": self.npv,
        }


def polygon_area(contour: np.ndarray) -> float:
    """Signed shoelace area; positive for counterclockwise in (x, y)."""
    c = np.asarray(contour, dtype=np.float64)
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def rasterize(contour, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill; pixel (i, j) is foreground iff its center lies
    inside the polygon or exactly on it."""
    c = check_contour(contour)
    if c.shape[0] < 3:
        raise DegenerateContour(f"polygon needs >= 3 vertices, got {c.shape[0]}")
    if abs(polygon_area(c)) < 1e-12:
        raise DegenerateContour("polygon has zero area")

    mask = np.zeros((height, width), dtype=np.uint8)
    x0s, y0s = c[:, 0], c[:, 1]
    x1s, y1s = np.roll(x0s, -1), np.roll(y0s, -1)

    for j in range(height):
        y = float(j)
        # half-open rule (ymin <= y < ymax) avoids double counting vertices
        lo = np.minimum(y0s, y1s)
        hi = np.maximum(y0s, y1s)
        hit = (lo <= y) & (y < hi)
        if hit.any():
            t = (y - y0s[hit]) / (y1s[hit] - y0s[hit])
            xs = np.sort(x0s[hit] + t * (x1s[hit] - x0s[hit]))
            for a, b in zip(xs[0::2], xs[1::2]):
                left = int(np.ceil(a))
                right = int(np.floor(b))
                if left <= right:
                    mask[j, max(left, 0):min(right, width - 1) + 1] = 1

    _mark_on_boundary(mask, c)
    return mask


def _mark_on_boundary(mask: np.ndarray, c: np.ndarray) -> None:
    """Set pixels whose center lies exactly on a polygon edge (within 1e-9)."""
    height, width = mask.shape
    n = c.shape[0]
    for k in range(n):
        x0, y0 = c[k]
        x1, y1 = c[(k + 1) % n]
        if abs(y1 - y0) < 1e-12:
            j = int(round(y0))
            if abs(j - y0) < 1e-9 and 0 <= j < height:
                lo, hi = sorted((x0, x1))
                for i in range(max(int(np.ceil(lo - 1e-9)), 0),
                               min(int(np.floor(hi + 1e-9)), width - 1) + 1):
                    mask[j, i] = 1
        else:
            jlo = int(np.ceil(min(y0, y1) - 1e-9))
            jhi = int(np.floor(max(y0, y1) + 1e-9))
            for j in range(max(jlo, 0), min(jhi, height - 1) + 1):
                t = (j - y0) / (y1 - y0)
                if -1e-12 <= t <= 1.0 + 1e-12:
                    x = x0 + t * (x1 - x0)
                    i = int(round(x))
                    if abs(i - x) < 1e-9 and 0 <= i < width:
                        mask[j, i] = 1


def confusion(pred, truth):
    """(TP, FP, TN, FN) pixel counts over the full grid."""
    p = check_mask(pred).astype(bool)
    t = check_mask(truth).astype(bool)
    check_same_shape(p, t)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    tn = int(np.count_nonzero(~p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return tp, fp, tn, fn


def _ratio(num, den):
    return None if den == 0 else num / den


def dice(conf) -> float | None:
    tp, fp, _, fn = conf
    return _ratio(2 * tp, 2 * tp + fp + fn)


def sensitivity(conf) -> float | None:
    tp, _, _, fn = conf
    return _ratio(tp, tp + fn)


def specificity(conf) -> float | None:
    _, fp, tn, _ = conf
    return _ratio(tn, tn + fp)


def ppv(conf) -> float | None:
    tp, fp, _, _ = conf
    return _ratio(tp, tp + fp)


def npv(conf) -> float | None:
    _, _, tn, fn = conf
    return _ratio(tn, tn + fn)


def _point_polyline_dist(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Min distance from each point to any closed-polygon segment of poly."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a                                     # (M, 2)
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ab2 = np.where(ab2 < 1e-30, 1.0, ab2)
    ap = points[:, None, :] - a[None, :, :]        # (N, M, 2)
    t = np.clip(np.einsum("nmj,mj->nm", ap, ab) / ab2, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=-1)
    return d.min(axis=1)


def apd(contour_a, contour_b, spacing_mm: float = 1.0) -> float:
    """Symmetrized mean point-to-polyline distance in millimeters."""
    ca = check_contour(contour_a)
    cb = check_contour(contour_b)
    sp = check_spacing(spacing_mm)
    if ca.shape[0] < 3 or cb.shape[0] < 3:
        raise DegenerateContour("APD needs closed contours with >= 3 vertices")
    ra = resample_closed(ca, APD_SAMPLES)
    rb = resample_closed(cb, APD_SAMPLES)
    d_ab = _point_polyline_dist(ra, rb).mean()
    d_ba = _point_polyline_dist(rb, ra).mean()
    return sp * 0.5 * (d_ab + d_ba)


def evaluate_case(pred_contour, truth_mask, truth_contour,
                  spacing_mm: float = 1.0) -> MetricsReport:
    """Full per-case report from a predicted contour and the ground truth."""
    t = check_mask(truth_mask)
    h, w = t.shape
    pred_mask = rasterize(pred_contour, w, h)
    conf = confusion(pred_mask, t)
    apd_mm = apd(pred_contour, truth_contour, spacing_mm)
    return MetricsReport(
        dice=dice(conf), apd_mm=apd_mm, good=bool(apd_mm < GOOD_APD_MM),
        sensitivity=sensitivity(conf), specificity=specificity(conf),
        ppv=ppv(conf), npv=npv(conf),
    )


def aggregate(reports) -> dict:
    """Mean and population std per metric plus the good-contour rate (%).
    Undefined (None) entries are excluded per metric."""
    reports = list(reports)
    if not reports:
        raise EmptyList("no reports to aggregate")
    out = {}
    for key in ("dice", "apd_mm", "sensitivity", "specificity", "ppv", "npv"):
        vals = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        if vals:
            arr = np.asarray(vals, dtype=np.float64)
            out[key] = {"mean": float(arr.mean()), "std": float(arr.std())}
        else:
            out[key] = {"mean": None, "std": None}
    out["good_rate_pct"] = 100.0 * sum(r.good for r in reports) / len(reports)
    return out


def format_mean_std(mean: float, std: float, digits: int = 2) -> str:
    """Render as 'mean(std)', e.g. 0.92(0.02)."""
    return f"{mean:.{digits}f}({std:.{digits}f})"


def build_report(reports) -> dict:
    """JSON-ready report: per-case entries plus the aggregate block."""
    return {
        "cases": [r.as_dict() for r in reports],
        "aggregate": aggregate(reports),
    }
