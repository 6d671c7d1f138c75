"""Poincare section, first-return map magnitudes, and cycle extraction.

In 2-D the section is a ray anchored near the orbit interior. A trajectory
segment produces a crossing only when it passes the ray with positive
orientation (the sign of cross(direction, p - anchor) flips from negative to
non-negative), so each circulation yields at most one record and the return
map is single-valued. Convergence means the last k magnitudes |t_{i+1} - t_i|
all fell below eps; the limit cycle is then the trajectory slice between the
last two crossings.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCycle, InsufficientPrefix

# The warmup window must cover at least one full circulation at the default
# step length, else the anchor is the centroid of a boundary arc rather than
# an interior point and the ray can graze the cycle (two same-orientation
# crossings per lap whose t-params never settle). 200 steps of h=2 cover the
# perimeter of every shape family we generate.
DEFAULT_WARMUP = 200
DEFAULT_EPS = 2.0          # one step length
DEFAULT_CONSECUTIVE = 2
DEFAULT_MAX_STEPS = 4000
DEFAULT_CYCLE_POINTS = 200


@dataclass(frozen=True)
class PoincareSection:
    anchor: tuple      # (x, y)
    direction: tuple   # unit (dx, dy)


@dataclass(frozen=True)
class CrossingRecord:
    step: int          # index of the segment's first endpoint
    t_param: float     # distance from anchor along the ray, px
    point: tuple       # (x, y)


def place_section(positions, warmup: int = DEFAULT_WARMUP) -> PoincareSection:
    """Freeze a ray: anchor at the centroid of the last `warmup` positions,
    direction toward the latest position."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[0] < warmup:
        raise InsufficientPrefix(
            f"need at least {warmup} positions, got {0 if pos.ndim != 2 else pos.shape[0]}")
    tail = pos[-warmup:]
    anchor = tail.mean(axis=0)
    ray = pos[-1] - anchor
    norm = np.hypot(ray[0], ray[1])
    if norm < 1e-12:
        raise InsufficientPrefix("trajectory tail collapsed onto its centroid")
    d = ray / norm
    return PoincareSection(anchor=(float(anchor[0]), float(anchor[1])),
                           direction=(float(d[0]), float(d[1])))


def _side(section: PoincareSection, p) -> float:
    ax, ay = section.anchor
    dx, dy = section.direction
    return dx * (p[1] - ay) - dy * (p[0] - ax)


def detect_crossing(p0, p1, section: PoincareSection, step: int = 0):
    """Crossing record for segment [p0, p1], or None.

    Only negative-to-nonnegative side changes count (one circulation
    direction), and the interpolated hit must land on the positive ray."""
    s0, s1 = _side(section, p0), _side(section, p1)
    if not (s0 < 0.0 <= s1):
        return None
    alpha = s0 / (s0 - s1)
    px = p0[0] + alpha * (p1[0] - p0[0])
    py = p0[1] + alpha * (p1[1] - p0[1])
    t = ((px - section.anchor[0]) * section.direction[0]
         + (py - section.anchor[1]) * section.direction[1])
    if t <= 0.0:
        return None
    return CrossingRecord(step=step, t_param=float(t), point=(float(px), float(py)))


def map_magnitudes(crossings) -> list:
    """|t_{k+1} - t_k| over consecutive crossing records."""
    ts = [c.t_param for c in crossings]
    return [abs(b - a) for a, b in zip(ts, ts[1:])]


def converged(magnitudes, eps: float = DEFAULT_EPS,
              k: int = DEFAULT_CONSECUTIVE) -> bool:
    """True iff the last k magnitudes all fell to eps or below."""
    if len(magnitudes) < k:
        return False
    return all(m <= eps for m in magnitudes[-k:])


def resample_closed(points: np.ndarray, n_points: int) -> np.ndarray:
    """Resample a closed polyline to n_points uniform-arclength vertices.
    The closing edge (last vertex back to the first) is included."""
    pts = np.asarray(points, dtype=np.float64)
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        raise DegenerateCycle("zero-length loop")
    want = np.arange(n_points) * total / n_points
    x = np.interp(want, cum, closed[:, 0])
    y = np.interp(want, cum, closed[:, 1])
    return np.stack([x, y], axis=-1)


def extract_cycle(positions, crossing_a: CrossingRecord, crossing_b: CrossingRecord,
                  n_points: int = DEFAULT_CYCLE_POINTS,
                  min_arclength: float = 8.0) -> np.ndarray:
    """Closed polygon between two crossings, resampled uniformly.

    The loop runs from crossing_a's hit point through the trajectory samples
    to crossing_b's hit point; the two endpoints lie on the section ray, so
    the implicit closing edge is short once converged.
    """
    pos = np.asarray(positions, dtype=np.float64)
    i, j = crossing_a.step, crossing_b.step
    if j <= i:
        raise DegenerateCycle("crossings out of order")
    loop = np.vstack([
        np.asarray(crossing_a.point)[None, :],
        pos[i + 1:j + 1],
        np.asarray(crossing_b.point)[None, :],
    ])
    distinct = np.unique(np.round(loop, 9), axis=0)
    if distinct.shape[0] < 3:
        raise DegenerateCycle(f"loop has {distinct.shape[0]} distinct points")
    closed = np.vstack([loop, loop[:1]])
    arclen = float(np.linalg.norm(np.diff(closed, axis=0), axis=1).sum())
    if arclen < min_arclength:
        raise DegenerateCycle(f"loop arclength {arclen:.3f} < {min_arclength}")
    return resample_closed(loop, n_points)
