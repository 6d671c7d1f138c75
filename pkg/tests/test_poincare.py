import numpy as np
import pytest

from dpmseg import poincare
from dpmseg.errors import DegenerateCycle, InsufficientPrefix
from dpmseg.poincare import (CrossingRecord, PoincareSection, converged,
                             detect_crossing, extract_cycle, map_magnitudes,
                             place_section, resample_closed)


def circle_orbit(r=50.0, cx=100.0, cy=100.0, n=400, turns=1.0, phase=0.0):
    t = phase + np.linspace(0.0, 2.0 * np.pi * turns, n, endpoint=False)
    return np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], axis=-1)


# --- place_section ----------------------------------------------------------

def test_place_section_circle_anchor_near_center():
    pos = circle_orbit(n=200, turns=1.0)
    sec = place_section(pos, warmup=200)
    assert np.hypot(sec.anchor[0] - 100.0, sec.anchor[1] - 100.0) <= 0.5
    assert np.hypot(*sec.direction) == pytest.approx(1.0, abs=1e-12)


def test_place_section_direction_toward_latest():
    pos = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0], [10.0, 0.0]])
    sec = place_section(pos, warmup=4)
    assert sec.direction == (1.0, 0.0)


def test_place_section_insufficient_prefix():
    with pytest.raises(InsufficientPrefix):
        place_section(circle_orbit(n=30), warmup=50)


def test_place_section_collapsed_tail():
    with pytest.raises(InsufficientPrefix):
        place_section(np.zeros((60, 2)), warmup=50)


def test_place_section_is_pure():
    pos = circle_orbit(n=120)
    a = place_section(pos, warmup=100)
    b = place_section(pos, warmup=100)
    assert a == b


# --- detect_crossing --------------------------------------------------------

SEC = PoincareSection(anchor=(0.0, 0.0), direction=(1.0, 0.0))


def test_crossing_perpendicular_hit():
    rec = detect_crossing((20.0, -1.0), (20.0, 1.0), SEC, step=7)
    assert rec is not None
    assert rec.step == 7
    assert rec.t_param == pytest.approx(20.0)
    assert rec.point == pytest.approx((20.0, 0.0))


def test_crossing_wrong_orientation_none():
    assert detect_crossing((20.0, 1.0), (20.0, -1.0), SEC) is None


def test_crossing_parallel_none():
    assert detect_crossing((5.0, 3.0), (9.0, 3.0), SEC) is None


def test_crossing_behind_anchor_none():
    # side flips but the hit lands on the negative half-line
    assert detect_crossing((-20.0, -1.0), (-20.0, 1.0), SEC) is None


def test_crossing_landing_on_ray_counts():
    rec = detect_crossing((4.0, -1.0), (4.0, 0.0), SEC)
    assert rec is not None and rec.t_param == pytest.approx(4.0)


def test_crossing_oblique_interpolation():
    rec = detect_crossing((10.0, -2.0), (14.0, 2.0), SEC)
    assert rec.point == pytest.approx((12.0, 0.0))
    assert rec.t_param == pytest.approx(12.0)


# --- map_magnitudes / converged ---------------------------------------------

def recs(ts):
    return [CrossingRecord(step=i, t_param=float(t), point=(t, 0.0))
            for i, t in enumerate(ts)]


def test_magnitudes_example():
    assert map_magnitudes(recs([20.0, 15.0, 12.5])) == pytest.approx([5.0, 2.5])


def test_magnitudes_short_lists():
    assert map_magnitudes(recs([20.0])) == []
    assert map_magnitudes([]) == []


def test_converged_examples():
    assert converged([5.0, 2.5], eps=2.0, k=2) is False
    assert converged([1.5, 0.5], eps=2.0, k=2) is True
    assert converged([9.0, 1.5, 0.5], eps=2.0, k=2) is True
    assert converged([0.5], eps=2.0, k=2) is False
    assert converged([], eps=2.0, k=2) is False


def test_converged_boundary_inclusive():
    assert converged([2.0, 2.0], eps=2.0, k=2) is True


# --- spiral decay oracle ----------------------------------------------------

def test_spiral_magnitudes_halve():
    """Orbit r(n) = r0 + 8 * 0.5^n converging to r0: successive return-map
    magnitudes must halve, each ratio within 5% of 0.5."""
    cx = cy = 0.0
    pts = []
    n_per_turn = 720
    for k in range(6 * n_per_turn):
        ang = 2.0 * np.pi * k / n_per_turn
        r = 30.0 + 8.0 * 0.5 ** (k / n_per_turn)
        pts.append((cx + r * np.cos(ang), cy + r * np.sin(ang)))
    pts = np.asarray(pts)
    sec = PoincareSection(anchor=(cx, cy), direction=(1.0, 0.0))
    crossings = []
    for i in range(len(pts) - 1):
        rec = detect_crossing(pts[i], pts[i + 1], sec, step=i)
        if rec is not None:
            crossings.append(rec)
    mags = map_magnitudes(crossings)
    assert len(mags) >= 4
    for a, b in zip(mags, mags[1:]):
        assert abs(b / a - 0.5) <= 0.05 * 0.5


def test_one_crossing_per_circulation():
    pts = circle_orbit(n=300, turns=3.0, phase=0.3)
    sec = PoincareSection(anchor=(100.0, 100.0), direction=(0.0, 1.0))
    count = sum(detect_crossing(pts[i], pts[i + 1], sec, step=i) is not None
                for i in range(len(pts) - 1))
    assert count == 3


# --- resample / extract_cycle -----------------------------------------------

def test_resample_uniform_spacing():
    square = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]])
    out = resample_closed(square, 40)
    assert out.shape == (40, 2)
    closed = np.vstack([out, out[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    assert np.abs(seg - 1.0).max() <= 1e-9


def test_extract_cycle_recovers_circle_radius():
    pos = circle_orbit(r=42.0, n=4000, turns=2.5, phase=0.1)
    sec = PoincareSection(anchor=(100.0, 100.0), direction=(1.0, 0.0))
    crossings = []
    for i in range(len(pos) - 1):
        rec = detect_crossing(pos[i], pos[i + 1], sec, step=i)
        if rec is not None:
            crossings.append(rec)
    assert len(crossings) == 2
    cyc = extract_cycle(pos, crossings[0], crossings[1], n_points=200)
    assert cyc.shape == (200, 2)
    radii = np.hypot(cyc[:, 0] - 100.0, cyc[:, 1] - 100.0)
    assert np.abs(radii - 42.0).max() <= 1e-3


def test_extract_cycle_out_of_order():
    a = CrossingRecord(step=5, t_param=1.0, point=(1.0, 0.0))
    b = CrossingRecord(step=2, t_param=1.0, point=(1.0, 0.0))
    with pytest.raises(DegenerateCycle):
        extract_cycle(np.zeros((10, 2)), a, b)


def test_extract_cycle_too_few_distinct_points():
    pos = np.tile([[3.0, 3.0]], (10, 1))
    a = CrossingRecord(step=1, t_param=1.0, point=(3.0, 3.0))
    b = CrossingRecord(step=6, t_param=1.0, point=(3.0, 3.0))
    with pytest.raises(DegenerateCycle):
        extract_cycle(pos, a, b)


def test_extract_cycle_short_arclength():
    # three distinct points but a sub-threshold perimeter
    pos = np.array([[0.0, 0.0], [0.1, 0.0], [0.1, 0.1], [0.0, 0.1]] * 3)
    a = CrossingRecord(step=0, t_param=1.0, point=(0.05, 0.0))
    b = CrossingRecord(step=3, t_param=1.0, point=(0.0, 0.05))
    with pytest.raises(DegenerateCycle):
        extract_cycle(pos, a, b, min_arclength=8.0)
