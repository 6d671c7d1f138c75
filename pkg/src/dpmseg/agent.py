"""Agent rollout: oriented patch -> policy displacement -> next state.

Two policies share the loop: LearnedPolicy runs the CNN on the standardized
patch; OraclePolicy reads the ground-truth field directly, which isolates the
dynamics (field + stopping criterion) from regression quality. The heading is
the direction of the last executed displacement, which is the discrete analogue
of the trajectory tangent that patches were aligned with at training time.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import poincare
from .errors import DegenerateStep, NonConvergence, Stalled, TooCloseToBorder
from .field import FieldBundle, sample_field
from .model import PolicyModel, forward
from .patches import (DEFAULT_PATCH, DEFAULT_STEP, PatchFrame, extract_patch,
                      standardize_patch, to_image_coords, to_patch_coords)


@dataclass
class AgentState:
    position: np.ndarray   # (2,) continuous (x, y)
    heading: np.ndarray    # (2,) unit vector
    t: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.heading = np.asarray(self.heading, dtype=np.float64)


@dataclass
class Trajectory:
    positions: np.ndarray  # (T, 2)
    headings: np.ndarray   # (T, 2)

    def __len__(self):
        return self.positions.shape[0]


@dataclass
class StepConfig:
    step: float = DEFAULT_STEP        # nominal step length h, px
    h_min: float = 0.5
    h_max: float = 4.0
    renormalize: bool = True
    patch_size: int = DEFAULT_PATCH


@dataclass
class StopConfig:
    warmup: int = poincare.DEFAULT_WARMUP
    eps: float = poincare.DEFAULT_EPS
    consecutive: int = poincare.DEFAULT_CONSECUTIVE
    max_steps: int = poincare.DEFAULT_MAX_STEPS
    cycle_points: int = poincare.DEFAULT_CYCLE_POINTS


class OraclePolicy:
    """Reads the true field: delta_patch = R(-phi) * (h * v(pos))."""

    def __init__(self, fb: FieldBundle, step: float = DEFAULT_STEP):
        self.fb = fb
        self.step = step

    def patch_displacement(self, img, frame: PatchFrame) -> np.ndarray:
        v = sample_field(self.fb, frame.center)
        return to_patch_coords(self.step * v, frame)


class LearnedPolicy:
    """Runs the CNN on the standardized oriented patch."""

    def __init__(self, model: PolicyModel):
        self.model = model

    def patch_displacement(self, img, frame: PatchFrame) -> np.ndarray:
        patch = extract_patch(img, frame)
        out = forward(self.model, standardize_patch(patch).astype(self.model.dtype))
        return np.asarray(out, dtype=np.float64)


def init_state(seed_pos, image_shape, seed_heading=None, rng=None,
               patch_size: int = DEFAULT_PATCH) -> AgentState:
    """Validate the seed and pick a heading (given, or uniformly random)."""
    H, W = image_shape
    pos = np.asarray(seed_pos, dtype=np.float64)
    margin = patch_size / 2.0
    if not (margin <= pos[0] <= W - 1 - margin and margin <= pos[1] <= H - 1 - margin):
        raise TooCloseToBorder(
            f"seed {tuple(pos)} within {margin} px of the border of {W}x{H}")
    if seed_heading is not None:
        h = np.asarray(seed_heading, dtype=np.float64)
        h = h / np.hypot(h[0], h[1])
    else:
        ang = (rng or np.random.default_rng()).uniform(0.0, 2.0 * np.pi)
        h = np.array([np.cos(ang), np.sin(ang)])
    return AgentState(position=pos, heading=h, t=0)


def step(policy, img, state: AgentState, cfg: StepConfig,
         image_shape=None) -> AgentState:
    """One policy step: extract frame, query policy, move, update heading."""
    if image_shape is None:
        image_shape = np.asarray(img).shape
    H, W = image_shape
    phi = float(np.arctan2(state.heading[1], state.heading[0]))
    frame = PatchFrame(center=state.position.copy(), phi=phi, size=cfg.patch_size)
    delta_patch = policy.patch_displacement(img, frame)
    delta = to_image_coords(delta_patch, frame)
    norm = float(np.hypot(delta[0], delta[1]))
    if norm < 1e-6:
        raise DegenerateStep(f"policy displacement {norm:.2e} px at step {state.t}")
    if cfg.renormalize:
        delta = delta * (cfg.step / norm)
    elif norm < cfg.h_min:
        delta = delta * (cfg.h_min / norm)
    elif norm > cfg.h_max:
        delta = delta * (cfg.h_max / norm)
    margin = cfg.patch_size / 2.0
    new_pos = state.position + delta
    new_pos[0] = np.clip(new_pos[0], margin, W - 1 - margin)
    new_pos[1] = np.clip(new_pos[1], margin, H - 1 - margin)
    moved = new_pos - state.position
    mnorm = float(np.hypot(moved[0], moved[1]))
    heading = moved / mnorm if mnorm > 1e-12 else state.heading.copy()
    return AgentState(position=new_pos, heading=heading, t=state.t + 1)


def rollout(policy, img, init: AgentState, stop: StopConfig = None,
            cfg: StepConfig = None, image_shape=None):
    """Iterate steps until the return-map magnitudes converge.

    Returns (Trajectory, contour, crossings, magnitudes). Raises
    NonConvergence (carrying the partial trajectory) at max_steps and Stalled
    after 10 consecutive border-pinned steps.
    """
    stop = stop or StopConfig()
    cfg = cfg or StepConfig()
    if image_shape is None:
        image_shape = np.asarray(img).shape
    H, W = image_shape
    margin = cfg.patch_size / 2.0

    positions = [init.position.copy()]
    headings = [init.heading.copy()]
    state = init
    section = None
    crossings = []
    magnitudes = []
    pinned = 0

    for _ in range(stop.max_steps):
        prev = state.position
        state = step(policy, img, state, cfg, image_shape=image_shape)
        positions.append(state.position.copy())
        headings.append(state.heading.copy())

        at_edge = (state.position[0] in (margin, W - 1 - margin)
                   or state.position[1] in (margin, H - 1 - margin))
        pinned = pinned + 1 if at_edge else 0
        if pinned >= 10:
            raise Stalled(f"agent pinned at the border margin for {pinned} steps")

        if section is None:
            if len(positions) >= stop.warmup:
                section = poincare.place_section(positions, stop.warmup)
            continue
        rec = poincare.detect_crossing(prev, state.position, section,
                                       step=len(positions) - 2)
        if rec is None:
            continue
        if crossings:
            magnitudes.append(abs(rec.t_param - crossings[-1].t_param))
        crossings.append(rec)
        if poincare.converged(magnitudes, stop.eps, stop.consecutive):
            contour = poincare.extract_cycle(
                np.asarray(positions), crossings[-2], crossings[-1],
                n_points=stop.cycle_points, min_arclength=4.0 * cfg.step)
            traj = Trajectory(np.asarray(positions), np.asarray(headings))
            return traj, contour, crossings, magnitudes

    traj = Trajectory(np.asarray(positions), np.asarray(headings))
    raise NonConvergence(stop.max_steps, trajectory=traj)
