"""One JSON-serializable configuration record feeding every pipeline stage.

Flags override config keys at the CLI; unknown keys are rejected so stale
experiment files fail loudly instead of silently running defaults.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .errors import BadConfig
from .model import DEFAULT_ARCH
from .patches import (DEFAULT_BAND, DEFAULT_OFFSETS_DEG, DEFAULT_PATCH,
                      DEFAULT_RHO, DEFAULT_STEP)
from .poincare import (DEFAULT_CONSECUTIVE, DEFAULT_CYCLE_POINTS, DEFAULT_EPS,
                       DEFAULT_MAX_STEPS, DEFAULT_WARMUP)


@dataclass
class RunConfig:
    # patches / dataset
    patch_size: int = DEFAULT_PATCH
    step: float = DEFAULT_STEP
    rho: float = DEFAULT_RHO
    band_px: float = DEFAULT_BAND
    offsets_deg: tuple = DEFAULT_OFFSETS_DEG
    dataset_seed: int = 0
    # model / training
    arch: tuple = DEFAULT_ARCH
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch: int = 64
    epochs: int = 10
    train_seed: int = 0
    init_seed: int = 0
    # agent / poincare
    h_min: float = 0.5
    h_max: float = 4.0
    renormalize: bool = True
    warmup: int = DEFAULT_WARMUP
    eps: float = DEFAULT_EPS
    consecutive: int = DEFAULT_CONSECUTIVE
    max_steps: int = DEFAULT_MAX_STEPS
    cycle_points: int = DEFAULT_CYCLE_POINTS
    # metrics
    spacing_mm: float = 1.0

    def validate(self) -> "RunConfig":
        if self.patch_size < 8 or self.patch_size % 2:
            raise BadConfig(f"patch_size must be even and >= 8, got {self.patch_size}")
        if not (0.0 < self.rho <= 1.0):
            raise BadConfig(f"rho must lie in (0, 1], got {self.rho}")
        if self.band_px <= 0 or self.step <= 0:
            raise BadConfig("band_px and step must be > 0")
        if self.h_min <= 0 or self.h_max < self.h_min:
            raise BadConfig("need 0 < h_min <= h_max")
        if self.epochs < 0 or self.batch < 1:
            raise BadConfig("epochs must be >= 0 and batch >= 1")
        if self.eps <= 0 or self.consecutive < 1:
            raise BadConfig("eps must be > 0 and consecutive >= 1")
        if self.warmup < 2 or self.max_steps < 1:
            raise BadConfig("warmup must be >= 2 and max_steps >= 1")
        if self.cycle_points < 3:
            raise BadConfig("cycle_points must be >= 3")
        if self.spacing_mm <= 0:
            raise BadConfig("spacing_mm must be > 0")
        if not (0.0 < self.lr):
            raise BadConfig("lr must be > 0")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["offsets_deg"] = list(self.offsets_deg)
        d["arch"] = list(self.arch)
        return d

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def load_config(path) -> RunConfig:
    with open(path) as f:
        raw = json.load(f)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise BadConfig(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(raw)
    if "offsets_deg" in kwargs:
        kwargs["offsets_deg"] = tuple(kwargs["offsets_deg"])
    if "arch" in kwargs:
        kwargs["arch"] = tuple(kwargs["arch"])
    return RunConfig(**kwargs).validate()
