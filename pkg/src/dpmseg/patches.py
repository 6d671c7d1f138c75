"""Oriented patch extraction and the patch/image coordinate transforms.

A patch frame is a rotated local coordinate system: its +x axis is the
sampling direction (the field velocity at training time, the agent heading at
inference). Training pairs are (patch pixels, displacement target in patch
coordinates); targets are unit field directions scaled by the step length h,
so a zero-offset sample always has target (h, 0).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, DegenerateDirection, EmptyBand, TruncatedFile
from .field import FieldBundle, bilinear, build_dynamic, sample_field
from .validation import check_image, check_two_class

DATASET_MAGIC = b"DPMDS1\n"

DEFAULT_PATCH = 64
DEFAULT_STEP = 2.0
DEFAULT_RHO = 0.05
DEFAULT_BAND = 32.0
DEFAULT_OFFSETS_DEG = (45.0, -45.0)


def wrap_angle(phi: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = np.arctan2(np.sin(phi), np.cos(phi))
    # atan2 maps pi to pi but -pi stays -pi; fold the open end
    if w <= -np.pi:
        w = np.pi
    return float(w)


@dataclass
class PatchFrame:
    center: np.ndarray   # (2,) continuous (x, y)
    phi: float           # orientation of the sampling direction, radians
    size: int = DEFAULT_PATCH

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.size < 8 or self.size % 2:
            raise ValueError(f"patch size must be even and >= 8, got {self.size}")
        self.phi = wrap_angle(self.phi)


@dataclass
class PatchDataset:
    """Flat sample store: patches (N, P, P) float32, targets (N, 2) float32."""
    patches: np.ndarray
    targets: np.ndarray
    patch_size: int
    step: float

    def __len__(self):
        return self.patches.shape[0]


@dataclass
class DatasetConfig:
    rho: float = DEFAULT_RHO
    band_px: float = DEFAULT_BAND
    offsets_deg: tuple = DEFAULT_OFFSETS_DEG
    step: float = DEFAULT_STEP          # displacement magnitude h, px
    patch_size: int = DEFAULT_PATCH
    seed: int = 0


def patch_frame_at(fb: FieldBundle, center, offset: float = 0.0,
                   size: int = DEFAULT_PATCH) -> PatchFrame:
    """Frame whose +x axis follows the interpolated field at `center`,
    rotated by `offset` radians."""
    v = sample_field(fb, center)
    if np.hypot(v[0], v[1]) < 1e-6:
        raise DegenerateDirection(f"field magnitude ~0 at {tuple(center)}")
    phi = float(np.arctan2(v[1], v[0])) + float(offset)
    return PatchFrame(center=np.asarray(center, float), phi=phi, size=size)


def _frame_grid(frame: PatchFrame) -> np.ndarray:
    """Image-space sampling positions for every patch pixel, (P, P, 2)."""
    P = frame.size
    half = (P - 1) / 2.0
    a = np.arange(P) - half           # patch x, along the sampling direction
    b = np.arange(P) - half           # patch y
    da, db = np.meshgrid(a, b)        # index [b, a]
    c, s = np.cos(frame.phi), np.sin(frame.phi)
    gx = frame.center[0] + c * da - s * db
    gy = frame.center[1] + s * da + c * db
    return np.stack([gx, gy], axis=-1)


def extract_patch(img, frame: PatchFrame) -> np.ndarray:
    """Bilinear resampling of the image over the rotated patch grid; positions
    outside the image clamp to the nearest edge pixel."""
    a = np.asarray(img, dtype=np.float64)
    H, W = a.shape
    pos = _frame_grid(frame)
    pos[..., 0] = np.clip(pos[..., 0], 0.0, W - 1.0)
    pos[..., 1] = np.clip(pos[..., 1], 0.0, H - 1.0)
    return bilinear(a, pos.reshape(-1, 2)).reshape(frame.size, frame.size)


def to_patch_coords(v_image, frame: PatchFrame) -> np.ndarray:
    """Rotate an image-space vector into the patch frame: R(-phi) v."""
    v = np.asarray(v_image, dtype=np.float64)
    c, s = np.cos(frame.phi), np.sin(frame.phi)
    return np.stack([c * v[..., 0] + s * v[..., 1],
                     -s * v[..., 0] + c * v[..., 1]], axis=-1)


def to_image_coords(v_patch, frame: PatchFrame) -> np.ndarray:
    """Inverse of to_patch_coords: R(+phi) v."""
    v = np.asarray(v_patch, dtype=np.float64)
    c, s = np.cos(frame.phi), np.sin(frame.phi)
    return np.stack([c * v[..., 0] - s * v[..., 1],
                     s * v[..., 0] + c * v[..., 1]], axis=-1)


def standardize_patch(patch: np.ndarray) -> np.ndarray:
    """Per-patch intensity standardization (mean 0, variance 1) with a
    variance floor so flat patches stay finite."""
    p = np.asarray(patch, dtype=np.float64)
    mu = p.mean()
    var = p.var()
    return (p - mu) / np.sqrt(max(var, 1e-6))


def build_dataset(pairs, cfg: DatasetConfig) -> PatchDataset:
    """Turn (image, mask) pairs into oriented patch-policy samples.

    Per image: build the field, sample floor(rho * |band|) centers uniformly
    without replacement from the near-boundary band, and emit one sample per
    center per offset in {0} + offsets. Per-image RNG streams derive from
    (seed, image index) so serial and parallel construction agree.
    """
    offsets = [0.0] + [np.deg2rad(o) for o in cfg.offsets_deg
                       if abs(wrap_angle(np.deg2rad(o))) > 1e-12]
    patches, targets = [], []
    for idx, (img, mask) in enumerate(pairs):
        a = check_image(img)
        m = check_two_class(mask)
        if a.shape != m.shape:
            raise ValueError(f"pair {idx}: image {a.shape} vs mask {m.shape}")
        fb = build_dynamic(m)
        df_d = np.abs(fb.s)
        sel = (df_d <= cfg.band_px) & ~fb.singular
        band = np.flatnonzero(sel.ravel())
        if band.size == 0:
            raise EmptyBand(f"pair {idx}: no usable pixels within {cfg.band_px} px")
        n = int(np.floor(cfg.rho * band.size))
        rng = np.random.default_rng([cfg.seed, idx])
        chosen = rng.choice(band, size=min(n, band.size), replace=False)
        W = fb.width
        for flat in chosen:
            cx, cy = int(flat % W), int(flat // W)
            v = fb.v[cy, cx]
            direction = v / np.hypot(v[0], v[1])
            for off in offsets:
                frame = patch_frame_at(fb, (cx, cy), offset=off, size=cfg.patch_size)
                patch = extract_patch(a, frame)
                target = to_patch_coords(cfg.step * direction, frame)
                patches.append(patch.astype(np.float32))
                targets.append(target.astype(np.float32))
    if not patches:
        raise EmptyBand("no samples produced (rho too small?)")
    return PatchDataset(
        patches=np.stack(patches),
        targets=np.stack(targets),
        patch_size=cfg.patch_size,
        step=cfg.step,
    )


def save_dataset(ds: PatchDataset, path) -> None:
    header = json.dumps(
        {"count": len(ds), "P": ds.patch_size, "h": ds.step},
        separators=(",", ":"), sort_keys=True,
    ).encode() + b"\n"
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(header)
        for i in range(len(ds)):
            f.write(ds.patches[i].astype("<f4").tobytes())
            f.write(ds.targets[i].astype("<f4").tobytes())


def load_dataset(path) -> PatchDataset:
    with open(path, "rb") as f:
        magic = f.read(len(DATASET_MAGIC))
        if magic != DATASET_MAGIC:
            raise BadMagic(f"not a dataset file: {magic!r}")
        header = json.loads(f.readline())
        count, P, h = int(header["count"]), int(header["P"]), float(header["h"])
        per = (P * P + 2) * 4
        blob = f.read()
    if len(blob) < count * per:
        raise TruncatedFile(f"expected {count * per} payload bytes, got {len(blob)}")
    flat = np.frombuffer(blob[:count * per], dtype="<f4").reshape(count, P * P + 2)
    return PatchDataset(
        patches=flat[:, :P * P].reshape(count, P, P).copy(),
        targets=flat[:, P * P:].copy(),
        patch_size=P, step=h,
    )
