"""Vector-field construction from a binary label.

The pipeline turns a mask into a planar dynamical system whose unique
attracting limit cycle lies on the region boundary:

    mask -> boundary pixels -> exact signed EDT -> rotation angles -> field

Signed distance is positive inside the region. The base direction at every
pixel is the outward normal u = -grad(s); it is rotated counterclockwise by
theta = pi * (1 - sigmoid(s)), so the flow is inward far outside (theta ~ pi),
exactly tangent on the boundary (theta = pi/2), and outward toward the
boundary deep inside (theta ~ 0). Trajectories from both sides are attracted
onto the boundary and circulate counterclockwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, OutOfBounds, TruncatedFile
from .validation import check_two_class

# Gradient magnitudes below this are treated as medial-axis degeneracies.
GRAD_EPS = 0.1

FIELD_MAGIC = b"DPMVF1"

_FIELD_REC = np.dtype([
    ("s", "<f4"), ("theta", "<f4"), ("vx", "<f4"), ("vy", "<f4"),
    ("singular", "u1"),
])


@dataclass
class DistanceField:
    """Exact Euclidean distance to the boundary pixel set.

    d: unsigned distance (px). nearest: row-major index of the nearest
    boundary pixel (ties broken by smallest index). s: signed distance,
    positive inside the region.
    """
    width: int
    height: int
    d: np.ndarray        # (H, W) float64
    nearest: np.ndarray  # (H, W) int64, row-major index y*W + x
    s: np.ndarray        # (H, W) float64


@dataclass
class FieldBundle:
    """The synthesized dynamic: signed distance, rotation angle, unit velocity.

    v is (H, W, 2) with components (vx, vy); singular pixels carry v = (0, 0).
    """
    width: int
    height: int
    s: np.ndarray         # (H, W) float64
    theta: np.ndarray     # (H, W) float64, in (0, pi)
    v: np.ndarray         # (H, W, 2) float64
    singular: np.ndarray  # (H, W) bool


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def extract_boundary(mask) -> np.ndarray:
    """Boundary pixels: foreground with a 4-adjacent background neighbor,
    or foreground lying on the image border. Returns a bool (H, W) array."""
    m = check_two_class(mask)
    fg = m.astype(bool)
    has_bg_nbr = np.zeros_like(fg)
    has_bg_nbr[1:, :] |= ~fg[:-1, :]
    has_bg_nbr[:-1, :] |= ~fg[1:, :]
    has_bg_nbr[:, 1:] |= ~fg[:, :-1]
    has_bg_nbr[:, :-1] |= ~fg[:, 1:]
    on_border = np.zeros_like(fg)
    on_border[0, :] = on_border[-1, :] = True
    on_border[:, 0] = on_border[:, -1] = True
    return fg & (has_bg_nbr | on_border)


def distance_transform(mask) -> DistanceField:
    """Exact two-pass separable EDT with nearest-boundary-index propagation.

    Pass 1 finds, per column, the vertically nearest boundary row (ties go to
    the smaller row). Pass 2 minimizes (x - x')^2 + g(x')^2 over source
    columns x' per row; ties across columns resolve to the smallest row-major
    boundary index via a composite integer key, so results are exactly
    reproducible and match the brute-force oracle bit for bit.
    """
    m = check_two_class(mask)
    bnd = extract_boundary(m)
    H, W = m.shape
    FAR = np.int64(1) << 20

    # pass 1: vertical distance and nearest boundary row per column
    vdist = np.empty((H, W), np.int64)
    vrow = np.empty((H, W), np.int64)
    last = np.full(W, -FAR, np.int64)
    for y in range(H):
        last = np.where(bnd[y], y, last)
        vdist[y] = y - last
        vrow[y] = last
    nxt = np.full(W, FAR, np.int64)
    for y in range(H - 1, -1, -1):
        nxt = np.where(bnd[y], y, nxt)
        up = nxt - y
        better = up < vdist[y]          # strict: equal distances keep smaller row
        vdist[y] = np.where(better, up, vdist[y])
        vrow[y] = np.where(better, nxt, vrow[y])

    # pass 2: horizontal sweep, blocked to bound memory
    xs = np.arange(W, dtype=np.int64)
    g2 = np.minimum(vdist, FAR) ** 2
    src_idx = np.where(vrow >= 0, vrow * W + xs[None, :], 0)
    # composite key: squared distance in the high bits, source index below
    scale = np.int64(H) * np.int64(W)
    no_src = vrow < 0
    g2 = np.where(no_src, (np.int64(1) << 31), g2)

    dx2 = (xs[:, None] - xs[None, :]) ** 2
    d2 = np.empty((H, W), np.int64)
    nearest = np.empty((H, W), np.int64)
    block = max(1, int(4_000_000 // (W * W)) or 1)
    for y0 in range(0, H, block):
        y1 = min(y0 + block, H)
        key = (dx2[None, :, :] + g2[y0:y1, None, :]) * scale + src_idx[y0:y1, None, :]
        kmin = key.min(axis=2)
        d2[y0:y1] = kmin // scale
        nearest[y0:y1] = kmin % scale

    d = np.sqrt(d2.astype(np.float64))
    inside = m.astype(bool)
    s = np.where(inside, d, -d)
    return DistanceField(width=W, height=H, d=d, nearest=nearest, s=s)


def rotation_angle(s):
    """theta = pi * (1 - sigmoid(s)); pi/2 on the boundary, monotone
    decreasing in signed distance."""
    return np.pi * (1.0 - sigmoid(s))


def rotate_vector(v, theta):
    """Counterclockwise rotation of (vx, vy) by theta radians."""
    v = np.asarray(v, dtype=np.float64)
    c, sn = np.cos(theta), np.sin(theta)
    vx, vy = v[..., 0], v[..., 1]
    return np.stack([c * vx - sn * vy, sn * vx + c * vy], axis=-1)


def _signed_gradient(s: np.ndarray) -> np.ndarray:
    """Central differences on s with 2 px spacing. Returns (H, W, 2).

    The wider stencil reaches past the scalloped near field of the rasterized
    boundary point set; a 1 px stencil leaves staircase noise in the normal
    (mean angular error ~0.14 rad on a r=50 circle vs ~0.07 here). Edge
    padding degrades to a one-sided difference at the outer 2 px, which only
    touches deep-exterior pixels."""
    sp = np.pad(s, 2, mode="edge")
    gx = (sp[2:-2, 4:] - sp[2:-2, :-4]) / 4.0
    gy = (sp[4:, 2:-2] - sp[:-4, 2:-2]) / 4.0
    return np.stack([gx, gy], axis=-1)


def _attraction_field(df: DistanceField):
    """Outward unit direction u = -grad(s)/|grad(s)| at every pixel plus the
    singular flag. Near-zero gradients (medial axis, nearest-point ties) fall
    back to the nearest-boundary-pixel direction, sign-matched to stay outward
    on both sides of the boundary."""
    H, W = df.s.shape
    g = _signed_gradient(df.s)
    gn = np.linalg.norm(g, axis=-1)
    ok = gn >= GRAD_EPS
    u = np.zeros((H, W, 2))
    u[ok] = -g[ok] / gn[ok, None]

    if not ok.all():
        yy, xx = np.nonzero(~ok)
        nidx = df.nearest[yy, xx]
        nx, ny = nidx % W, nidx // W
        fv = np.stack([nx - xx, ny - yy], axis=-1).astype(np.float64)
        fn = np.linalg.norm(fv, axis=-1)
        nz = fn > 0
        # toward the boundary is outward inside the region, inward outside:
        # flip the exterior case so u stays the outward normal everywhere
        sign = np.where(df.s[yy, xx] >= 0, 1.0, -1.0)
        fv[nz] = sign[nz, None] * fv[nz] / fn[nz, None]
        u[yy[nz], xx[nz]] = fv[nz]
        singular = np.zeros((H, W), dtype=bool)
        singular[yy[~nz], xx[~nz]] = True
    else:
        singular = np.zeros((H, W), dtype=bool)
    return u, singular


def attraction_direction(df: DistanceField, p):
    """Outward unit direction at pixel p = (x, y); (u, singular)."""
    x, y = int(p[0]), int(p[1])
    if not (0 <= x < df.width and 0 <= y < df.height):
        raise OutOfBounds(f"pixel {p} outside {df.width}x{df.height} grid")
    u, singular = _attraction_field(df)
    return u[y, x].copy(), bool(singular[y, x])


def build_dynamic(mask) -> FieldBundle:
    """Synthesize the full field: v(p) = R(theta(s(p))) u(p)."""
    df = distance_transform(mask)
    theta = rotation_angle(df.s)
    u, singular = _attraction_field(df)
    v = rotate_vector(u, theta)
    v[singular] = 0.0
    return FieldBundle(width=df.width, height=df.height, s=df.s,
                       theta=theta, v=v, singular=singular)


def bilinear(layer: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a (H, W) or (H, W, C) layer at (N, 2)
    positions (x, y), pixel (i, j) centered at coordinates (i, j).
    Positions must already be inside [0, W-1] x [0, H-1]."""
    H, W = layer.shape[:2]
    x, y = pos[..., 0], pos[..., 1]
    x0 = np.clip(np.floor(x).astype(np.int64), 0, W - 2) if W > 1 else np.zeros_like(x, np.int64)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, H - 2) if H > 1 else np.zeros_like(y, np.int64)
    fx, fy = x - x0, y - y0
    if layer.ndim == 3:
        fx, fy = fx[..., None], fy[..., None]
    p00 = layer[y0, x0]
    p10 = layer[y0, x0 + 1] if W > 1 else p00
    p01 = layer[y0 + 1, x0] if H > 1 else p00
    p11 = layer[y0 + 1, x0 + 1] if (W > 1 and H > 1) else p00
    return ((1 - fx) * (1 - fy) * p00 + fx * (1 - fy) * p10
            + (1 - fx) * fy * p01 + fx * fy * p11)


def sample_field(fb: FieldBundle, pos) -> np.ndarray:
    """Interpolated velocity at a continuous (x, y) position."""
    p = np.asarray(pos, dtype=np.float64)
    if not (0.0 <= p[0] <= fb.width - 1 and 0.0 <= p[1] <= fb.height - 1):
        raise OutOfBounds(f"position {tuple(p)} outside grid")
    return bilinear(fb.v, p[None, :])[0]


def save_field(fb: FieldBundle, path) -> None:
    rec = np.empty(fb.width * fb.height, dtype=_FIELD_REC)
    rec["s"] = fb.s.ravel()
    rec["theta"] = fb.theta.ravel()
    rec["vx"] = fb.v[..., 0].ravel()
    rec["vy"] = fb.v[..., 1].ravel()
    rec["singular"] = fb.singular.ravel().astype(np.uint8)
    with open(path, "wb") as f:
        f.write(FIELD_MAGIC + b" %d %d\n" % (fb.width, fb.height))
        f.write(rec.tobytes())


def load_field(path) -> FieldBundle:
    with open(path, "rb") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 3 or parts[0] != FIELD_MAGIC:
            raise BadMagic(f"not a field file: {header[:32]!r}")
        w, h = int(parts[1]), int(parts[2])
        blob = f.read()
    want = w * h * _FIELD_REC.itemsize
    if len(blob) < want:
        raise TruncatedFile(f"expected {want} payload bytes, got {len(blob)}")
    rec = np.frombuffer(blob[:want], dtype=_FIELD_REC)
    v = np.stack([rec["vx"], rec["vy"]], axis=-1).astype(np.float64)
    return FieldBundle(
        width=w, height=h,
        s=rec["s"].astype(np.float64).reshape(h, w),
        theta=rec["theta"].astype(np.float64).reshape(h, w),
        v=v.reshape(h, w, 2),
        singular=rec["singular"].reshape(h, w).astype(bool),
    )
