"""File formats: binary PGM images/masks, trajectory and contour CSVs,
dataset manifests, metric reports."""
from __future__ import annotations

import json
import os

import numpy as np

from .errors import (BadMagic, BadMaxval, NonBinaryMask, TruncatedFile)
from .validation import check_image, check_mask


def _read_pgm_raw(path):
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise BadMagic(f"not a P5 PGM: {data[:8]!r}")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedFile("PGM header ended early")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise BadMaxval(f"maxval must be 255, got {maxval}")
    payload = data[pos:pos + w * h]
    if len(payload) < w * h:
        raise TruncatedFile(f"expected {w * h} pixel bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


def read_image_pgm(path) -> np.ndarray:
    """P5 PGM -> float64 intensities in [0, 1]."""
    return _read_pgm_raw(path).astype(np.float64) / 255.0


def read_mask_pgm(path) -> np.ndarray:
    """P5 PGM with values {0, 255} -> uint8 {0, 1}."""
    raw = _read_pgm_raw(path)
    bad = np.setdiff1d(np.unique(raw), (0, 255))
    if bad.size:
        raise NonBinaryMask(f"mask PGM contains values {bad[:8].tolist()}")
    return (raw == 255).astype(np.uint8)


def write_image_pgm(img, path) -> None:
    a = check_image(img)
    raw = np.round(a * 255.0).astype(np.uint8)
    _write_pgm_raw(raw, path)


def write_mask_pgm(mask, path) -> None:
    m = check_mask(mask)
    _write_pgm_raw(m * np.uint8(255), path)


def _write_pgm_raw(raw: np.ndarray, path) -> None:
    h, w = raw.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(raw.tobytes())


def write_trajectory_csv(traj, path) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,x,y,hx,hy\n")
        for t in range(len(traj)):
            p, hd = traj.positions[t], traj.headings[t]
            f.write(f"{t},{p[0]:.6f},{p[1]:.6f},{hd[0]:.6f},{hd[1]:.6f}\n")


def read_trajectory_csv(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    data = np.atleast_2d(data)
    return data[:, 1:3], data[:, 3:5]


def write_contour_csv(contour, path) -> None:
    """n rows of x,y; closure (last vertex -> first) is implicit."""
    c = np.asarray(contour, dtype=np.float64)
    with open(path, "w", newline="") as f:
        f.write("x,y\n")
        for x, y in c:
            f.write(f"{x:.6f},{y:.6f}\n")


def read_contour_csv(path) -> np.ndarray:
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
    return np.atleast_2d(data)


def write_manifest(pairs, spec_dict, out_dir, prefix="case") -> str:
    """Write PGM pairs plus a manifest JSON; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, (img, mask) in enumerate(pairs):
        img_name = f"{prefix}{i:04d}_image.pgm"
        mask_name = f"{prefix}{i:04d}_mask.pgm"
        write_image_pgm(img, os.path.join(out_dir, img_name))
        write_mask_pgm(mask, os.path.join(out_dir, mask_name))
        entries.append({"index": i, "image": img_name, "mask": mask_name})
    manifest = {"pairs": entries, "spec": spec_dict}
    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return mpath


def read_manifest(path):
    """Load manifest entries; returns (list of (index, image_path, mask_path), spec)."""
    with open(path) as f:
        manifest = json.load(f)
    base = os.path.dirname(os.path.abspath(path))
    pairs = [(e["index"], os.path.join(base, e["image"]), os.path.join(base, e["mask"]))
             for e in manifest["pairs"]]
    return pairs, manifest.get("spec", {})


def write_report_json(report: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
