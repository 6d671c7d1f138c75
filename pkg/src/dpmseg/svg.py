"""Deterministic SVG rendering of fields, trajectories, and contours."""
from __future__ import annotations

import numpy as np

from .errors import NothingToRender

ARROW_STRIDE = 8
ARROW_LEN = 5.0


def _field_arrows(fb, out):
    for y in range(0, fb.height, ARROW_STRIDE):
        for x in range(0, fb.width, ARROW_STRIDE):
            if fb.singular[y, x]:
                continue
            vx, vy = fb.v[y, x]
            x1, y1 = x + ARROW_LEN * vx, y + ARROW_LEN * vy
            out.append(
                f'<line x1="{x:.2f}" y1="{y:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                f'stroke="#4477aa" stroke-width="0.6" marker-end="url(#tip)"/>')


def render_svg(fb=None, traj=None, contour=None, path=None) -> bytes:
    """Compose selected layers into one SVG document.

    Any subset of (field, trajectory, contour) may be given; at least one is
    required. Output bytes depend only on the inputs.
    """
    if fb is None and traj is None and contour is None:
        raise NothingToRender("no field, trajectory, or contour given")

    if fb is not None:
        w, h = fb.width, fb.height
    elif traj is not None:
        w = int(np.ceil(traj.positions[:, 0].max())) + 2
        h = int(np.ceil(traj.positions[:, 1].max())) + 2
    else:
        c = np.asarray(contour)
        w = int(np.ceil(c[:, 0].max())) + 2
        h = int(np.ceil(c[:, 1].max())) + 2

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        '<defs><marker id="tip" markerWidth="4" markerHeight="4" refX="2" '
        'refY="2" orient="auto"><path d="M0,0L4,2L0,4Z" fill="#4477aa"/>'
        "</marker></defs>",
        f'<rect width="{w}" height="{h}" fill="white"/>',
    ]
    if fb is not None:
        _field_arrows(fb, out)
    if traj is not None:
        pts = " ".join(f"{p[0]:.2f},{p[1]:.2f}" for p in traj.positions)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#cc6677" '
                   'stroke-width="0.8"/>')
    if contour is not None:
        c = np.asarray(contour)
        d = "M" + "L".join(f"{p[0]:.2f},{p[1]:.2f}" for p in c) + "Z"
        out.append(f'<path d="{d}" fill="none" stroke="#117733" stroke-width="1.2"/>')
    out.append("</svg>")
    blob = ("\n".join(out) + "\n").encode()
    if path is not None:
        with open(path, "wb") as f:
            f.write(blob)
    return blob
