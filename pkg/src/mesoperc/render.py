"""Deterministic SVG drawings of embeddings and circle packings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import Embedding, Triangulation
from .packing import CirclePacking


@dataclass(frozen=True)
class Style:
    width: int = 800
    margin: float = 0.04
    stroke: str = "#222222"
    stroke_width: float = 0.6
    circle_stroke: str = "#1f5fa8"
    circle_fill: str = "none"
    shade: str = "#d0d0d0"
    circles: bool = True
    shade_fundamental: bool = True
    digits: int = 4


def _edge_segments(t: Triangulation, corners: np.ndarray) -> np.ndarray:
    """One segment per edge, taken from the face of its smaller half-edge id."""
    tw = t.twin
    h = np.arange(3 * t.n_faces)
    keep = (tw < 0) | (h < tw)
    f, k = h[keep] // 3, h[keep] % 3
    return np.stack([corners[f, k], corners[f, (k + 1) % 3]], axis=1)


def _fmt(x: float, digits: int) -> str:
    s = f"{x:.{digits}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render(t: Triangulation, e: Optional[Embedding] = None, packing: Optional[CirclePacking] = None,
           style: Style = Style(), periods: Optional[np.ndarray] = None) -> str:
    """SVG document of the edges, with circles when ``packing`` is given.

    Geometry comes from the packing layout if present, otherwise from the
    embedding. On a torus the lifted faces are drawn and one fundamental
    parallelogram is shaded.
    """
    if t.n_faces == 0:
        raise ValueError("empty geometry")
    if packing is not None:
        corners = packing.face_centers
        if packing.omega is not None and periods is None:
            periods = np.asarray(packing.omega)
    elif e is not None:
        corners = e.complex_corners(t)
        if e.periods is not None and periods is None:
            periods = e.periods[:, 0] + 1j * e.periods[:, 1]
    else:
        raise ValueError("empty geometry: need an embedding or a packing")
    segs = _edge_segments(t, corners)
    pts = [segs.reshape(-1)]
    circles = []
    if packing is not None and style.circles:
        circles = list(zip(packing.centers, packing.radii))
        c = np.asarray(packing.centers)
        r = np.asarray(packing.radii)
        pts += [c + r, c - r, c + 1j * r, c - 1j * r]
    shade = None
    if periods is not None and style.shade_fundamental:
        w1, w2 = complex(periods[0]), complex(periods[1])
        o = 0j if packing is None else complex(packing.centers[0])
        shade = np.array([o, o + w1, o + w1 + w2, o + w2])
        pts.append(shade)
    allp = np.concatenate([np.ravel(p) for p in pts])
    if not np.isfinite(allp).all():
        raise ValueError("geometry has non-finite coordinates")
    lo = complex(allp.real.min(), allp.imag.min())
    span = max(allp.real.max() - lo.real, allp.imag.max() - lo.imag, 1e-300)
    W = style.width
    pad = style.margin * W
    s = (W - 2 * pad) / span
    H = int(np.ceil((allp.imag.max() - lo.imag) * s + 2 * pad))
    d = style.digits

    def X(z):
        return _fmt((z.real - lo.real) * s + pad, d)

    def Y(z):
        return _fmt(H - ((z.imag - lo.imag) * s + pad), d)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    if shade is not None:
        p = " ".join(f"{X(z)},{Y(z)}" for z in shade)
        out.append(f'<polygon points="{p}" fill="{style.shade}" stroke="none"/>')
    out.append(f'<g stroke="{style.stroke}" stroke-width="{style.stroke_width}">')
    for a, b in segs:
        out.append(f'<line x1="{X(a)}" y1="{Y(a)}" x2="{X(b)}" y2="{Y(b)}"/>')
    out.append("</g>")
    if circles:
        out.append(f'<g stroke="{style.circle_stroke}" fill="{style.circle_fill}" stroke-width="{style.stroke_width}">')
        for c, r in circles:
            out.append(f'<circle cx="{X(c)}" cy="{Y(c)}" r="{_fmt(r * s, d)}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
