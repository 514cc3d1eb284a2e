"""Standalone SVG rendering of zero sets and chosen sample points."""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedDimensionError
from .sampling import Window, zero_set

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_header(width: int, height: int) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def _legend(parts: list, atoms, x: int, y: int):
    parts.append('<g id="legend" font-family="sans-serif" font-size="12">')
    for i, atom in enumerate(atoms):
        color = PALETTE[i % len(PALETTE)]
        yy = y + 18 * i
        parts.append(
            f'<rect x="{x}" y="{yy - 10}" width="12" height="12" fill="{color}"/>'
        )
        parts.append(f'<text x="{x + 18}" y="{yy}">atom {i}: {atom.label()}</text>')
    parts.append("</g>")


def _clip_line_to_box(normal, offset, lo, hi):
    """Segment of the line normal.s = offset inside the box, or None."""
    n = np.asarray(normal, dtype=float)
    d = np.array([-n[1], n[0]])
    d = d / np.linalg.norm(d)
    p0 = n * offset / (n @ n)
    ts = []
    for axis in range(2):
        if abs(d[axis]) < 1e-15:
            continue
        for bound in (lo[axis], hi[axis]):
            t = (bound - p0[axis]) / d[axis]
            q = p0 + t * d
            if np.all(q >= lo - 1e-9) and np.all(q <= hi + 1e-9):
                ts.append(t)
    if len(ts) < 2:
        return None
    t0, t1 = min(ts), max(ts)
    if t1 - t0 < 1e-12:
        return None
    return p0 + t0 * d, p0 + t1 * d


def _render_1d(atoms, window: Window, sample_sets) -> str:
    width, height = 800, 120 + 26 * len(atoms)
    lo, hi = window.bounds()
    lo, hi = float(lo[0]), float(hi[0])
    margin = 40
    scale = (width - 2 * margin) / (hi - lo)

    def sx(v):
        return margin + (v - lo) * scale

    axis_y = height - 40
    parts = _svg_header(width, height)
    parts.append(
        f'<line x1="{margin}" y1="{axis_y}" x2="{width - margin}" y2="{axis_y}" '
        'stroke="black" stroke-width="1"/>'
    )
    for i, atom in enumerate(atoms):
        color = PALETTE[i % len(PALETTE)]
        row_y = 30 + 26 * i
        parts.append(f'<g id="atom-{i}" stroke="{color}" stroke-width="1.5">')
        desc = zero_set(atom)
        if desc.lattice is not None:
            for v in desc.lattice.points_in(lo, hi):
                x = sx(v)
                parts.append(
                    f'<line x1="{x:.2f}" y1="{row_y}" x2="{x:.2f}" y2="{row_y + 14}"/>'
                )
        parts.append("</g>")
    if sample_sets:
        parts.append('<g id="samples" fill="black">')
        for i, pts in enumerate(sample_sets):
            if pts is None or len(pts) == 0:
                continue
            color = PALETTE[i % len(PALETTE)]
            arr = np.asarray(pts, dtype=float).reshape(-1)
            for v in arr:
                parts.append(
                    f'<circle cx="{sx(v):.2f}" cy="{axis_y}" r="4" fill="{color}" '
                    'stroke="black" stroke-width="0.5"/>'
                )
        parts.append("</g>")
    _legend(parts, atoms, width - 240, 24)
    parts.append("</svg>")
    return "\n".join(parts)


def _render_2d(atoms, window: Window, sample_sets) -> str:
    size = 640
    lo, hi = window.bounds()
    margin = 30
    scale = (size - 2 * margin) / float(np.max(hi - lo))

    def to_px(p):
        return (
            margin + (p[0] - lo[0]) * scale,
            size - margin - (p[1] - lo[1]) * scale,
        )

    parts = _svg_header(size, size)
    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{size - 2 * margin}" '
        f'height="{size - 2 * margin}" fill="none" stroke="black"/>'
    )
    for i, atom in enumerate(atoms):
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<g id="atom-{i}" stroke="{color}" stroke-width="1" opacity="0.7">'
        )
        desc = zero_set(atom)
        for family in desc.families:
            for offset in family.offsets_in(window):
                seg = _clip_line_to_box(family.normal, offset, lo, hi)
                if seg is None:
                    continue
                (x1, y1), (x2, y2) = to_px(seg[0]), to_px(seg[1])
                parts.append(
                    f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}"/>'
                )
        parts.append("</g>")
    if sample_sets:
        parts.append('<g id="samples">')
        for i, pts in enumerate(sample_sets):
            if pts is None or len(pts) == 0:
                continue
            color = PALETTE[i % len(PALETTE)]
            for p in np.atleast_2d(np.asarray(pts, dtype=float)):
                x, y = to_px(p)
                parts.append(
                    f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{color}" '
                    'stroke="black" stroke-width="0.6"/>'
                )
        parts.append("</g>")
    _legend(parts, atoms, size - 230, 24)
    parts.append("</svg>")
    return "\n".join(parts)


def render_zero_plot(atoms, window: Window, sample_sets=None) -> str:
    """Zero-set plot with optional per-atom sample markers, as SVG text.

    1D atoms render as tick rows over a number line; 2D atoms render as line
    families with chosen points highlighted.  ``sample_sets`` is an optional
    per-atom list of point arrays (None entries allowed).
    """
    atoms = list(atoms)
    dims = {a.dimension for a in atoms}
    if len(dims) != 1:
        raise UnsupportedDimensionError("atoms mix dimensions")
    n = dims.pop()
    if n == 1:
        return _render_1d(atoms, window, sample_sets)
    if n == 2:
        return _render_2d(atoms, window, sample_sets)
    raise UnsupportedDimensionError(f"no rendering for dimension {n}")
