"""Minimal self-contained SVG plots (histogram and trajectory fan)."""
from __future__ import annotations

import numpy as np

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 55


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return LEFT + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        return H - BOTTOM - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)

    def frame(self, title, xlabel, ylabel):
        out = [f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
               'fill="none" stroke="black"/>']
        for t in _ticks(self.x0, self.x1):
            x = self.px(t)
            out.append(f'<line x1="{x:.1f}" y1="{H - BOTTOM}" x2="{x:.1f}" y2="{H - BOTTOM + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.1f}" y="{H - BOTTOM + 18}" text-anchor="middle" font-size="11">{t:.3g}</text>')
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            out.append(f'<line x1="{LEFT - 5}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="black"/>')
            out.append(f'<text x="{LEFT - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{t:.3g}</text>')
        out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="13">{xlabel}</text>')
        out.append(f'<text x="16" y="{H / 2}" text-anchor="middle" font-size="13" '
                   f'transform="rotate(-90 16 {H / 2})">{ylabel}</text>')
        out.append(f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>')
        return out


def _doc(body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def histogram_svg(edges, masses, title="Work distribution") -> str:
    edges = np.asarray(edges, dtype=float)
    masses = np.asarray(masses, dtype=float)
    dens = masses / np.diff(edges)
    ax = _Axes((edges[0], edges[-1]), (0.0, float(dens.max()) * 1.05))
    body = []
    for lo, hi, d in zip(edges[:-1], edges[1:], dens):
        x, x2 = ax.px(lo), ax.px(hi)
        y = ax.py(d)
        body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{max(x2 - x, 0.5):.2f}" '
                    f'height="{ax.py(0) - y:.2f}" fill="#4a7ab5" stroke="none"/>')
    body += ax.frame(title, "W", "probability density")
    return _doc(body)


def trajectories_svg(curves, title="Trajectories") -> str:
    """``curves`` is a list of (times, positions) pairs."""
    ts = np.concatenate([np.asarray(c[0]) for c in curves])
    xs = np.concatenate([np.asarray(c[1]) for c in curves])
    ax = _Axes((ts.min(), ts.max()), (xs.min(), xs.max()))
    body = []
    for t, x in curves:
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(ax.px(t), ax.py(x)))
        body.append(f'<polyline points="{pts}" fill="none" stroke="#b5494a" stroke-width="1"/>')
    body += ax.frame(title, "t", "x")
    return _doc(body)
