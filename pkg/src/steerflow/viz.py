"""Extraction of visual primitives from macroscopic fields.

Rasters are produced per grid section so the compositor can run them as
independent tasks; iso-lines, streamlines and glyph sets work in domain
coordinates [0,1]^2 with y up. Screen placement (y down) is the caller's
concern; color_map flips rows so pixel row 0 is the topmost cell row of
the section it renders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .lattice import FLUID, SOLID_FLAGS

OBSTACLE_GRAY = (64, 64, 64, 255)


@dataclass(frozen=True)
class Colormap:
    """Piecewise-linear RGBA map over scalar anchors in [0,1]."""

    name: str
    stops: tuple[tuple[float, tuple[int, int, int, int]], ...]

    def __post_init__(self):
        anchors = [a for a, _ in self.stops]
        if len(anchors) < 2 or anchors[0] != 0.0 or anchors[-1] != 1.0:
            raise ValueError("stops must start at 0 and end at 1")
        if any(b <= a for a, b in zip(anchors, anchors[1:])):
            raise ValueError("stop anchors must be strictly increasing")

    def sample(self, t: np.ndarray) -> np.ndarray:
        """RGBA8 colors for scalars t in [0,1], shape t.shape + (4,)."""
        anchors = np.array([a for a, _ in self.stops])
        out = np.empty(t.shape + (4,), dtype=np.uint8)
        for c in range(4):
            vals = np.array([rgba[c] for _, rgba in self.stops], dtype=float)
            out[..., c] = np.floor(np.interp(t, anchors, vals) + 0.5).astype(np.uint8)
        return out


DIVERGING = Colormap(
    "diverging",
    ((0.0, (40, 60, 220, 255)), (0.5, (245, 245, 245, 255)), (1.0, (200, 30, 30, 255))),
)
GRAYS = Colormap("grays", ((0.0, (0, 0, 0, 255)), (1.0, (255, 255, 255, 255))))

COLORMAPS = {m.name: m for m in (DIVERGING, GRAYS)}


@dataclass
class Polyline:
    kind: str                     # "iso" | "streamline" | "streamband-edge"
    tag: float
    points: list[tuple[float, float]]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tag": self.tag,
                "points": [[float(x), float(y)] for x, y in self.points]}


@dataclass
class SubImage:
    """RGBA8 tile with its screen-space placement."""

    pixels: np.ndarray            # (h, w, 4) uint8
    x0: int
    y0: int
    node_id: int = -1

    @property
    def w(self) -> int:
        return self.pixels.shape[1]

    @property
    def h(self) -> int:
        return self.pixels.shape[0]


def color_map(
    field: np.ndarray,
    value_range: tuple[float, float],
    cmap: Colormap,
    px_per_cell: int,
    solid: np.ndarray | None = None,
    x0: int = 0,
    y0: int = 0,
    node_id: int = -1,
) -> SubImage:
    """Render a scalar section to an RGBA tile, one px_per_cell^2 block per cell.

    Values are clamped to value_range and mapped linearly through the stops;
    solid cells get the fixed obstacle gray. Purely per-cell, so tiling and
    cropping commute with rendering bit for bit. x0/y0 are the screen
    placement of the tile in pixels.
    """
    lo, hi = value_range
    if not lo < hi:
        raise ValueError("value range must satisfy lo < hi")
    t = (np.clip(field, lo, hi) - lo) / (hi - lo)
    colors = cmap.sample(t)
    if solid is not None and solid.any():
        colors[solid] = np.array(OBSTACLE_GRAY, dtype=np.uint8)
    colors = colors[::-1]  # row 0 of the tile is the topmost cell row
    pixels = np.repeat(np.repeat(colors, px_per_cell, axis=0), px_per_cell, axis=1)
    return SubImage(pixels=np.ascontiguousarray(pixels), x0=x0, y0=y0, node_id=node_id)


# marching squares: edge ids 0=bottom 1=right 2=top 3=left; case bits
# 1=bottom-left 2=bottom-right 4=top-right 8=top-left
_MS_TABLE: dict[int, list[tuple[int, int]]] = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    3: [(3, 1)], 12: [(3, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    6: [(0, 2)], 9: [(0, 2)],
    7: [(3, 2)], 8: [(3, 2)],
}


def _ms_segments(field: np.ndarray, level: float):
    """Per-square segments in domain coordinates (unordered endpoints)."""
    ny, nx = field.shape
    segs = []

    def edge_point(x, y, edge):
        # corner values of square (x, y): a=BL b=BR c=TR d=TL
        if edge == 0:
            va, vb = field[y, x], field[y, x + 1]
            p0, p1 = (x, y), (x + 1, y)
        elif edge == 1:
            va, vb = field[y, x + 1], field[y + 1, x + 1]
            p0, p1 = (x + 1, y), (x + 1, y + 1)
        elif edge == 2:
            va, vb = field[y + 1, x], field[y + 1, x + 1]
            p0, p1 = (x, y + 1), (x + 1, y + 1)
        else:
            va, vb = field[y, x], field[y + 1, x]
            p0, p1 = (x, y), (x, y + 1)
        t = (level - va) / (vb - va)
        gx = p0[0] + (p1[0] - p0[0]) * t
        gy = p0[1] + (p1[1] - p0[1]) * t
        return ((gx + 0.5) / nx, (gy + 0.5) / ny)

    ge = field >= level
    for y in range(ny - 1):
        for x in range(nx - 1):
            case = (
                (1 if ge[y, x] else 0)
                | (2 if ge[y, x + 1] else 0)
                | (4 if ge[y + 1, x + 1] else 0)
                | (8 if ge[y + 1, x] else 0)
            )
            if case in (5, 10):
                center_ge = (
                    field[y, x] + field[y, x + 1] + field[y + 1, x] + field[y + 1, x + 1]
                ) / 4.0 >= level
                if case == 5:  # BL and TR inside
                    pairs = [(3, 0), (1, 2)] if not center_ge else [(0, 1), (2, 3)]
                else:          # BR and TL inside
                    pairs = [(0, 1), (2, 3)] if not center_ge else [(0, 3), (1, 2)]
            else:
                pairs = _MS_TABLE[case]
            for ea, eb in pairs:
                segs.append((edge_point(x, y, ea), edge_point(x, y, eb)))
    return segs


def _chain_segments(segs, tol=1e-9):
    """Join segments sharing endpoints (within tol) into polylines."""

    def key(p):
        return (round(p[0] / tol), round(p[1] / tol))

    adj: dict[tuple, list[int]] = {}
    for i, (a, b) in enumerate(segs):
        adj.setdefault(key(a), []).append(i)
        adj.setdefault(key(b), []).append(i)
    used = [False] * len(segs)
    chains = []
    for start in range(len(segs)):
        if used[start]:
            continue
        used[start] = True
        a, b = segs[start]
        chain = [a, b]
        # extend forward from b, then backward from a
        for endpoint, append in ((b, True), (a, False)):
            cur = endpoint
            while True:
                nxt = None
                for i in adj.get(key(cur), []):
                    if not used[i]:
                        nxt = i
                        break
                if nxt is None:
                    break
                used[nxt] = True
                pa, pb = segs[nxt]
                cur = pb if key(pa) == key(cur) else pa
                if append:
                    chain.append(cur)
                else:
                    chain.insert(0, cur)
        chains.append(chain)
    return chains


def iso_lines(field: np.ndarray, levels: list[float]) -> list[Polyline]:
    """Marching-squares contours through the cell-center grid."""
    out = []
    for level in levels:
        if not math.isfinite(level):
            raise ValueError("iso level must be finite")
        for chain in _chain_segments(_ms_segments(field, level)):
            if len(chain) >= 2:
                out.append(Polyline(kind="iso", tag=float(level), points=chain))
    return out


def _bilinear_velocity(ux: np.ndarray, uy: np.ndarray):
    ny, nx = ux.shape

    def sample(p):
        gx = p[0] * nx - 0.5
        gy = p[1] * ny - 0.5
        ix = int(np.clip(np.floor(gx), 0, nx - 2)) if nx > 1 else 0
        iy = int(np.clip(np.floor(gy), 0, ny - 2)) if ny > 1 else 0
        tx = np.clip(gx - ix, 0.0, 1.0) if nx > 1 else 0.0
        ty = np.clip(gy - iy, 0.0, 1.0) if ny > 1 else 0.0
        out = []
        for u in (ux, uy):
            a = u[iy, ix] + (u[iy, ix + 1] - u[iy, ix]) * tx
            b = u[iy + 1, ix] + (u[iy + 1, ix + 1] - u[iy + 1, ix]) * tx
            out.append(a + (b - a) * ty)
        return np.array(out)

    return sample


def streamlines(
    ux: np.ndarray,
    uy: np.ndarray,
    flags: np.ndarray,
    seeds: list[tuple[float, float]],
    h: float,
    max_steps: int,
    kind: str = "streamline",
) -> list[Polyline]:
    """RK4 integration of the bilinearly interpolated velocity field.

    Integration stops on domain exit, obstacle entry, near-stagnation
    (|u| < 1e-9) or after max_steps. Seeds that terminate immediately
    produce no polyline (a single point is not a line).
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    ny, nx = ux.shape
    solid = np.isin(flags, SOLID_FLAGS)
    sample = _bilinear_velocity(ux, uy)

    def blocked(p):
        if not (0.0 <= p[0] < 1.0 and 0.0 <= p[1] < 1.0):
            return True
        return bool(solid[min(int(p[1] * ny), ny - 1), min(int(p[0] * nx), nx - 1)])

    out = []
    for si, seed in enumerate(seeds):
        p = np.array(seed, dtype=float)
        if blocked(p):
            continue
        pts = [(float(p[0]), float(p[1]))]
        for _ in range(max_steps):
            v = sample(p)
            if np.hypot(v[0], v[1]) < 1e-9:
                break
            k1 = v
            k2 = sample(p + 0.5 * h * k1)
            k3 = sample(p + 0.5 * h * k2)
            k4 = sample(p + h * k3)
            p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if blocked(p):
                break
            pts.append((float(p[0]), float(p[1])))
        if len(pts) >= 2:
            out.append(Polyline(kind=kind, tag=float(si), points=pts))
    return out


def streambands(
    ux, uy, flags, seeds, h, max_steps, width: float = 0.01
) -> list[Polyline]:
    """Bands reduced to pairs of adjacent streamlines offset across the flow."""
    sample = _bilinear_velocity(ux, uy)
    edge_seeds = []
    for seed in seeds:
        v = sample(np.array(seed, dtype=float))
        n = np.hypot(v[0], v[1])
        if n < 1e-9:
            continue
        px, py = -v[1] / n, v[0] / n
        edge_seeds.append((seed[0] + 0.5 * width * px, seed[1] + 0.5 * width * py))
        edge_seeds.append((seed[0] - 0.5 * width * px, seed[1] - 0.5 * width * py))
    return streamlines(ux, uy, flags, edge_seeds, h, max_steps, kind="streamband-edge")


def glyphs(
    ux: np.ndarray,
    uy: np.ndarray,
    flags: np.ndarray,
    stride: int,
    rect=None,
) -> list[tuple[tuple[float, float], tuple[float, float], float]]:
    """(anchor, unit direction, magnitude) at every stride-th fluid cell.

    Sampling is aligned to global cell indices, so extracting per tile and
    taking the union reproduces the whole-domain set.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    ny, nx = ux.shape
    if rect is None:
        xs, ys = range(0, nx, stride), range(0, ny, stride)
    else:
        xs = range(-(-rect.x0 // stride) * stride, rect.x0 + rect.w, stride)
        ys = range(-(-rect.y0 // stride) * stride, rect.y0 + rect.h, stride)
    out = []
    for y in ys:
        for x in xs:
            if flags[y, x] != FLUID:
                continue
            mag = float(np.hypot(ux[y, x], uy[y, x]))
            if mag == 0.0:
                continue
            anchor = ((x + 0.5) / nx, (y + 0.5) / ny)
            out.append((anchor, (float(ux[y, x]) / mag, float(uy[y, x]) / mag), mag))
    return out


def primitives_to_json(polylines: list[Polyline], glyph_list) -> str:
    return json.dumps(
        {
            "polylines": [p.to_dict() for p in polylines],
            "glyphs": [
                {"anchor": list(a), "dir": list(d), "mag": m} for a, d, m in glyph_list
            ],
        }
    )
