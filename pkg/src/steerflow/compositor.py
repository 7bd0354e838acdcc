"""Sort-last image composition over the partition tree.

Leaves are rendered independently (as scheduler tasks) and joined pairwise
bottom-up; because sibling rectangles are disjoint in this 2D orthographic
setting a join is a pure placement, so any sibling-respecting schedule
yields the identical frame and the whole pipeline stays bit-identical to a
monolithic render.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fieldio, viz
from .lattice import SOLID_FLAGS, MacroFields
from .partition import PartitionTree, TreeNode
from .scheduler import RoleConfig, TaskGraph, run, run_serial
from .viz import SubImage


class MissingTile(RuntimeError):
    def __init__(self, node_id: int):
        super().__init__(f"no SubImage for leaf node {node_id}")
        self.node_id = node_id


@dataclass
class Frame:
    buffer: np.ndarray          # (height, width, 4) uint8
    width: int
    height: int
    seq: int
    level: int
    field_id: int
    timestamp: float


@dataclass(frozen=True)
class RenderStyle:
    field_id: int = fieldio.FIELD_UX
    value_range: Optional[tuple[float, float]] = None   # None = auto from data
    colormap: str = "diverging"
    px_per_cell: int = 4


def field_of(macro: MacroFields, field_id: int) -> np.ndarray:
    return {
        fieldio.FIELD_RHO: macro.rho,
        fieldio.FIELD_UX: macro.ux,
        fieldio.FIELD_UY: macro.uy,
        fieldio.FIELD_TEMP: macro.temp,
    }[field_id]


def resolve_range(field: np.ndarray, style: RenderStyle) -> tuple[float, float]:
    if style.value_range is not None:
        return style.value_range
    lo, hi = float(field.min()), float(field.max())
    if not lo < hi:
        hi = lo + 1.0
    return lo, hi


def render_leaves(
    tree: PartitionTree,
    macro: MacroFields,
    style: RenderStyle,
    flags: np.ndarray,
    roles: Optional[RoleConfig] = None,
) -> list[SubImage]:
    """One color-mapped SubImage per tree leaf, run as scheduler tasks.

    The value range is resolved once for the whole field so tiles agree;
    rendering itself is per-cell, hence per-tile results equal the matching
    crop of a monolithic render.
    """
    field = field_of(macro, style.field_id)
    lo, hi = resolve_range(field, style)
    cmap = viz.COLORMAPS[style.colormap]
    solid = np.isin(flags, SOLID_FLAGS)
    ny = tree.shape[0]
    px = style.px_per_cell

    def render_one(leaf: TreeNode) -> SubImage:
        r = leaf.rect
        sl = r.slices()
        return viz.color_map(
            field[sl],
            (lo, hi),
            cmap,
            px,
            solid=solid[sl],
            x0=r.x0 * px,
            y0=(ny - r.y0 - r.h) * px,
            node_id=leaf.id,
        )

    graph = TaskGraph()
    for leaf in tree.leaves():
        graph.add(leaf.id, payload=leaf)
    if roles is None:
        results, _ = run_serial(graph, RoleConfig(1, 1), executor=render_one)
    else:
        results, _ = run(graph, roles, executor=render_one)
    return [results[leaf.id] for leaf in tree.leaves()]


def _join(a: SubImage, b: SubImage, node_id: int) -> SubImage:
    x0 = min(a.x0, b.x0)
    y0 = min(a.y0, b.y0)
    x1 = max(a.x0 + a.w, b.x0 + b.w)
    y1 = max(a.y0 + a.h, b.y0 + b.h)
    out = np.zeros((y1 - y0, x1 - x0, 4), dtype=np.uint8)
    for tile in (a, b):
        out[tile.y0 - y0 : tile.y0 - y0 + tile.h, tile.x0 - x0 : tile.x0 - x0 + tile.w] = tile.pixels
    return SubImage(pixels=out, x0=x0, y0=y0, node_id=node_id)


def join_schedule(tree: PartitionTree) -> list[list[int]]:
    """Join waves, deepest first: nodes in one wave join independently."""
    waves: dict[int, list[int]] = {}

    def walk(node: TreeNode, depth: int):
        if node.is_leaf:
            return
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)
        waves.setdefault(depth, []).append(node.id)

    walk(tree.root, 0)
    return [waves[d] for d in sorted(waves, reverse=True)]


def compose(
    tree: PartitionTree,
    subimages: list[SubImage],
    seq: int = 0,
    level: int = 0,
    field_id: int = 0,
    roles: Optional[RoleConfig] = None,
) -> Frame:
    """Bottom-up pairwise join of sibling tiles into the full frame.

    Joins are scheduled through the task engine with child-before-parent
    dependencies, so disjoint subtrees may join concurrently; the result is
    schedule-independent because sibling tiles never overlap.
    """
    by_leaf = {img.node_id: img for img in subimages}
    images: dict[int, SubImage] = {}
    for leaf in tree.leaves():
        if leaf.id not in by_leaf:
            raise MissingTile(leaf.id)
        images[leaf.id] = by_leaf[leaf.id]

    if tree.root.is_leaf:
        root_img = images[tree.root.id]
    else:
        internal = [n for n in tree.nodes if not n.is_leaf]
        graph = TaskGraph()
        for n in internal:
            deps = [c.id for c in (n.left, n.right) if not c.is_leaf]
            graph.add(n.id, payload=n, deps=deps)

        def join_node(node: TreeNode) -> int:
            images[node.id] = _join(
                images[node.left.id], images[node.right.id], node.id
            )
            return node.id

        if roles is None:
            run_serial(graph, RoleConfig(1, 1), executor=join_node)
        else:
            run(graph, roles, executor=join_node)
        root_img = images[tree.root.id]

    return Frame(
        buffer=root_img.pixels,
        width=root_img.w,
        height=root_img.h,
        seq=seq,
        level=level,
        field_id=field_id,
        timestamp=time.time(),
    )


def composition_cost(tree: PartitionTree) -> tuple[int, int]:
    """(critical-path joins, total joins): tree height and leaves minus one."""
    total = len(tree.leaves()) - 1
    return tree.height(), total


def render_frame(
    tree: PartitionTree,
    macro: MacroFields,
    style: RenderStyle,
    flags: np.ndarray,
    seq: int = 0,
    level: int = 0,
    roles: Optional[RoleConfig] = None,
) -> Frame:
    """render_leaves + compose in one call."""
    tiles = render_leaves(tree, macro, style, flags, roles=roles)
    return compose(tree, tiles, seq=seq, level=level, field_id=style.field_id, roles=roles)


def monolithic_render(
    macro: MacroFields, style: RenderStyle, flags: np.ndarray
) -> np.ndarray:
    """Whole-domain render, the compositor's bit-exactness oracle."""
    field = field_of(macro, style.field_id)
    lo, hi = resolve_range(field, style)
    cmap = viz.COLORMAPS[style.colormap]
    solid = np.isin(flags, SOLID_FLAGS)
    return viz.color_map(field, (lo, hi), cmap, style.px_per_cell, solid=solid).pixels
