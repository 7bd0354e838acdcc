"""BSP decomposition of the grid into solver tasks.

build_tree splits the cell-index domain by the longest-axis median until
leaves are small enough; coalesce merges obstacle-dominated leaves into
neighbors so every task carries real work; halo_plan derives the per-step
inter-task cell transfers needed by the streaming pull. step_partitioned
executes one solver step task by task through those transfers and is
bit-identical to lattice.step, which the tests pin down.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lattice
from .lattice import FLUID, OUTFLOW, DistributionGrid

DEFAULT_FLOPS_PER_CELL = 200


@dataclass(frozen=True)
class Rect:
    """Axis-aligned cell-index rectangle [x0, x0+w) x [y0, y0+h)."""

    x0: int
    y0: int
    w: int
    h: int

    def cells(self) -> int:
        return self.w * self.h

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y0 + self.h), slice(self.x0, self.x0 + self.w)

    def shares_edge(self, other: "Rect") -> int:
        """Length of the shared edge in cells (0 if not edge-adjacent)."""
        if self.x0 + self.w == other.x0 or other.x0 + other.w == self.x0:
            lo = max(self.y0, other.y0)
            hi = min(self.y0 + self.h, other.y0 + other.h)
            return max(0, hi - lo)
        if self.y0 + self.h == other.y0 or other.y0 + other.h == self.y0:
            lo = max(self.x0, other.x0)
            hi = min(self.x0 + self.w, other.x0 + other.w)
            return max(0, hi - lo)
        return 0


@dataclass
class TreeNode:
    id: int
    rect: Rect
    fluid_cells: int
    work_estimate: float
    axis: Optional[int] = None      # 0 = split in x, 1 = split in y
    pos: Optional[int] = None       # split index along the axis
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class PartitionTree:
    root: TreeNode
    nodes: list[TreeNode]
    shape: tuple[int, int]          # (ny, nx)

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.is_leaf]

    def height(self) -> int:
        def h(n):
            return 0 if n.is_leaf else 1 + max(h(n.left), h(n.right))

        return h(self.root)

    def to_json(self) -> str:
        def enc(n):
            d = {
                "id": n.id,
                "rect": [n.rect.x0, n.rect.y0, n.rect.w, n.rect.h],
                "fluid_cells": n.fluid_cells,
                "work": n.work_estimate,
            }
            if not n.is_leaf:
                d["axis"] = n.axis
                d["pos"] = n.pos
                d["children"] = [enc(n.left), enc(n.right)]
            return d

        return json.dumps({"shape": list(self.shape), "root": enc(self.root)})


@dataclass
class TaskSpec:
    """A schedulable unit: a contiguous set of leaf rectangles."""

    id: int
    rects: list[Rect]
    fluid_cells: int
    cells: int
    work_estimate: float
    halo: list[tuple[int, int]] = field(default_factory=list)  # (neighbor, edge cells)

    def fluid_fraction(self) -> float:
        return self.fluid_cells / self.cells if self.cells else 0.0


@dataclass(frozen=True)
class HaloCopy:
    """One directed strip transfer: post-collision cells src -> dst."""

    src: int
    dst: int
    cells: tuple[tuple[int, int], ...]  # (y, x) global coords


def build_tree(
    flags: np.ndarray, max_leaf_cells: int, flops_per_cell: int = DEFAULT_FLOPS_PER_CELL
) -> PartitionTree:
    """Recursive longest-axis median split until leaves fit max_leaf_cells."""
    if max_leaf_cells < 16:
        raise ValueError("max_leaf_cells must be >= 16")
    ny, nx = flags.shape
    fluid = (flags == FLUID).astype(np.int64)
    # summed-area table for O(1) fluid counts per rect
    sat = np.zeros((ny + 1, nx + 1), dtype=np.int64)
    sat[1:, 1:] = fluid.cumsum(0).cumsum(1)

    def fluid_count(r: Rect) -> int:
        return int(
            sat[r.y0 + r.h, r.x0 + r.w]
            - sat[r.y0, r.x0 + r.w]
            - sat[r.y0 + r.h, r.x0]
            + sat[r.y0, r.x0]
        )

    nodes: list[TreeNode] = []

    def build(rect: Rect) -> TreeNode:
        node = TreeNode(
            id=len(nodes),
            rect=rect,
            fluid_cells=fluid_count(rect),
            work_estimate=float(fluid_count(rect) * flops_per_cell),
        )
        nodes.append(node)
        if rect.cells() <= max_leaf_cells:
            return node
        if rect.w >= rect.h:
            node.axis, node.pos = 0, rect.x0 + rect.w // 2
            a = Rect(rect.x0, rect.y0, rect.w // 2, rect.h)
            b = Rect(node.pos, rect.y0, rect.w - rect.w // 2, rect.h)
        else:
            node.axis, node.pos = 1, rect.y0 + rect.h // 2
            a = Rect(rect.x0, rect.y0, rect.w, rect.h // 2)
            b = Rect(rect.x0, node.pos, rect.w, rect.h - rect.h // 2)
        node.left = build(a)
        node.right = build(b)
        return node

    root = build(Rect(0, 0, nx, ny))
    return PartitionTree(root=root, nodes=nodes, shape=(ny, nx))


def estimate_work(node: TreeNode, flops_per_cell: int = DEFAULT_FLOPS_PER_CELL) -> float:
    """Work in flops; obstacle cells cost nothing."""
    return float(node.fluid_cells * flops_per_cell)


def _adjacent(a: TaskSpec, b: TaskSpec) -> int:
    return sum(ra.shares_edge(rb) for ra in a.rects for rb in b.rects)


def coalesce(tree: PartitionTree, theta: float) -> list[TaskSpec]:
    """Merge fluid-poor leaves into edge-adjacent neighbors, bottom-up.

    A task below the theta fluid fraction is absorbed by its smallest-work
    adjacent task in the same subtree. Zero-work merges keep the result
    open, so connected obstacle regions coagulate freely; as soon as a merge
    touches fluid-bearing work the unit is closed (a maximal mergeable
    unit), which stops dead regions from snowballing through one working
    task after another and keeps the remaining work spread evenly. Task ids
    are renumbered scanline-deterministically at the end.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must be in [0, 1]")
    counter = [0]
    tasks: dict[int, TaskSpec] = {}
    closed: set[int] = set()

    def new_task(rect: Rect, node: TreeNode) -> int:
        tid = counter[0]
        counter[0] += 1
        tasks[tid] = TaskSpec(
            id=tid,
            rects=[rect],
            fluid_cells=node.fluid_cells,
            cells=rect.cells(),
            work_estimate=node.work_estimate,
        )
        return tid

    def merge_pass(group: set[int]) -> None:
        while True:
            below = sorted(
                (t for t in group
                 if t not in closed and tasks[t].fluid_fraction() < theta),
                key=lambda t: (tasks[t].work_estimate, t),
            )
            merged = False
            for tid in below:
                cands = [
                    o for o in group
                    if o != tid and o not in closed
                    and _adjacent(tasks[tid], tasks[o]) > 0
                ]
                if not cands:
                    continue
                target = min(cands, key=lambda o: (tasks[o].work_estimate, o))
                t, o = tasks[tid], tasks[target]
                if t.work_estimate > 0 or o.work_estimate > 0:
                    closed.add(target)
                o.rects = o.rects + t.rects
                o.fluid_cells += t.fluid_cells
                o.cells += t.cells
                o.work_estimate += t.work_estimate
                del tasks[tid]
                group.discard(tid)
                merged = True
                break
            if not merged:
                return

    def walk(node: TreeNode) -> set[int]:
        if node.is_leaf:
            return {new_task(node.rect, node)}
        group = walk(node.left) | walk(node.right)
        merge_pass(group)
        return group

    walk(tree.root)

    final = sorted(
        tasks.values(), key=lambda t: min((r.y0, r.x0) for r in t.rects)
    )
    for new_id, t in enumerate(final):
        t.id = new_id
        t.rects = sorted(t.rects, key=lambda r: (r.y0, r.x0))
    for a in final:
        a.halo = [
            (b.id, _adjacent(a, b)) for b in final if b.id != a.id and _adjacent(a, b) > 0
        ]
    return final


def uniform_blocks(flags: np.ndarray, n_blocks_x: int, n_blocks_y: int) -> list[TaskSpec]:
    """Regular block decomposition, the layout whose imbalance coalescing fixes."""
    ny, nx = flags.shape
    fluid = flags == FLUID
    tasks = []
    xs = np.linspace(0, nx, n_blocks_x + 1).astype(int)
    ys = np.linspace(0, ny, n_blocks_y + 1).astype(int)
    tid = 0
    for j in range(n_blocks_y):
        for i in range(n_blocks_x):
            r = Rect(int(xs[i]), int(ys[j]), int(xs[i + 1] - xs[i]), int(ys[j + 1] - ys[j]))
            fc = int(fluid[r.slices()].sum())
            tasks.append(
                TaskSpec(
                    id=tid,
                    rects=[r],
                    fluid_cells=fc,
                    cells=r.cells(),
                    work_estimate=float(fc * DEFAULT_FLOPS_PER_CELL),
                )
            )
            tid += 1
    return tasks


def owner_map(tasks: list[TaskSpec], shape: tuple[int, int]) -> np.ndarray:
    ny, nx = shape
    owner = np.full((ny, nx), -1, dtype=np.int32)
    for t in tasks:
        for r in t.rects:
            owner[r.slices()] = t.id
    if (owner < 0).any():
        raise ValueError("tasks do not cover the domain")
    return owner


def halo_plan(
    tasks: list[TaskSpec], flags: np.ndarray
) -> list[HaloCopy]:
    """Per-step exchange schedule for the streaming pull.

    A task needs a foreign cell's post-collision state when one of its fluid
    cells pulls from it or one of its outflow cells copies from it, so a
    strip is the full shared face (boundary cells included) plus any corner
    cells diagonal pulls reach. Strips are grouped per (src, dst) pair, so
    each inter-task face appears exactly once per direction; indices wrap
    periodically like the stream kernel.
    """
    ny, nx = flags.shape
    owner = owner_map(tasks, (ny, nx))
    needed: dict[tuple[int, int], set[tuple[int, int]]] = {}

    def need(dst: int, gy: int, gx: int) -> None:
        src = int(owner[gy, gx])
        if src != dst:
            needed.setdefault((src, dst), set()).add((gy, gx))

    for t in tasks:
        for r in t.rects:
            for y in range(r.y0, r.y0 + r.h):
                for x in range(r.x0, r.x0 + r.w):
                    if flags[y, x] == FLUID:
                        for i in range(1, 9):
                            need(t.id, (y - lattice.EY[i]) % ny, (x - lattice.EX[i]) % nx)
                    elif flags[y, x] == OUTFLOW:
                        need(t.id, y, (x - 1) % nx)
    plan = [
        HaloCopy(src=src, dst=dst, cells=tuple(sorted(cells)))
        for (src, dst), cells in sorted(needed.items())
    ]
    return plan


def step_partitioned(
    grid: DistributionGrid,
    params,
    tasks: list[TaskSpec],
    plan: list[HaloCopy],
) -> DistributionGrid:
    """One solver step executed per task with explicit halo transfers.

    Collision runs task-local; the plan then carries post-collision strips
    between tasks; streaming runs per rectangle on halo-extended blocks.
    Ring cells not owned and not delivered stay NaN, so an incomplete plan
    is caught by the final finiteness check instead of silently diverging.
    """
    ny, nx = grid.ny, grid.nx
    owner = owner_map(tasks, (ny, nx))
    fstar = np.full_like(grid.f, np.nan)
    gstar = np.full_like(grid.g, np.nan)
    for t in tasks:
        for r in t.rects:
            sl = r.slices()
            fs, gs = lattice.collide(
                grid.f[(slice(None),) + sl],
                grid.g[(slice(None),) + sl],
                grid.flags[sl],
                grid.bc_temp[sl],
                params,
            )
            fstar[(slice(None),) + sl] = fs
            gstar[(slice(None),) + sl] = gs

    # exchange: received[(dst)][(y, x)] -> column vectors of fstar/gstar
    received: dict[int, dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]] = {
        t.id: {} for t in tasks
    }
    for copy in plan:
        box = received[copy.dst]
        for (y, x) in copy.cells:
            box[(y, x)] = (fstar[:, y, x].copy(), gstar[:, y, x].copy())

    flags_pad = np.pad(grid.flags, 1, mode="wrap")
    bct_pad = np.pad(grid.bc_temp, 1, mode="wrap")
    fnew = np.empty_like(grid.f)
    gnew = np.empty_like(grid.g)
    for t in tasks:
        box = received[t.id]
        for r in t.rects:
            h, w = r.h, r.w
            fext = np.full((9, h + 2, w + 2), np.nan)
            gext = np.full((5, h + 2, w + 2), np.nan)
            sl = r.slices()
            fext[:, 1:-1, 1:-1] = fstar[(slice(None),) + sl]
            gext[:, 1:-1, 1:-1] = gstar[(slice(None),) + sl]
            for iy in range(h + 2):
                for ix in range(w + 2):
                    if 0 < iy < h + 1 and 0 < ix < w + 1:
                        continue
                    gy = (r.y0 + iy - 1) % ny
                    gx = (r.x0 + ix - 1) % nx
                    if owner[gy, gx] == t.id:
                        fext[:, iy, ix] = fstar[:, gy, gx]
                        gext[:, iy, ix] = gstar[:, gy, gx]
                    elif (gy, gx) in box:
                        fv, gv = box[(gy, gx)]
                        fext[:, iy, ix] = fv
                        gext[:, iy, ix] = gv
            flags_ext = flags_pad[r.y0 : r.y0 + h + 2, r.x0 : r.x0 + w + 2]
            bct_ext = bct_pad[r.y0 : r.y0 + h + 2, r.x0 : r.x0 + w + 2]
            fn, gn = lattice.stream(fext, gext, flags_ext, bct_ext, params)
            fnew[(slice(None),) + sl] = fn
            gnew[(slice(None),) + sl] = gn

    if not np.isfinite(fnew).all():
        raise lattice.NumericalBlowup(
            "partitioned step left non-finite cells (incomplete halo plan?)"
        )
    return DistributionGrid(
        f=fnew,
        g=gnew,
        flags=grid.flags,
        patch=grid.patch,
        patches=grid.patches,
        bc_temp=grid.bc_temp,
        ambient_temp=grid.ambient_temp,
        level=grid.level,
        time=grid.time + 1,
    )


def tasks_to_json(tasks: list[TaskSpec]) -> str:
    return json.dumps(
        [
            {
                "id": t.id,
                "rects": [[r.x0, r.y0, r.w, r.h] for r in t.rects],
                "fluid_cells": t.fluid_cells,
                "cells": t.cells,
                "work": t.work_estimate,
                "halo": [[n, c] for n, c in t.halo],
            }
            for t in tasks
        ]
    )
