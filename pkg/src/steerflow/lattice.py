"""D2Q9 BGK lattice-Boltzmann solver with a passive D2Q5 temperature scalar.

Arrays are float64, shaped (ndir, ny, nx) for populations and (ny, nx) for
per-cell fields, with x varying fastest. One step is collide (pure local
algebra) followed by stream (pure data movement with a one-cell pull
neighborhood). Both phases are exposed as region kernels so that a
partitioned run over halo-extended blocks reproduces the monolithic step
bit for bit; see partition.step_partitioned.

Boundary rules: half-way bounce-back at Obstacle/Wall/ThermalActive cells,
fixed equilibrium at Inflow cells, zero-gradient copy of the west neighbor
at Outflow cells, periodic wrap elsewhere. Temperature uses bounce-back
(adiabatic) at plain solids and anti-bounce-back (Dirichlet) at
ThermalActive cells, whose target temperatures live in grid.bc_temp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import DegenerateGeometry, FluidParams  # noqa: F401  (re-export)

# flag codes
FLUID = 0
OBSTACLE = 1
INFLOW = 2
OUTFLOW = 3
WALL = 4
THERMAL = 5

SOLID_FLAGS = (OBSTACLE, WALL, THERMAL)

# D2Q9 stencil: rest, +x, +y, -x, -y, then diagonals (+x+y, -x+y, -x-y, +x-y)
EX = np.array([0, 1, 0, -1, 0, 1, -1, -1, 1])
EY = np.array([0, 0, 1, 0, -1, 1, 1, -1, -1])
W = np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4)
OPP = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6])

# D2Q5 scalar stencil shares directions 0..4
WT = np.array([1 / 3, 1 / 6, 1 / 6, 1 / 6, 1 / 6])
OPP_T = np.array([0, 3, 4, 1, 2])


class NumericalBlowup(RuntimeError):
    """Non-finite population or non-positive density on a fluid cell."""


def tau_thermal(diffusivity: float) -> float:
    """Relaxation time of the D2Q5 scalar for a given lattice diffusivity."""
    return 3.0 * diffusivity + 0.5


def equilibrium(rho, u, i: int):
    """D2Q9 equilibrium population for direction i.

    rho and the two components of u may be scalars or broadcastable arrays.
    """
    if not 0 <= i <= 8:
        raise IndexError(f"direction index {i} outside 0..8")
    ux, uy = u[0], u[1]
    eu = EX[i] * ux + EY[i] * uy
    usq = ux * ux + uy * uy
    return W[i] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq)


def _feq_all(rho, ux, uy):
    """Stacked equilibrium populations, shape (9,) + rho.shape."""
    out = np.empty((9,) + np.shape(rho))
    usq = ux * ux + uy * uy
    for i in range(9):
        eu = EX[i] * ux + EY[i] * uy
        out[i] = W[i] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq)
    return out


def _geq_all(temp, ux, uy):
    """Stacked D2Q5 equilibrium for the temperature scalar."""
    out = np.empty((5,) + np.shape(temp))
    for i in range(5):
        eu = EX[i] * ux + EY[i] * uy
        out[i] = WT[i] * temp * (1.0 + 3.0 * eu)
    return out


@dataclass
class FlagField:
    """Rasterized cell flags plus the manikin surface-patch map.

    patch holds a patch id per cell (-1 outside thermally active cells);
    patches maps patch id -> (object id, quadrant index).
    """

    flags: np.ndarray
    patch: np.ndarray
    patches: dict[int, tuple[str, int]] = field(default_factory=dict)


@dataclass
class MacroFields:
    """Per-cell density, velocity and temperature."""

    rho: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    temp: np.ndarray

    def speed(self) -> np.ndarray:
        return np.sqrt(self.ux * self.ux + self.uy * self.uy)


@dataclass
class DistributionGrid:
    """Simulation state at one refinement level.

    The flags array is treated as immutable between scene edits; geometry
    changes build a fresh FlagField instead of mutating in place.
    """

    f: np.ndarray          # (9, ny, nx)
    g: np.ndarray          # (5, ny, nx)
    flags: np.ndarray      # (ny, nx) int8
    patch: np.ndarray      # (ny, nx) int32, -1 where not thermally active
    patches: dict[int, tuple[str, int]]
    bc_temp: np.ndarray    # (ny, nx) Dirichlet temperature at THERMAL cells
    ambient_temp: float
    level: int = 0
    time: int = 0

    @property
    def nx(self) -> int:
        return self.f.shape[2]

    @property
    def ny(self) -> int:
        return self.f.shape[1]

    def fluid_mask(self) -> np.ndarray:
        return self.flags == FLUID

    def copy(self) -> "DistributionGrid":
        return DistributionGrid(
            f=self.f.copy(),
            g=self.g.copy(),
            flags=self.flags,
            patch=self.patch,
            patches=self.patches,
            bc_temp=self.bc_temp.copy(),
            ambient_temp=self.ambient_temp,
            level=self.level,
            time=self.time,
        )


def rasterize(scene, nx: int, ny: int) -> FlagField:
    """Rasterize scene geometry onto an nx-by-ny flag field.

    A cell is Obstacle iff its center lies inside any non-manikin object
    (boundary-inclusive). Manikin cells become Obstacle in the interior and
    ThermalActive on the one-cell-thick boundary, with a stable patch id per
    (manikin, quadrant). Afterwards the domain perimeter is stamped with the
    scene's boundary convention; channel means left column Inflow, right
    column Outflow and Wall rows on top/bottom (walls win the corners).
    """
    flags = np.zeros((ny, nx), dtype=np.int8)
    patch = np.full((ny, nx), -1, dtype=np.int32)

    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    cx, cy = np.meshgrid(xs, ys)

    for obj in scene.objects:
        if obj.shape == "circle":
            r = float(obj.size)
            if r <= 0:
                raise DegenerateGeometry(f"circle {obj.id!r} has radius {r}")
            inside = (cx - obj.center[0]) ** 2 + (cy - obj.center[1]) ** 2 <= r * r
        else:
            w, h = obj.size
            if w <= 0 or h <= 0:
                raise DegenerateGeometry(f"rect {obj.id!r} has size {w}x{h}")
            inside = (np.abs(cx - obj.center[0]) <= w / 2) & (
                np.abs(cy - obj.center[1]) <= h / 2
            )
        if obj.kind == "obstacle":
            flags[inside] = OBSTACLE
            patch[inside] = -1

    patches: dict[int, tuple[str, int]] = {}
    for mi, obj in enumerate(scene.manikins()):
        inside = np.zeros((ny, nx), dtype=bool)
        if obj.shape == "circle":
            r = float(obj.size)
            inside = (cx - obj.center[0]) ** 2 + (cy - obj.center[1]) ** 2 <= r * r
        else:
            w, h = obj.size
            inside = (np.abs(cx - obj.center[0]) <= w / 2) & (
                np.abs(cy - obj.center[1]) <= h / 2
            )
        # boundary = inside cell with at least one 4-neighbor outside
        padded = np.pad(inside, 1, mode="constant", constant_values=False)
        core = (
            padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
        )
        boundary = inside & ~core
        interior = inside & core
        flags[interior] = OBSTACLE
        flags[boundary] = THERMAL
        ang = np.arctan2(cy - obj.center[1], cx - obj.center[0])
        quadrant = (np.floor((ang % (2 * np.pi)) / (np.pi / 2)).astype(np.int32)) % 4
        for q in range(4):
            pid = 4 * mi + q
            patches[pid] = (obj.id, q)
            patch[boundary & (quadrant == q)] = pid

    boundary_mode = getattr(scene, "boundary", "channel")
    if boundary_mode == "channel":
        flags[:, 0] = INFLOW
        flags[:, -1] = OUTFLOW
        flags[0, :] = WALL
        flags[-1, :] = WALL
        patch[:, 0] = patch[:, -1] = -1
        patch[0, :] = patch[-1, :] = -1
    elif boundary_mode == "periodic_x":
        flags[0, :] = WALL
        flags[-1, :] = WALL
        patch[0, :] = patch[-1, :] = -1

    # drop patches that rasterized to zero cells at this resolution
    present = set(np.unique(patch)) - {-1}
    patches = {pid: meta for pid, meta in patches.items() if pid in present}
    return FlagField(flags=flags, patch=patch, patches=patches)


def init_grid(
    scene, nx: int, ny: int, level: int = 0, flag_field: FlagField | None = None
) -> DistributionGrid:
    """Cold-start grid: equilibrium at rest, inflow cells at inflow velocity."""
    ff = flag_field if flag_field is not None else rasterize(scene, nx, ny)
    params: FluidParams = scene.params
    rho = np.ones((ny, nx))
    ux = np.zeros((ny, nx))
    uy = np.zeros((ny, nx))
    inflow = ff.flags == INFLOW
    ux[inflow] = params.inflow_velocity[0]
    uy[inflow] = params.inflow_velocity[1]
    temp = np.full((ny, nx), float(params.ambient_temp))
    return DistributionGrid(
        f=_feq_all(rho, ux, uy),
        g=_geq_all(temp, ux, uy),
        flags=ff.flags,
        patch=ff.patch,
        patches=ff.patches,
        bc_temp=np.full((ny, nx), float(params.ambient_temp)),
        ambient_temp=float(params.ambient_temp),
        level=level,
        time=0,
    )


def _inflow_populations(params: FluidParams) -> tuple[np.ndarray, np.ndarray]:
    """Fixed equilibrium populations held at inflow cells."""
    ux, uy = params.inflow_velocity
    f_in = np.array([equilibrium(1.0, (ux, uy), i) for i in range(9)])
    g_in = np.array(
        [WT[i] * params.ambient_temp * (1.0 + 3.0 * (EX[i] * ux + EY[i] * uy)) for i in range(5)]
    )
    return f_in, g_in


def collide(f, g, flags, bc_temp, params: FluidParams, check: bool = True):
    """Post-collision populations for an arbitrary region.

    Purely elementwise: the result for each cell depends only on that cell,
    so computing per sub-block is bit-identical to the whole-domain call.
    BGK relaxation with Guo forcing on fluid cells; solids pass through
    untouched; inflow cells are pinned to their equilibrium.
    """
    fluid = flags == FLUID
    rho = f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8]
    if check:
        if not np.isfinite(f).all():
            raise NumericalBlowup("non-finite population")
        if fluid.any() and not (rho[fluid] > 0).all():
            raise NumericalBlowup("non-positive density on a fluid cell")
    inv_rho = 1.0 / rho
    # momentum velocity (opposite directions paired so rest states cancel
    # exactly), then the Guo half-force shift for the collision velocity
    gx, gy = params.body_force
    ux = ((f[1] - f[3]) + (f[5] - f[7]) + (f[8] - f[6])) * inv_rho + 0.5 * gx
    uy = ((f[2] - f[4]) + (f[5] - f[7]) + (f[6] - f[8])) * inv_rho + 0.5 * gy

    tau = params.tau
    inv_tau = 1.0 / tau
    force_scale = 1.0 - 0.5 * inv_tau
    usq = ux * ux + uy * uy
    fx = rho * gx
    fy = rho * gy

    fstar = np.empty_like(f)
    for i in range(9):
        eu = EX[i] * ux + EY[i] * uy
        feq = W[i] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq)
        src = (
            force_scale
            * W[i]
            * (3.0 * ((EX[i] - ux) * fx + (EY[i] - uy) * fy) + 9.0 * eu * (EX[i] * fx + EY[i] * fy))
        )
        fstar[i] = np.where(fluid, f[i] - (f[i] - feq) * inv_tau + src, f[i])

    temp = g[0] + g[1] + g[2] + g[3] + g[4]
    inv_tau_g = 1.0 / tau_thermal(params.thermal_diffusivity)
    gstar = np.empty_like(g)
    for i in range(5):
        geq = WT[i] * temp * (1.0 + 3.0 * (EX[i] * ux + EY[i] * uy))
        gstar[i] = np.where(fluid, g[i] - (g[i] - geq) * inv_tau_g, g[i])

    inflow = flags == INFLOW
    if inflow.any():
        f_in, g_in = _inflow_populations(params)
        for i in range(9):
            fstar[i][inflow] = f_in[i]
        for i in range(5):
            gstar[i][inflow] = g_in[i]
    return fstar, gstar


def stream(fstar_ext, gstar_ext, flags_ext, bc_temp_ext, params: FluidParams):
    """Streaming pull over a halo-extended region; returns the center block.

    Inputs carry a one-cell ring (shape (+2, +2) relative to the output).
    Pure data movement plus the boundary rules, so identical ring contents
    give bit-identical results regardless of how the domain was blocked.
    """
    ny = fstar_ext.shape[1] - 2
    nx = fstar_ext.shape[2] - 2
    C = (slice(1, -1), slice(1, -1))
    flags_c = flags_ext[C]
    solid_ext = (
        (flags_ext == OBSTACLE) | (flags_ext == WALL) | (flags_ext == THERMAL)
    )

    def win(arr, i, ex_tab, ey_tab):
        y0 = 1 - ey_tab[i]
        x0 = 1 - ex_tab[i]
        return arr[y0 : y0 + ny, x0 : x0 + nx]

    fnew = np.empty((9, ny, nx))
    fnew[0] = fstar_ext[0][C]
    for i in range(1, 9):
        src = win(fstar_ext[i], i, EX, EY)
        from_solid = win(solid_ext, i, EX, EY)
        fnew[i] = np.where(from_solid, fstar_ext[OPP[i]][C], src)

    gnew = np.empty((5, ny, nx))
    gnew[0] = gstar_ext[0][C]
    for i in range(1, 5):
        src = win(gstar_ext[i], i, EX, EY)
        src_flags = win(flags_ext, i, EX, EY)
        bb = gstar_ext[OPP_T[i]][C]
        anti = -bb + 2.0 * WT[i] * win(bc_temp_ext, i, EX, EY)
        gnew[i] = np.where(
            src_flags == THERMAL,
            anti,
            np.where((src_flags == OBSTACLE) | (src_flags == WALL), bb, src),
        )

    solid_c = solid_ext[C]
    if solid_c.any():
        for i in range(9):
            fnew[i][solid_c] = fstar_ext[i][C][solid_c]
        for i in range(5):
            gnew[i][solid_c] = gstar_ext[i][C][solid_c]

    inflow_c = flags_c == INFLOW
    if inflow_c.any():
        f_in, g_in = _inflow_populations(params)
        for i in range(9):
            fnew[i][inflow_c] = f_in[i]
        for i in range(5):
            gnew[i][inflow_c] = g_in[i]

    outflow_c = flags_c == OUTFLOW
    if outflow_c.any():
        # zero-gradient: copy the west (inward) neighbor's post-collision state
        west_f = fstar_ext[:, 1:-1, 0:-2]
        west_g = gstar_ext[:, 1:-1, 0:-2]
        for i in range(9):
            fnew[i][outflow_c] = west_f[i][outflow_c]
        for i in range(5):
            gnew[i][outflow_c] = west_g[i][outflow_c]
    return fnew, gnew


def _pad_wrap(a: np.ndarray) -> np.ndarray:
    if a.ndim == 3:
        return np.pad(a, ((0, 0), (1, 1), (1, 1)), mode="wrap")
    return np.pad(a, 1, mode="wrap")


def step(grid: DistributionGrid, params: FluidParams) -> DistributionGrid:
    """One collide-and-stream cycle over the whole domain."""
    fstar, gstar = collide(grid.f, grid.g, grid.flags, grid.bc_temp, params)
    fnew, gnew = stream(
        _pad_wrap(fstar),
        _pad_wrap(gstar),
        _pad_wrap(grid.flags),
        _pad_wrap(grid.bc_temp),
        params,
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


def macroscopics(grid: DistributionGrid) -> MacroFields:
    """Moments of the populations; non-fluid cells carry fill values."""
    f = grid.f
    fluid = grid.fluid_mask()
    rho_raw = f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8]
    rho = np.where(fluid, rho_raw, 1.0)
    inv_rho = 1.0 / rho
    ux = np.where(fluid, ((f[1] - f[3]) + (f[5] - f[7]) + (f[8] - f[6])) * inv_rho, 0.0)
    uy = np.where(fluid, ((f[2] - f[4]) + (f[5] - f[7]) + (f[6] - f[8])) * inv_rho, 0.0)
    g = grid.g
    temp = np.where(fluid, g[0] + g[1] + g[2] + g[3] + g[4], grid.ambient_temp)
    return MacroFields(rho=rho, ux=ux, uy=uy, temp=temp)


def poiseuille_profile(ny: int, force: float, tau: float) -> np.ndarray:
    """Analytic steady channel profile at the fluid rows of a walled grid.

    Walls occupy rows 0 and ny-1; half-way bounce-back puts the no-slip
    planes half a cell beyond the adjacent fluid rows, giving a channel
    width of ny-2 lattice units.
    """
    nu = (tau - 0.5) / 3.0
    y = np.arange(1, ny - 1) + 0.5  # fluid cell centers, lattice units
    y0, y1 = 1.0, float(ny - 1)     # no-slip plane positions
    return force / (2.0 * nu) * (y - y0) * (y1 - y)
