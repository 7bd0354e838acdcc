"""Budget-driven coarse-to-fine runs with full-multigrid warm starts.

Every steering response starts at the plan's base resolution, runs to
quasi-steadiness, emits a result, then re-grids the whole domain at the
next refinement ratio, seeding the finer level from bilinearly interpolated
macroscopic fields. Levels keep coming while the wall-clock budget lasts;
the level-0 result is guaranteed regardless of budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import lattice
from .lattice import DistributionGrid, FlagField, MacroFields, NumericalBlowup
from .scene import FluidParams, LevelPlan


@dataclass
class LevelResult:
    """One finished (or budget-truncated) refinement level."""

    level: int
    grid: DistributionGrid
    residual: float      # per-step max-norm velocity change at the last check
    elapsed_ms: float    # since the budgeted run started
    steps: int           # steps taken at this level


def params_at_level(params: FluidParams, ratio: int, level: int) -> FluidParams:
    """Lattice parameters for a refined level under diffusive scaling.

    The scene file states level-0 lattice parameters. Refining the grid by r
    per level while keeping the same physical problem (dx -> dx/r,
    dt -> dt/r^2) leaves viscosity and diffusivity unchanged in lattice
    units, scales velocities by 1/r and accelerations by 1/r^3; the Reynolds
    number is preserved, so each level sees the same flow, only sharper.
    """
    if level == 0:
        return params
    r = float(ratio**level)
    return FluidParams(
        tau=params.tau,
        body_force=(params.body_force[0] / r**3, params.body_force[1] / r**3),
        inflow_velocity=(
            params.inflow_velocity[0] / r,
            params.inflow_velocity[1] / r,
        ),
        ambient_temp=params.ambient_temp,
        thermal_diffusivity=params.thermal_diffusivity,
    )


def residual(grid: DistributionGrid, previous: MacroFields) -> float:
    """Max-norm velocity change over fluid cells against a previous snapshot."""
    cur = lattice.macroscopics(grid)
    fluid = grid.fluid_mask()
    if not fluid.any():
        return 0.0
    return float(
        max(
            np.abs(cur.ux[fluid] - previous.ux[fluid]).max(),
            np.abs(cur.uy[fluid] - previous.uy[fluid]).max(),
        )
    )


def _bilinear_refine(coarse: np.ndarray, ratio: int) -> np.ndarray:
    """Interpolate a cell-centered field onto a ratio-times finer grid.

    Uses the linear weights unclamped at the half-cell margin, i.e. linear
    extrapolation beyond the outermost coarse centers, so affine fields are
    reproduced exactly everywhere.
    """
    ny, nx = coarse.shape
    fy, fx = ny * ratio, nx * ratio
    # fine cell centers in coarse index space
    xc = (np.arange(fx) + 0.5) / ratio - 0.5
    yc = (np.arange(fy) + 0.5) / ratio - 0.5
    ix = np.clip(np.floor(xc).astype(int), 0, max(nx - 2, 0))
    iy = np.clip(np.floor(yc).astype(int), 0, max(ny - 2, 0))
    tx = xc - ix
    ty = yc - iy
    ix1 = np.minimum(ix + 1, nx - 1)
    iy1 = np.minimum(iy + 1, ny - 1)
    ty_c = ty[:, None]
    a = coarse[np.ix_(iy, ix)]
    b = coarse[np.ix_(iy, ix1)]
    c = coarse[np.ix_(iy1, ix)]
    d = coarse[np.ix_(iy1, ix1)]
    top = a + (b - a) * tx[None, :]
    bot = c + (d - c) * tx[None, :]
    return top + (bot - top) * ty_c


def prolongate(
    coarse: DistributionGrid,
    ratio: int,
    fine_flags: FlagField,
    velocity_scale: float = 1.0,
    density_fluct_scale: float = 1.0,
) -> DistributionGrid:
    """Seed a ratio-times finer grid from a coarse one.

    Macroscopic rho, u and temp are bilinearly interpolated between cell
    centers and the fine populations initialized at their equilibrium. The
    fine flag field comes from re-rasterizing the scene, not from upsampling,
    so geometry stays crisp. Dirichlet surface temperatures carry over per
    patch (patch means on the coarse grid).

    The scale arguments convert between per-level lattice unit systems
    (see params_at_level); at the defaults this is a pure interpolation.
    """
    if ratio < 2:
        raise ValueError("refinement ratio must be >= 2")
    macro = lattice.macroscopics(coarse)
    rho = 1.0 + (_bilinear_refine(macro.rho, ratio) - 1.0) * density_fluct_scale
    ux = _bilinear_refine(macro.ux, ratio) * velocity_scale
    uy = _bilinear_refine(macro.uy, ratio) * velocity_scale
    temp = _bilinear_refine(macro.temp, ratio)

    solid_fine = np.isin(fine_flags.flags, lattice.SOLID_FLAGS)
    rho = np.where(solid_fine, 1.0, rho)
    ux = np.where(solid_fine, 0.0, ux)
    uy = np.where(solid_fine, 0.0, uy)
    temp = np.where(solid_fine, coarse.ambient_temp, temp)

    bc_temp = np.full(fine_flags.flags.shape, float(coarse.ambient_temp))
    for pid in fine_flags.patches:
        coarse_cells = coarse.patch == pid
        if coarse_cells.any():
            bc_temp[fine_flags.patch == pid] = coarse.bc_temp[coarse_cells].mean()

    return DistributionGrid(
        f=lattice._feq_all(rho, ux, uy),
        g=lattice._geq_all(temp, ux, uy),
        flags=fine_flags.flags,
        patch=fine_flags.patch,
        patches=fine_flags.patches,
        bc_temp=bc_temp,
        ambient_temp=coarse.ambient_temp,
        level=coarse.level + 1,
        time=0,
    )


def level_threshold(plan: LevelPlan, level: int) -> float:
    """Quasi-steadiness tolerance, tightened with the expected error decay.

    Finer levels target lower discretization error, so the per-step residual
    tolerance shrinks by ratio^2 per level (second-order scheme); this also
    keeps stop residuals nonincreasing across a response.
    """
    return plan.residual_threshold / float(plan.refinement_ratio ** (2 * level))


def run_level(
    grid: DistributionGrid,
    params,
    plan: LevelPlan,
    level: int,
    should_cancel: Optional[Callable[[], bool]] = None,
    deadline: Optional[float] = None,
) -> tuple[DistributionGrid, int, float, str]:
    """Step one level until quasi-steady, cancelled, or out of time.

    Returns (grid, steps, last residual rate, outcome) where outcome is one
    of "steady", "cap", "budget", "cancelled".
    """
    nx, ny = grid.nx, grid.ny
    cap = plan.max_steps_factor * max(nx, ny)
    tol = level_threshold(plan, level)
    prev = lattice.macroscopics(grid)
    steps = 0
    rate = float("inf")
    while steps < cap:
        if should_cancel is not None and should_cancel():
            return grid, steps, rate, "cancelled"
        chunk = min(plan.steps_per_check, cap - steps)
        for _ in range(chunk):
            grid = lattice.step(grid, params)
        steps += chunk
        rate = residual(grid, prev) / chunk
        prev = lattice.macroscopics(grid)
        if should_cancel is not None and should_cancel():
            return grid, steps, rate, "cancelled"
        if rate < tol:
            return grid, steps, rate, "steady"
        if deadline is not None and time.perf_counter() >= deadline:
            return grid, steps, rate, "budget"
    return grid, steps, rate, "cap"


def run_budgeted(
    scene,
    plan: LevelPlan,
    emit: Callable[[LevelResult], None],
    should_cancel: Optional[Callable[[], bool]] = None,
) -> Optional[LevelResult]:
    """Answer a steering edit: coarse result first, refine while time allows.

    Level 0 always completes and is always emitted (unless cancelled);
    afterwards each finer level is started only if budget remains and its
    state is emitted even when the budget expires mid-level. Emission order
    is the level order with no gaps. NumericalBlowup is re-raised tagged
    with the failing level.
    """
    t0 = time.perf_counter()
    deadline = t0 + plan.budget_ms / 1000.0

    nx, ny = plan.base_resolution
    flag_field = lattice.rasterize(scene, nx, ny)
    grid = lattice.init_grid(scene, nx, ny, level=0, flag_field=flag_field)

    last: Optional[LevelResult] = None
    for level in range(plan.max_level + 1):
        level_params = params_at_level(scene.params, plan.refinement_ratio, level)
        try:
            grid, steps, rate, outcome = run_level(
                grid, level_params, plan, level,
                should_cancel=should_cancel,
                deadline=None if level == 0 else deadline,
            )
        except NumericalBlowup as exc:
            exc.level = level
            raise
        if outcome == "cancelled":
            return last
        result = LevelResult(
            level=level,
            grid=grid,
            residual=rate,
            elapsed_ms=(time.perf_counter() - t0) * 1000.0,
            steps=steps,
        )
        emit(result)
        last = result
        if level == plan.max_level:
            break
        if outcome == "budget" or time.perf_counter() >= deadline:
            break
        if should_cancel is not None and should_cancel():
            return last
        ratio = plan.refinement_ratio
        fine_nx, fine_ny = nx * ratio ** (level + 1), ny * ratio ** (level + 1)
        fine_flags = lattice.rasterize(scene, fine_nx, fine_ny)
        grid = prolongate(
            grid, ratio, fine_flags,
            velocity_scale=1.0 / ratio,
            density_fluct_scale=1.0 / ratio**2,
        )
    return last
