"""Shared helpers for driving the solver to steady state in tests."""

from __future__ import annotations

import numpy as np

from steerflow import lattice
from steerflow.scene import FluidParams, LevelPlan, Scene, SceneObject


WALL_FRAC = 1 / 16  # wall slab thickness in domain units


def poiseuille_scene(nx: int, ny: int, tau: float = 0.9, u_max: float = 0.05) -> Scene:
    """Body-force channel: periodic in x, no-slip wall slabs top and bottom.

    The walls are scene rects of fixed physical thickness so that every
    refinement level sees the same channel (the bounce-back planes land on
    the same domain coordinate when ny is a multiple of 16).
    """
    h = ny - 2 * round(WALL_FRAC * ny)
    nu = (tau - 0.5) / 3.0
    force = u_max * 8.0 * nu / h**2
    params = FluidParams(tau=tau, body_force=(force, 0.0), inflow_velocity=(0.0, 0.0))
    plan = LevelPlan(base_resolution=(max(nx, 16), max(ny, 16)))
    walls = [
        SceneObject(id="wall_bottom", shape="rect",
                    center=(0.5, WALL_FRAC / 2), size=(1.0, WALL_FRAC)),
        SceneObject(id="wall_top", shape="rect",
                    center=(0.5, 1 - WALL_FRAC / 2), size=(1.0, WALL_FRAC)),
    ]
    return Scene(objects=walls, params=params, plan=plan, boundary="periodic_x")


def run_steps(grid, params, n):
    for _ in range(n):
        grid = lattice.step(grid, params)
    return grid


def run_to_steady(grid, params, rate_tol=1e-10, max_steps=100_000, check_every=50):
    """Step until the per-step max velocity change drops below rate_tol.

    Returns (grid, steps_taken). Raises if the cap is hit first.
    """
    prev = lattice.macroscopics(grid)
    steps = 0
    while steps < max_steps:
        grid = run_steps(grid, params, check_every)
        steps += check_every
        cur = lattice.macroscopics(grid)
        fluid = grid.fluid_mask()
        delta = max(
            np.abs(cur.ux[fluid] - prev.ux[fluid]).max(initial=0.0),
            np.abs(cur.uy[fluid] - prev.uy[fluid]).max(initial=0.0),
        )
        if delta / check_every < rate_tol:
            return grid, steps
        prev = cur
    raise AssertionError(f"no steady state within {max_steps} steps")


def poiseuille_error(grid, params) -> float:
    """Relative L2 error of the x-velocity profile against the analytic one.

    The fluid row range is read off the flags; half-way bounce-back puts the
    no-slip planes on the cell boundaries just outside the fluid rows.
    """
    macro = lattice.macroscopics(grid)
    fluid_rows = np.where((grid.flags == lattice.FLUID).any(axis=1))[0]
    y0 = float(fluid_rows.min())        # bottom no-slip plane, lattice units
    y1 = float(fluid_rows.max() + 1)    # top plane
    yc = fluid_rows + 0.5
    nu = (params.tau - 0.5) / 3.0
    analytic = params.body_force[0] / (2.0 * nu) * (yc - y0) * (y1 - yc)
    profile = macro.ux[fluid_rows, :].mean(axis=1)
    return float(np.linalg.norm(profile - analytic) / np.linalg.norm(analytic))


def random_populations(rng, flags, u_scale=0.05):
    """Valid (positive) random populations: equilibrium of jittered moments."""
    ny, nx = flags.shape
    rho = 1.0 + 0.1 * (rng.random((ny, nx)) - 0.5)
    ux = u_scale * (rng.random((ny, nx)) - 0.5)
    uy = u_scale * (rng.random((ny, nx)) - 0.5)
    f = np.empty((9, ny, nx))
    for i in range(9):
        f[i] = lattice.equilibrium(rho, (ux, uy), i)
    return f


def random_scene(rng, n_objects=3) -> Scene:
    """Random channel scene with circles and rects kept inside the domain."""
    objects = []
    for k in range(n_objects):
        cx, cy = 0.25 + 0.5 * rng.random(2)
        if rng.random() < 0.5:
            r = 0.05 + 0.1 * rng.random()
            objects.append(
                SceneObject(id=f"obj{k}", shape="circle", center=(cx, cy), size=r)
            )
        else:
            w, h = 0.08 + 0.2 * rng.random(2)
            objects.append(
                SceneObject(id=f"obj{k}", shape="rect", center=(cx, cy), size=(w, h))
            )
    return Scene(objects=objects, params=FluidParams(tau=0.8))
