"""Coupling between the flow/temperature solver and a thermoregulation model.

The solver side delivers per-patch air velocity and temperature at the
manikin surface; the regulator answers with resultant surface temperatures
and heat fluxes that become Dirichlet boundary conditions for the next
batch of solver steps. The regulator here is a deliberately plain two-node
(core/skin) surrogate behind a small interface, so a richer physiology
model can be swapped in; none of its coefficients claim fidelity.

Units: temperatures in degrees Celsius; fluxes in nominal W/m^2 with patch
areas counted in cells and normalized to the whole surface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional

import numpy as np

from . import lattice
from .lattice import FLUID, DistributionGrid, MacroFields

NEUTRAL_SKIN_C = 33.7
VOTE_HALF_WIDTH_C = 1.0
ENVELOPE_C = (20.0, 45.0)


class NoManikin(ValueError):
    """Scene has no thermally active surface."""


class ModelDiverged(RuntimeError):
    """Regulator temperatures left the operating envelope."""


@dataclass(frozen=True)
class SurfaceSample:
    patch_id: int
    velocity: float      # local air speed, lattice units
    temperature: float   # local air temperature, deg C
    area: int            # patch size in cells


@dataclass(frozen=True)
class RegulatorState:
    """Two-node (core/skin) state plus its model parameters.

    h0 is a NEAR-WALL exchange coefficient: the air the solver hands back is
    sampled half a cell from the skin plane, where the sustainable
    temperature gap is a few percent of the skin-to-ambient difference, so
    h0 is much larger than a free-stream convection coefficient would be
    (metabolic_rate / h0 ~ 0.45 K at the defaults). The conductance is high
    for the same reason: it must hold the skin inside the envelope while
    cold unwarmed air sits right at the surface. All values are declared
    placeholders, tunable per scene, with no physiological fidelity claim.
    """

    core_temp: float = 36.6
    skin_temp: float = NEUTRAL_SKIN_C
    conductance: float = 60.0          # core-skin, W/K per unit area
    h0: float = 200.0                  # near-wall skin-air exchange coefficient
    velocity_gain: float = 10.0        # h = h0 * (1 + gain * |u|)
    metabolic_rate: float = 58.0       # W per unit area
    core_capacity: float = 400.0
    skin_capacity: float = 160.0

    def __post_init__(self):
        lo, hi = ENVELOPE_C
        for name, t in (("core", self.core_temp), ("skin", self.skin_temp)):
            if not (lo <= t <= hi) or not math.isfinite(t):
                raise ModelDiverged(f"{name} temperature {t:.2f} C outside {ENVELOPE_C}")


@dataclass(frozen=True)
class SurfaceResponse:
    surface_temp: dict[int, float]   # per patch, deg C
    flux: dict[int, float]           # per patch, nominal W/m^2
    total_flux: float                # area-weighted sum over patches


def sample_surface(grid: DistributionGrid, macro: MacroFields) -> list[SurfaceSample]:
    """Area-weighted air state adjacent to each manikin surface patch.

    Every patch cell averages speed and temperature over its 4-neighborhood
    fluid cells; the patch sample is the mean over its cells (cells without
    a fluid neighbor do not contribute).
    """
    if not grid.patches:
        raise NoManikin("no thermally active patches in the grid")
    speed = macro.speed()
    ny, nx = grid.flags.shape
    samples = []
    for pid in sorted(grid.patches):
        ys, xs = np.nonzero(grid.patch == pid)
        vel_terms = []
        temp_terms = []
        for y, x in zip(ys, xs):
            vs = []
            ts = []
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                y2, x2 = y + dy, x + dx
                if 0 <= y2 < ny and 0 <= x2 < nx and grid.flags[y2, x2] == FLUID:
                    vs.append(speed[y2, x2])
                    ts.append(macro.temp[y2, x2])
            if vs:
                vel_terms.append(sum(vs) / len(vs))
                temp_terms.append(sum(ts) / len(ts))
        if vel_terms:
            vel = float(sum(vel_terms) / len(vel_terms))
            temp = float(sum(temp_terms) / len(temp_terms))
        else:
            vel, temp = 0.0, float(grid.ambient_temp)
        samples.append(
            SurfaceSample(patch_id=pid, velocity=vel, temperature=temp, area=len(ys))
        )
    return samples


def regulate(
    samples: list[SurfaceSample], state: RegulatorState, dt: float
) -> tuple[SurfaceResponse, RegulatorState]:
    """One explicit Euler step of the two-node model.

    The core gains metabolic heat and exchanges with the skin through a
    fixed conductance; the skin loses to the air with a convection
    coefficient rising linearly in the local air speed. Reported fluxes are
    the ones that acted over this step (computed at the incoming skin
    temperature); reported surface temperatures are the resultant skin.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not samples:
        raise NoManikin("no surface samples")
    total_area = sum(s.area for s in samples)
    flux = {}
    q_conv = 0.0
    for s in samples:
        h = state.h0 * (1.0 + state.velocity_gain * s.velocity)
        f = h * (state.skin_temp - s.temperature)
        flux[s.patch_id] = f
        q_conv += f * (s.area / total_area)
    core_to_skin = state.conductance * (state.core_temp - state.skin_temp)
    core = state.core_temp + dt * (state.metabolic_rate - core_to_skin) / state.core_capacity
    skin = state.skin_temp + dt * (core_to_skin - q_conv) / state.skin_capacity
    new_state = replace(state, core_temp=core, skin_temp=skin)  # envelope-checked
    response = SurfaceResponse(
        surface_temp={s.patch_id: skin for s in samples},
        flux=flux,
        total_flux=q_conv,
    )
    return response, new_state


def comfort_vote(
    skin_temp: float,
    neutral: float = NEUTRAL_SKIN_C,
    half_width: float = VOTE_HALF_WIDTH_C,
) -> int:
    """Seven-point sensation vote: -3 (cold) .. 0 (neutral) .. +3 (hot)."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    x = (skin_temp - neutral) / half_width
    vote = int(math.copysign(math.floor(abs(x) + 0.5), x))
    return max(-3, min(3, vote))


@dataclass
class ExchangeRecord:
    exchange: int
    response: SurfaceResponse
    votes: list[int]
    mean_skin: float
    core: float
    grid: DistributionGrid

    def to_json(self) -> str:
        return json.dumps(
            {
                "exchange": self.exchange,
                "mean_skin_C": self.mean_skin,
                "core_C": self.core,
                "flux_total": self.response.total_flux,
                "votes": self.votes,
            }
        )


def write_surface_bc(grid: DistributionGrid, response: SurfaceResponse) -> None:
    """Impose the regulator's surface temperatures as Dirichlet BCs."""
    bc = grid.bc_temp.copy()
    for pid, temp in response.surface_temp.items():
        bc[grid.patch == pid] = temp
    grid.bc_temp = bc


def coupling_loop(
    grid: DistributionGrid,
    params,
    state: RegulatorState,
    n_cfd_steps: int,
    n_exchanges: int,
    dt: float = 0.5,
    neutral: float = NEUTRAL_SKIN_C,
    half_width: float = VOTE_HALF_WIDTH_C,
    should_cancel: Optional[Callable[[], bool]] = None,
) -> Iterator[ExchangeRecord]:
    """Alternate solver stepping and regulator updates.

    Each exchange runs n_cfd_steps lattice steps, samples the manikin
    surface, advances the regulator by dt, writes the resultant surface
    temperatures back as Dirichlet conditions, and yields the record.
    Solver or model errors propagate tagged with the exchange index.
    """
    if n_cfd_steps < 1:
        raise ValueError("n_cfd_steps must be >= 1")
    if not grid.patches:
        raise NoManikin("scene has no manikin")
    for k in range(n_exchanges):
        if should_cancel is not None and should_cancel():
            return
        try:
            for _ in range(n_cfd_steps):
                grid = lattice.step(grid, params)
            samples = sample_surface(grid, lattice.macroscopics(grid))
            response, state = regulate(samples, state, dt)
        except (lattice.NumericalBlowup, ModelDiverged) as exc:
            exc.exchange = k
            raise
        write_surface_bc(grid, response)
        votes = [
            comfort_vote(response.surface_temp[s.patch_id], neutral, half_width)
            for s in samples
        ]
        yield ExchangeRecord(
            exchange=k,
            response=response,
            votes=votes,
            mean_skin=state.skin_temp,
            core=state.core_temp,
            grid=grid,
        )


def converge_coupling(
    grid: DistributionGrid,
    params,
    state: RegulatorState,
    n_cfd_steps: int,
    dt: float = 0.5,
    tol: float = 1e-7,
    max_exchanges: int = 20000,
) -> ExchangeRecord:
    """Run the coupling loop until the skin temperature settles."""
    last_skin = None
    record = None
    for record in coupling_loop(
        grid, params, state, n_cfd_steps, max_exchanges, dt=dt
    ):
        if last_skin is not None and abs(record.mean_skin - last_skin) < tol:
            return record
        last_skin = record.mean_skin
    if record is None:
        raise NoManikin("coupling produced no exchanges")
    return record
