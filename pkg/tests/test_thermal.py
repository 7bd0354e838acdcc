import numpy as np
import pytest

from steerflow import lattice, thermal
from steerflow.lattice import FLUID
from steerflow.scene import FluidParams, Scene, SceneObject
from steerflow.thermal import (
    ModelDiverged,
    NoManikin,
    RegulatorState,
    SurfaceSample,
    comfort_vote,
    converge_coupling,
    coupling_loop,
    regulate,
    sample_surface,
)


def manikin_scene(ambient=25.0, inflow=(0.0, 0.0), tau=0.8):
    return Scene(
        objects=[SceneObject(id="person", shape="circle", center=(0.5, 0.5),
                             size=0.18, kind="manikin")],
        params=FluidParams(tau=tau, inflow_velocity=inflow, ambient_temp=ambient,
                           thermal_diffusivity=0.05),
        boundary="channel",
    )


def still_samples(temp, velocity=0.0, n=4):
    return [SurfaceSample(patch_id=i, velocity=velocity, temperature=temp, area=5)
            for i in range(n)]


class TestSampleSurface:
    def test_still_air_at_ambient(self):
        scene = manikin_scene(ambient=25.0)
        grid = lattice.init_grid(scene, 16, 16)
        samples = sample_surface(grid, lattice.macroscopics(grid))
        assert len(samples) == 4  # one per quadrant patch
        for s in samples:
            assert s.velocity == pytest.approx(0.0, abs=1e-15)
            assert s.temperature == pytest.approx(25.0, abs=1e-12)
            assert s.area > 0

    def test_uniform_flow_and_temp(self):
        scene = manikin_scene(ambient=20.0)
        grid = lattice.init_grid(scene, 16, 16)
        macro = lattice.macroscopics(grid)
        macro.ux[:] = 0.05
        macro.uy[:] = 0.0
        macro.temp[:] = 20.0
        for s in sample_surface(grid, macro):
            assert s.velocity == pytest.approx(0.05, abs=1e-14)
            assert s.temperature == pytest.approx(20.0, abs=1e-12)

    def test_matches_neighbor_enumeration_oracle(self):
        scene = manikin_scene()
        grid = lattice.init_grid(scene, 16, 16)
        rng = np.random.default_rng(5)
        macro = lattice.macroscopics(grid)
        macro.ux[:] = rng.standard_normal(grid.flags.shape) * 0.02
        macro.uy[:] = rng.standard_normal(grid.flags.shape) * 0.02
        macro.temp[:] = 20 + rng.random(grid.flags.shape) * 10
        speed = np.hypot(macro.ux, macro.uy)
        samples = {s.patch_id: s for s in sample_surface(grid, macro)}
        ny, nx = grid.flags.shape
        for pid in grid.patches:
            vel_terms, temp_terms = [], []
            for y in range(ny):
                for x in range(nx):
                    if grid.patch[y, x] != pid:
                        continue
                    vs, ts = [], []
                    for y2, x2 in ((y + 1, x), (y - 1, x), (y, x + 1), (y, x - 1)):
                        if 0 <= y2 < ny and 0 <= x2 < nx and grid.flags[y2, x2] == FLUID:
                            vs.append(speed[y2, x2])
                            ts.append(macro.temp[y2, x2])
                    if vs:
                        vel_terms.append(np.mean(vs))
                        temp_terms.append(np.mean(ts))
            assert samples[pid].velocity == pytest.approx(np.mean(vel_terms), rel=1e-12)
            assert samples[pid].temperature == pytest.approx(np.mean(temp_terms), rel=1e-12)

    def test_no_manikin_raises(self):
        grid = lattice.init_grid(Scene(), 16, 16)
        with pytest.raises(NoManikin):
            sample_surface(grid, lattice.macroscopics(grid))


class TestRegulate:
    def test_no_gradient_no_flux(self):
        state = RegulatorState()
        response, _ = regulate(still_samples(state.skin_temp), state, dt=0.5)
        assert all(f == 0.0 for f in response.flux.values())
        assert response.total_flux == 0.0

    def test_converges_to_fixed_point(self):
        state = RegulatorState()
        samples = still_samples(25.0)
        prev = state.skin_temp
        settled = False
        for _ in range(20000):
            _, state = regulate(samples, state, dt=0.5)
            if abs(state.skin_temp - prev) < 1e-9:
                settled = True
                break
            prev = state.skin_temp
        assert settled
        # analytic fixed point: skin = air + metabolic_rate / h0 in still air
        expected = 25.0 + state.metabolic_rate / state.h0
        assert state.skin_temp == pytest.approx(expected, abs=1e-6)

    def test_energy_balance_at_fixed_point(self):
        state = RegulatorState()
        samples = still_samples(22.0, velocity=0.03)
        prev = state.skin_temp
        for _ in range(20000):
            response, state = regulate(samples, state, dt=0.5)
            if abs(state.skin_temp - prev) < 1e-12:
                break
            prev = state.skin_temp
        assert response.total_flux == pytest.approx(state.metabolic_rate, rel=1e-6)

    def test_envelope_violation_raises(self):
        state = RegulatorState()
        with pytest.raises(ModelDiverged):
            for _ in range(50000):
                _, state = regulate(still_samples(-60.0, velocity=0.2), state, dt=0.5)

    def test_bad_dt_rejected(self):
        with pytest.raises(ValueError):
            regulate(still_samples(25.0), RegulatorState(), dt=0.0)


class TestComfortVote:
    def test_neutral_is_zero(self):
        assert comfort_vote(33.7) == 0

    def test_clamps_at_three(self):
        assert comfort_vote(33.7 + 3.5 * 1.0) == 3
        assert comfort_vote(33.7 - 9.0) == -3

    def test_declared_mapping_example(self):
        assert comfort_vote(32.2, neutral=33.7, half_width=1.0) == -2

    def test_nondecreasing_and_surjective(self):
        temps = np.linspace(20.0, 45.0, 400)
        votes = [comfort_vote(t) for t in temps]
        assert all(a <= b for a, b in zip(votes, votes[1:]))
        assert set(votes) == set(range(-3, 4))


class TestCouplingLoop:
    def test_thermoneutral_scene_votes_zero_flux_vanishes(self):
        # metabolically inert manikin in air at its own skin temperature
        scene = manikin_scene(ambient=thermal.NEUTRAL_SKIN_C)
        grid = lattice.init_grid(scene, 16, 16)
        state = RegulatorState(metabolic_rate=0.0,
                               core_temp=thermal.NEUTRAL_SKIN_C,
                               skin_temp=thermal.NEUTRAL_SKIN_C)
        records = list(coupling_loop(grid, scene.params, state,
                                     n_cfd_steps=5, n_exchanges=40))
        assert all(v == 0 for r in records for v in r.votes)
        assert abs(records[-1].response.total_flux) <= 1e-9

    def test_cold_draft_drops_skin_temperature(self):
        scene = manikin_scene(ambient=18.0, inflow=(0.05, 0.0))
        grid = lattice.init_grid(scene, 16, 16)
        record = converge_coupling(grid, scene.params, RegulatorState(),
                                   n_cfd_steps=10, tol=1e-6)
        assert record.mean_skin < thermal.NEUTRAL_SKIN_C
        assert max(record.votes) <= -1

    def test_cross_granularity_fixed_point(self):
        skins = []
        for n in (1, 10):
            scene = manikin_scene(ambient=25.0)
            grid = lattice.init_grid(scene, 16, 16)
            record = converge_coupling(grid, scene.params, RegulatorState(),
                                       n_cfd_steps=n, tol=1e-9)
            skins.append(record.mean_skin)
        assert abs(skins[0] - skins[1]) <= 1e-4

    def test_monotone_in_ambient(self):
        finals = []
        for ambient in (18.0, 22.0, 26.0):
            scene = manikin_scene(ambient=ambient)
            grid = lattice.init_grid(scene, 16, 16)
            record = converge_coupling(grid, scene.params, RegulatorState(),
                                       n_cfd_steps=10, tol=1e-5)
            finals.append(record.mean_skin)
        assert finals[0] < finals[1] < finals[2]

    def test_record_log_schema(self):
        import json

        scene = manikin_scene()
        grid = lattice.init_grid(scene, 16, 16)
        rec = next(coupling_loop(grid, scene.params, RegulatorState(),
                                 n_cfd_steps=2, n_exchanges=1))
        d = json.loads(rec.to_json())
        assert set(d) == {"exchange", "mean_skin_C", "core_C", "flux_total", "votes"}
        assert len(d["votes"]) == len(grid.patches)
