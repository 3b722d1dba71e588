import numpy as np
import pytest

import pastsim.field as fieldmod
from pastsim.errors import (InvalidParameterError, InvalidRegionError,
                            NumericFailureError)
from pastsim.field import (CoolingConfig, ThermalField, ambient_field,
                           forcing_grid, fourier_numbers,
                           spaced_cooling_regions, step_implicit)

from oracles import explicit_heat_run


def gaussian_bump_field(n=33, alpha=1.0, u_inf=72.0, amp=100.0, sigma=4.0):
    x = np.arange(n)
    g = np.exp(-((x[:, None] - n // 2) ** 2 + (x[None, :] - n // 2) ** 2) / (2 * sigma**2))
    return ThermalField(u_inf + amp * g, alpha=alpha, u_inf=u_inf)


class TestFourierNumbers:
    def test_direct_substitution(self):
        assert fourier_numbers(1.0, 0.5, 1.0, 1.0) == (0.5, 0.5)
        assert fourier_numbers(2.0, 1.0, 2.0, 1.0) == (0.5, 2.0)

    @pytest.mark.parametrize("bad", [
        dict(alpha=0.0, dt=1.0, dx=1.0, dy=1.0),
        dict(alpha=1.0, dt=-1.0, dx=1.0, dy=1.0),
        dict(alpha=1.0, dt=1.0, dx=0.0, dy=1.0),
        dict(alpha=1.0, dt=1.0, dx=1.0, dy=-2.0),
    ])
    def test_non_positive_rejected(self, bad):
        with pytest.raises(InvalidParameterError):
            fourier_numbers(**bad)


class TestForcingGrid:
    def make(self, n=12, u_w=60.0, water_rate=5.0):
        f = ambient_field(n, n, alpha=0.1)
        cooling = CoolingConfig(rows=1, jets_per_row=2, water_rate=water_rate,
                                wetted_regions=[(3, 7, 4, 9)], water_temp=u_w)
        return f, cooling

    def test_zero_at_water_temperature(self):
        f, cooling = self.make()
        f.u[4, 5] = cooling.water_temp
        g = forcing_grid(f, cooling)
        assert g[4, 5] == 0.0

    def test_zero_outside_regions(self):
        f, cooling = self.make()
        f.u[1:-1, 1:-1] = 120.0
        g = forcing_grid(f, cooling)
        assert g[1, 1] == 0.0
        assert g[9, 10] == 0.0

    def test_negative_when_hotter_than_water(self):
        f, cooling = self.make()
        f.u[4, 5] = 120.0
        g = forcing_grid(f, cooling)
        assert g[4, 5] < 0.0

    def test_coefficient_value(self):
        f, cooling = self.make()
        f.u[4, 5] = 100.0
        g = forcing_grid(f, cooling)
        area = (7 - 3) * (9 - 4)
        coef = cooling.jets_per_row * cooling.water_rate * cooling.cp_water / (
            area * cooling.belt_thickness * cooling.belt_density * cooling.cp_belt)
        assert g[4, 5] == pytest.approx(-coef * (100.0 - 60.0), rel=1e-14)

    def test_region_outside_grid_rejected(self):
        f, _ = self.make()
        bad = CoolingConfig(rows=1, jets_per_row=2, water_rate=5.0,
                            wetted_regions=[(3, 20, 4, 9)])
        with pytest.raises(InvalidRegionError):
            forcing_grid(f, bad)

    def test_overlapping_regions_rejected(self):
        f, _ = self.make()
        bad = CoolingConfig(rows=2, jets_per_row=2, water_rate=5.0,
                            wetted_regions=[(3, 7, 4, 9), (5, 9, 8, 11)])
        with pytest.raises(InvalidRegionError):
            forcing_grid(f, bad)

    def test_spaced_regions_layout(self):
        regions = spaced_cooling_regions(33, 160, rows=3, length=12, j_start=10, j_end=150)
        assert len(regions) == 3
        cooling = CoolingConfig(rows=3, jets_per_row=1, water_rate=1.0,
                                wetted_regions=regions)
        cooling.validate_for(33, 160)


class TestStepImplicit:
    def test_uniform_field_is_steady(self):
        f = ambient_field(9, 9, alpha=1.0)
        out = step_implicit(f, np.zeros_like(f.u), dt=0.5)
        assert np.array_equal(out.u, f.u)

    def test_hot_cell_max_principle(self):
        f = ambient_field(9, 9, alpha=1.0)
        f.u[4, 4] = 172.0
        out = step_implicit(f, np.zeros_like(f.u), dt=1.0)  # F_x = F_y = 1
        assert out.u.max() < 172.0
        assert out.u.min() >= 72.0 - 1e-12
        assert out.u.max() <= 172.0

    def test_gaussian_bump_matches_explicit_oracle(self):
        f = gaussian_bump_field()
        dt = 0.02
        forcing = np.zeros_like(f.u)
        out = f
        for _ in range(10):
            out = step_implicit(out, forcing, dt)
        oracle = explicit_heat_run(f.u, alpha=1.0, dt=dt / 1000.0, n_steps=10_000)
        rel_l2 = np.linalg.norm(out.u - oracle) / np.linalg.norm(oracle)
        assert rel_l2 <= 1e-3

    def test_solvers_agree(self):
        rng = np.random.default_rng(3)
        f = ambient_field(11, 13, alpha=0.7)
        f.u[1:-1, 1:-1] += rng.uniform(0, 100, size=(9, 11))
        forcing = rng.uniform(-1, 1, size=f.u.shape)
        outs = {s: step_implicit(f, forcing, dt=0.8, solver=s).u
                for s in ("dst", "cg", "dense")}
        assert np.allclose(outs["dst"], outs["dense"], atol=1e-10)
        assert np.allclose(outs["cg"], outs["dense"], atol=1e-6)

    def test_dirichlet_preserved_over_many_steps(self):
        rng = np.random.default_rng(11)
        f = ambient_field(15, 17, alpha=0.3)
        f.u[1:-1, 1:-1] += rng.uniform(0, 120, size=(13, 15))
        for _ in range(25):
            f = step_implicit(f, rng.uniform(-0.5, 0.5, size=f.u.shape), dt=1.0)
            assert np.all(f.u[0, :] == 72.0)
            assert np.all(f.u[-1, :] == 72.0)
            assert np.all(f.u[:, 0] == 72.0)
            assert np.all(f.u[:, -1] == 72.0)

    def test_max_principle_large_fourier_random_fields(self):
        rng = np.random.default_rng(7)
        zeros = np.zeros((12, 14))
        for _ in range(20):
            f = ambient_field(12, 14, alpha=100.0)   # F_x = F_y = 100 at dt=1
            f.u[1:-1, 1:-1] += rng.uniform(-100, 100, size=(10, 12))
            lo, hi = f.u.min(), f.u.max()
            out = step_implicit(f, zeros, dt=1.0)
            assert out.u.min() >= lo
            assert out.u.max() <= hi

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(5)
        f = ambient_field(13, 16, alpha=0.4)
        bump = rng.uniform(0, 80, size=(13, 16))
        sym = (bump + bump[::-1, :]) / 2.0
        f.u[1:-1, 1:-1] += sym[1:-1, 1:-1]
        f._conform_boundary()
        forcing = np.zeros_like(f.u)
        forcing[1:-1, 1:-1] = -0.01 * (f.u[1:-1, 1:-1] - 60.0)
        out = step_implicit(f, forcing, dt=1.0)
        assert np.allclose(out.u, out.u[::-1, :], atol=1e-9)

    def test_cooling_relaxation_closed_form(self):
        # alpha = 0 disables diffusion; a wetted cell follows geometric decay.
        f = ambient_field(12, 12, alpha=0.0)
        f.u[3:7, 4:9] = 150.0
        cooling = CoolingConfig(rows=1, jets_per_row=2, water_rate=3.0,
                                wetted_regions=[(3, 7, 4, 9)], water_temp=60.0)
        area = (7 - 3) * (9 - 4)
        c = 2 * 3.0 / (area * 1.0 * 2.0 * 1.0)
        dt = 1.0
        expected = 150.0
        for n in range(20):
            f = step_implicit(f, forcing_grid(f, cooling), dt)
            expected = expected - c * (expected - 60.0) * dt
            assert abs(f.u[4, 5] - expected) <= 1e-10

    def test_forcing_shape_mismatch_rejected(self):
        f = ambient_field(9, 9, alpha=1.0)
        with pytest.raises(InvalidParameterError):
            step_implicit(f, np.zeros((4, 4)), dt=1.0)

    def test_non_positive_dt_rejected(self):
        f = ambient_field(9, 9, alpha=1.0)
        with pytest.raises(InvalidParameterError):
            step_implicit(f, np.zeros_like(f.u), dt=0.0)

    def test_unknown_solver_rejected(self):
        f = ambient_field(9, 9, alpha=1.0)
        with pytest.raises(InvalidParameterError):
            step_implicit(f, np.zeros_like(f.u), dt=1.0, solver="qr")

    def test_cg_nonconvergence_reports_residual(self, monkeypatch):
        monkeypatch.setattr(fieldmod, "CG_MAX_ITER", 1)
        f = ambient_field(9, 9, alpha=5.0)
        f.u[4, 4] = 200.0
        with pytest.raises(NumericFailureError) as err:
            step_implicit(f, np.zeros_like(f.u), dt=1.0, solver="cg")
        assert err.value.residual is not None


class TestThermalField:
    def test_grid_too_small_rejected(self):
        with pytest.raises(InvalidParameterError):
            ThermalField(np.full((2, 5), 72.0), alpha=1.0)

    def test_negative_alpha_rejected(self):
        with pytest.raises(InvalidParameterError):
            ThermalField(np.full((5, 5), 72.0), alpha=-0.1)

    def test_boundary_conformed_on_construction(self):
        f = ThermalField(np.full((5, 5), 100.0), alpha=1.0, u_inf=72.0)
        assert np.all(f.u[0, :] == 72.0)
        assert np.all(f.u[:, -1] == 72.0)
        assert f.u[2, 2] == 100.0
