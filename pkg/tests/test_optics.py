import csv
import json

import numpy as np
import pytest

from trunksim.errors import ConfigError, GeometryError, ValidationError
from trunksim.optics import (
    BendState,
    GoodnessReport,
    WaveguideGeometry,
    WellPattern,
    goodness_coefficient,
    intensity_curve,
    sweep_pattern,
    trace_rays,
    trace_waveguide,
)


def plain_guide():
    return WaveguideGeometry(length=25.0, width_W=1.5)


def patterned_guide(d=0.6, w=0.8, pitch=2.0, count=8):
    return WaveguideGeometry(
        length=25.0, width_W=1.5, wells=WellPattern(depth_d=d, width_w=w, pitch=pitch, count=count)
    )


class TestGeometry:
    def test_critical_angle(self):
        geom = plain_guide()
        assert geom.critical_angle_deg() == pytest.approx(
            np.degrees(np.arcsin(1.0 / 1.5)), abs=1e-12
        )
        assert geom.critical_angle_deg() == pytest.approx(41.81, abs=0.01)

    def test_well_depth_clearance(self):
        with pytest.raises(GeometryError):
            patterned_guide(d=1.0)  # >= W - 0.5
        with pytest.raises(GeometryError):
            patterned_guide(d=0.0)

    def test_wells_must_not_overlap(self):
        with pytest.raises(GeometryError):
            patterned_guide(w=2.0, pitch=1.5)

    def test_pattern_must_fit_length(self):
        with pytest.raises(GeometryError):
            patterned_guide(pitch=4.0, count=10)

    def test_index_ordering(self):
        with pytest.raises(ConfigError):
            WaveguideGeometry(n_core=1.0, n_outside=1.5)

    def test_bend_angle_range(self):
        with pytest.raises(ConfigError):
            BendState(-1.0)
        with pytest.raises(ConfigError):
            BendState(90.1)
        BendState(0.0)
        BendState(90.0)


class TestSingleRays:
    def launch_at_incidence(self, incidence_deg):
        # aim a single ray at the flat top wall of a straight plain guide;
        # incidence is measured from the wall normal
        i = np.radians(incidence_deg)
        origins = np.array([[0.01, 0.75]])
        directions = np.array([[np.sin(i), np.cos(i)]])
        return trace_rays(plain_guide(), BendState(0.0), origins, directions)[0]

    def test_above_critical_reflects_and_is_received(self):
        assert self.launch_at_incidence(41.82) == 1

    def test_below_critical_escapes(self):
        assert self.launch_at_incidence(41.80) == 0

    def test_axial_ray_received(self):
        out = trace_rays(plain_guide(), BendState(0.0), [[0.01, 0.75]], [[1.0, 0.0]])
        assert out[0] == 1

    def test_backward_ray_lost_through_entry(self):
        out = trace_rays(plain_guide(), BendState(0.0), [[1.0, 0.75]], [[-1.0, 0.0]])
        assert out[0] == 0

    def test_mirror_symmetry(self):
        geom = plain_guide()
        rng = np.random.default_rng(5)
        y = rng.uniform(0.1, 1.4, 200)
        ang = np.radians(rng.uniform(-20, 20, 200))
        origins = np.stack([np.full(200, 1e-6), y], axis=1)
        directions = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        mirrored_o = origins.copy()
        mirrored_o[:, 1] = geom.width_W - origins[:, 1]
        mirrored_d = directions.copy()
        mirrored_d[:, 1] *= -1.0
        a = trace_rays(geom, BendState(0.0), origins, directions)
        b = trace_rays(geom, BendState(0.0), mirrored_o, mirrored_d)
        assert np.array_equal(a, b)


class TestTransmission:
    def test_straight_plain_guide_transmits(self):
        res = trace_waveguide(plain_guide(), BendState(0.0), n_rays=20_000, seed=1)
        assert res.intensity >= 0.99

    def test_energy_accounting(self):
        res = trace_waveguide(patterned_guide(), BendState(20.0), n_rays=20_000, seed=1)
        assert res.received + res.lost == res.launched
        assert 0.0 < res.intensity < 1.0

    def test_wells_attenuate_versus_plain(self):
        # same seed pairs the ray ensembles between the two geometries
        plain = trace_waveguide(plain_guide(), BendState(30.0), n_rays=20_000, seed=3)
        wells = trace_waveguide(patterned_guide(), BendState(30.0), n_rays=20_000, seed=3)
        assert wells.intensity < plain.intensity

    def test_curve_non_increasing_within_noise(self):
        n = 20_000
        curve = intensity_curve(patterned_guide(), [0, 10, 20, 30, 40], n_rays=n, seed=2)
        intensities = [i for _, i in curve]
        for a, b in zip(intensities, intensities[1:]):
            sigma = np.sqrt(max(a * (1 - a), 1e-12) / n)
            assert b <= a + 3 * sigma

    def test_determinism(self):
        a = trace_waveguide(patterned_guide(), BendState(25.0), n_rays=10_000, seed=9)
        b = trace_waveguide(patterned_guide(), BendState(25.0), n_rays=10_000, seed=9)
        assert a.received == b.received

    def test_ray_budget_floor(self):
        with pytest.raises(ConfigError):
            trace_waveguide(plain_guide(), BendState(0.0), n_rays=5000)

    def test_angles_must_increase_from_zero(self):
        with pytest.raises(ConfigError):
            intensity_curve(plain_guide(), [10, 20], n_rays=10_000)
        with pytest.raises(ConfigError):
            intensity_curve(plain_guide(), [0, 20, 10], n_rays=10_000)


class TestGoodnessCoefficient:
    def test_matches_independent_least_squares(self):
        curve = [(0.0, 0.93), (10.0, 0.81), (20.0, 0.74), (30.0, 0.58), (40.0, 0.52)]
        ang = np.array([a for a, _ in curve])
        inten = np.array([i for _, i in curve])
        slope, intercept = np.polyfit(ang, inten, 1)
        rmse = float(np.sqrt(np.mean((inten - (slope * ang + intercept)) ** 2)))
        expected = (inten[0] - inten[-1]) / max(rmse, 1e-6)
        got = goodness_coefficient(curve)
        assert got["GC"] == pytest.approx(expected, abs=1e-9)
        assert got["delta_I"] == pytest.approx(inten[0] - inten[-1], abs=1e-12)

    def test_perfect_line_hits_rmse_floor(self):
        curve = [(0.0, 0.9), (10.0, 0.8), (20.0, 0.7), (30.0, 0.6)]
        got = goodness_coefficient(curve)
        assert got["rmse"] < 1e-9
        assert got["GC"] == pytest.approx(0.3 / 1e-6, rel=1e-9)

    def test_needs_three_points(self):
        with pytest.raises(ValidationError):
            goodness_coefficient([(0.0, 1.0), (10.0, 0.9)])


class TestSweep:
    def small_sweep(self):
        return sweep_pattern(
            plain_guide(),
            d_steps=2,
            w_steps=2,
            d_range=(0.3, 0.6),
            w_range=(0.5, 1.0),
            angle_grid=(0.0, 20.0, 40.0),
            n_rays=10_000,
            seed=0,
        )

    def test_toy_grid_shapes_and_argmax(self):
        rep = self.small_sweep()
        assert rep.gc.shape == (2, 2)
        assert np.isfinite(rep.gc).all()
        i, j = np.unravel_index(np.nanargmax(rep.gc), rep.gc.shape)
        assert rep.argmax == (float(rep.d_values[i]), float(rep.w_values[j]))

    def test_csv_and_json_outputs(self, tmp_path):
        rep = self.small_sweep()
        path = tmp_path / "sweep.csv"
        rep.to_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["d_mm", "w_mm", "GC", "delta_I", "rmse"]
        assert len(rows) == 1 + 4
        assert float(rows[1][2]) == rep.gc[0, 0]
        data = json.loads(rep.to_json())
        assert data["cells"] == 4
        assert data["valid_cells"] == 4

    def test_zero_depth_row_matches_plain_guide(self):
        rep = sweep_pattern(
            plain_guide(),
            d_steps=2,
            w_steps=1,
            d_range=(0.0, 0.5),
            w_range=(0.8, 0.8),
            angle_grid=(0.0, 20.0, 40.0),
            n_rays=10_000,
            seed=0,
        )
        curve = intensity_curve(plain_guide(), [0.0, 20.0, 40.0], n_rays=10_000, seed=0)
        plain_gc = goodness_coefficient(curve)["GC"]
        assert rep.gc[0, 0] == pytest.approx(plain_gc, abs=1e-12)

    def test_infeasible_cells_are_nan(self):
        rep = sweep_pattern(
            plain_guide(),
            d_steps=2,
            w_steps=1,
            d_range=(0.5, 2.0),  # 2.0 exceeds the W - 0.5 clearance
            w_range=(0.8, 0.8),
            angle_grid=(0.0, 20.0, 40.0),
            n_rays=10_000,
            seed=0,
        )
        assert np.isfinite(rep.gc[0, 0])
        assert np.isnan(rep.gc[1, 0])
        assert json.loads(rep.to_json())["valid_cells"] == 1
