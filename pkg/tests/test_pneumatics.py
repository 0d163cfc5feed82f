import numpy as np
import pytest

from trunksim.errors import CommandError, DegenerateElementError, ValidationError
from trunksim.fem import FixedRegion, Material, Monitor, SimScene
from trunksim.gripper import reference_scene
from trunksim.pneumatics import (
    REGIMES,
    PressureProfile,
    TeleopCommand,
    TeleopSession,
    clamp_pressure,
    compute_angle,
    load_profile,
    load_regime,
    run_regime,
)
from trunksim.voxelize import box_voxel_mesh


def write_profile(tmp_path, rows, header="time_ms,cav1_kPa,cav2_kPa,cav3_kPa,cav4_kPa,cav5_kPa"):
    path = tmp_path / "p.csv"
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestProfileParsing:
    def test_good_profile(self, tmp_path):
        path = write_profile(tmp_path, ["0,0,0,0,0,0", "100,10,0,0,5,5"])
        prof = load_profile(path, "close")
        assert prof.times.tolist() == [0.0, 100.0]
        assert prof.pressures.shape == (2, 5)

    def test_bad_header(self, tmp_path):
        path = write_profile(tmp_path, ["0,0,0,0,0,0"], header="t,a,b,c,d,e")
        with pytest.raises(ValidationError):
            load_profile(path, "close")

    def test_non_numeric_cell(self, tmp_path):
        path = write_profile(tmp_path, ["0,0,0,oops,0,0"])
        with pytest.raises(ValidationError, match="row 2"):
            load_profile(path, "close")

    def test_pressure_out_of_range(self, tmp_path):
        path = write_profile(tmp_path, ["0,0,0,0,0,60"])
        with pytest.raises(ValidationError, match=r"\[-50, 50\]"):
            load_profile(path, "close")

    def test_non_monotone_time(self, tmp_path):
        path = write_profile(tmp_path, ["0,0,0,0,0,0", "100,1,0,0,0,0", "50,2,0,0,0,0"])
        with pytest.raises(ValidationError, match="non-monotone"):
            load_profile(path, "close")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(ValidationError):
            load_profile(path, "close")

    def test_unknown_regime(self):
        with pytest.raises(ValidationError):
            PressureProfile("wiggle", [0.0], np.zeros((1, 5)))

    def test_all_bundled_regimes_parse(self):
        for regime in REGIMES:
            prof = load_regime(regime)
            assert prof.regime == regime
            assert prof.total_duration > 0
            assert np.all(np.abs(prof.pressures) <= 50.0)


class TestZeroOrderHold:
    def prof(self):
        return PressureProfile(
            "close",
            [0.0, 100.0, 200.0],
            [[0] * 5, [10, 0, 0, 0, 0], [20, 0, 0, 0, 0]],
            pre_hold=50.0,
            post_hold=50.0,
        )

    def test_pre_hold_uses_first_sample(self):
        assert self.prof().at(0.0)[0] == 0.0
        assert self.prof().at(49.9)[0] == 0.0

    def test_hold_between_samples(self):
        p = self.prof()
        assert p.at(50.0 + 99.9)[0] == 0.0
        assert p.at(50.0 + 100.0)[0] == 10.0
        assert p.at(50.0 + 199.9)[0] == 10.0

    def test_post_hold_uses_last_sample(self):
        p = self.prof()
        assert p.at(50.0 + 200.0)[0] == 20.0
        assert p.at(p.total_duration)[0] == 20.0

    def test_clamp(self):
        assert clamp_pressure(99.0) == 50.0
        assert clamp_pressure(-99.0) == -50.0
        assert clamp_pressure(12.5) == 12.5


class TestComputeAngle:
    def test_collinear_is_zero(self):
        assert compute_angle([0, 0, 0], [1, 0, 0], [2, 0, 0]) == pytest.approx(0.0, abs=1e-9)

    def test_right_angle(self):
        assert compute_angle([0, 0, 0], [1, 0, 0], [1, 1, 0]) == pytest.approx(90.0, abs=1e-9)

    def test_folded_back(self):
        assert compute_angle([0, 0, 0], [1, 0, 0], [0, 1e-9, 0]) == pytest.approx(180.0, abs=1e-3)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateElementError):
            compute_angle([0, 0, 0], [0, 0, 0], [1, 0, 0])


def mini_scene():
    mesh = box_voxel_mesh((0, 0, 0), (6, 1, 1), 1.0)
    n = mesh.nodes
    trip = [
        int(np.argmin(np.linalg.norm(n - np.array(a), axis=1)))
        for a in ((0.0, 0.5, 0.5), (3.0, 0.5, 0.5), (6.0, 0.5, 0.5))
    ]
    return SimScene(
        mesh=mesh,
        material_by_tag={0: Material(50.0, 0.3, rayleigh_mass=0.3, rayleigh_stiffness=0.02)},
        fixed_regions=[FixedRegion((-0.1, -0.1, -0.1), (0.1, 1.1, 1.1), 20.0)],
        cavities=[],
        gravity=np.array([0.0, 0.0, -0.8]),  # exaggerated so the bar visibly sags
        dt=5.0,
        monitors=[Monitor(id=1, node_triplet=np.array(trip))],
        force_roi=((-0.1, -0.1, -0.1), (0.1, 1.1, 1.1)),
    )


def short_profile():
    return PressureProfile(
        "close", [0.0, 50.0], np.zeros((2, 5)), pre_hold=20.0, post_hold=20.0
    )


class TestRunRegime:
    def test_log_schema_and_monitor_columns(self, tmp_path):
        scene = mini_scene()
        log = tmp_path / "log.csv"
        traces, series, force_log, text = run_regime(scene, short_profile(), log_path=log)
        lines = text.strip().splitlines()
        header = lines[0].split(",")
        assert header[:6] == ["time_ms", "cav1_kPa", "cav2_kPa", "cav3_kPa", "cav4_kPa", "cav5_kPa"]
        assert "m1_angle_deg" in header
        assert header[-3:] == ["roi_Fx_N", "roi_Fy_N", "roi_Fz_N"]
        assert len(lines) - 1 == len(traces[0].times) == len(force_log)
        assert log.read_text() == text

    def test_bitwise_determinism(self):
        scene_a, scene_b = mini_scene(), mini_scene()
        _, _, _, text_a = run_regime(scene_a, short_profile())
        _, _, _, text_b = run_regime(scene_b, short_profile())
        assert text_a == text_b

    def test_gravity_bends_the_bar(self):
        traces, series, _, _ = run_regime(mini_scene(), short_profile())
        assert series[0].angles[0] == pytest.approx(0.0, abs=1e-9)
        assert traces[0].excursion() > 1e-3
        assert series[0].max_angle() > 0.0


class TestTeleop:
    def scene(self):
        from test_fem import cavity_scene

        return cavity_scene()[0]

    def test_inc_dec_and_clamp(self):
        s = TeleopSession(self.scene())
        s.apply(TeleopCommand("inc", cavity=1))
        assert s.targets[0] == 5.0
        for _ in range(20):
            s.apply(TeleopCommand("inc", cavity=1))
        assert s.targets[0] == 50.0
        s.apply(TeleopCommand("dec", cavity=1, step=30.0))
        assert s.targets[0] == 20.0

    def test_unknown_cavity(self):
        with pytest.raises(CommandError):
            TeleopSession(self.scene()).apply(TeleopCommand("inc", cavity=4))

    def test_translate_moves_anchor_targets(self):
        scene = mini_scene()
        s = TeleopSession(scene)
        rest0 = scene.model().spring_rest.copy()
        s.apply(TeleopCommand("translate", axis="z", step=2.0))
        moved = scene.model().spring_rest - rest0
        anchored = scene.model().spring_k.reshape(-1, 3).any(axis=1)
        assert np.allclose(moved[anchored], [0.0, 0.0, 2.0])
        assert np.allclose(moved[~anchored], 0.0)

    def test_rotate_preserves_anchor_centroid(self):
        scene = mini_scene()
        s = TeleopSession(scene)
        anchored = scene.model().spring_k.reshape(-1, 3).any(axis=1)
        c0 = scene.model().spring_rest[anchored].mean(axis=0)
        s.apply(TeleopCommand("rotate", step=30.0))
        c1 = scene.model().spring_rest[anchored].mean(axis=0)
        assert np.allclose(c0, c1, atol=1e-9)

    def test_bad_axis_and_unknown_command(self):
        s = TeleopSession(mini_scene())
        with pytest.raises(CommandError):
            s.apply(TeleopCommand("translate", axis="w"))
        with pytest.raises(CommandError):
            s.apply(TeleopCommand("wave"))

    def test_stop(self):
        s = TeleopSession(mini_scene())
        assert not s.stopped
        s.apply(TeleopCommand("stop"))
        assert s.stopped


@pytest.mark.slow
class TestReferenceGripper:
    def test_close2_paths_inside_bands(self):
        scene = reference_scene()
        traces, series, _, _ = run_regime(scene, load_regime("close2"))
        by_id = {t.monitor_id: t for t in traces}
        # monitor 1 rides the actuated finger face, monitor 2 the bending strip
        assert 15.0 <= by_id[1].path_length() <= 30.0
        assert 5.0 <= by_id[2].path_length() <= 10.0

    def test_open_excursion(self):
        scene = reference_scene()
        traces, _, _, _ = run_regime(scene, load_regime("open"))
        assert max(t.excursion() for t in traces) >= 15.0
