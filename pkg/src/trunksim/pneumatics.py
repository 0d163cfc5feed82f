"""Regime-based pressure control, monitors, angle extraction, teleoperation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CommandError, ConfigError, DegenerateElementError, ValidationError
from .fem import SimScene, SimState, reaction_force_in_roi, step_dynamic

PRESSURE_MIN = -50.0  # kPa
PRESSURE_MAX = 50.0

REGIMES = (
    "open",
    "close",
    "open1",
    "open2",
    "close1",
    "close2",
    "elongate",
    "contract",
    "grasp",
)

PROFILE_HEADER = ["time_ms", "cav1_kPa", "cav2_kPa", "cav3_kPa", "cav4_kPa", "cav5_kPa"]

DEFAULT_HOLD_MS = 500.0


def clamp_pressure(p):
    return float(min(PRESSURE_MAX, max(PRESSURE_MIN, p)))


@dataclass
class PressureProfile:
    """Per-cavity pressure schedule with zero-order hold between samples."""

    regime: str
    times: np.ndarray  # ms, strictly increasing
    pressures: np.ndarray  # (n_samples, 5) kPa
    pre_hold: float = DEFAULT_HOLD_MS
    post_hold: float = DEFAULT_HOLD_MS

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValidationError(f"unknown regime {self.regime!r}")
        self.times = np.asarray(self.times, dtype=float)
        self.pressures = np.asarray(self.pressures, dtype=float).reshape(len(self.times), 5)
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("profile times must be strictly increasing")
        if np.any((self.pressures < PRESSURE_MIN) | (self.pressures > PRESSURE_MAX)):
            raise ValidationError("profile pressure outside [-50, 50] kPa")

    @property
    def total_duration(self):
        return self.pre_hold + float(self.times[-1]) + self.post_hold

    def at(self, t):
        """Commanded pressures at absolute time t (ms), zero-order hold."""
        tp = t - self.pre_hold
        if tp <= self.times[0]:
            return self.pressures[0].copy()
        k = int(np.searchsorted(self.times, tp, side="right") - 1)
        k = min(k, len(self.times) - 1)
        return self.pressures[k].copy()


def load_profile(csv_path, regime) -> PressureProfile:
    """Parse a regime CSV (header: time_ms, cav1_kPa..cav5_kPa)."""
    path = Path(csv_path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path.name}: empty profile")
        if [h.strip() for h in header] != PROFILE_HEADER:
            raise ValidationError(f"{path.name}: header must be {','.join(PROFILE_HEADER)}")
        times, rows = [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 6:
                raise ValidationError(f"{path.name} row {rownum}: expected 6 columns")
            try:
                values = [float(x) for x in row]
            except ValueError:
                raise ValidationError(f"{path.name} row {rownum}: non-numeric value")
            for p in values[1:]:
                if not PRESSURE_MIN <= p <= PRESSURE_MAX:
                    raise ValidationError(
                        f"{path.name} row {rownum}: pressure {p} kPa outside [-50, 50]"
                    )
            times.append(values[0])
            rows.append(values[1:])
    if len(times) >= 2 and np.any(np.diff(times) <= 0):
        bad = int(np.flatnonzero(np.diff(times) <= 0)[0]) + 3
        raise ValidationError(f"{path.name} row {bad}: non-monotone time")
    return PressureProfile(regime=regime, times=np.array(times), pressures=np.array(rows))


def bundled_profile_dir() -> Path:
    return Path(__file__).parent / "profiles"


def load_regime(regime, profile_dir=None) -> PressureProfile:
    d = Path(profile_dir) if profile_dir else bundled_profile_dir()
    return load_profile(d / f"{regime}.csv", regime)


@dataclass
class MonitorTrace:
    monitor_id: int
    node_triplet: np.ndarray
    times: list = field(default_factory=list)
    points: list = field(default_factory=list)  # (3, 3) arrays per step

    def path_length(self):
        """Arc length of the middle point's trajectory (mm)."""
        if len(self.points) < 2:
            return 0.0
        mids = np.array([p[1] for p in self.points])
        return float(np.linalg.norm(np.diff(mids, axis=0), axis=1).sum())

    def excursion(self):
        """Maximum displacement of the middle point from its start (mm)."""
        if not self.points:
            return 0.0
        mids = np.array([p[1] for p in self.points])
        return float(np.linalg.norm(mids - mids[0], axis=1).max())


@dataclass
class AngleSeries:
    monitor_id: int
    times: list = field(default_factory=list)
    angles: list = field(default_factory=list)  # deg
    drive_pressures: list = field(default_factory=list)  # kPa

    def max_angle(self):
        return max((abs(a) for a in self.angles), default=0.0)


def compute_angle(p1, p2, p3) -> float:
    """Bending angle at p2 in degrees: 0 when collinear, 180 - interior angle."""
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    a = p1 - p2
    b = p3 - p2
    la, lb = np.linalg.norm(a), np.linalg.norm(b)
    if la <= 1e-9 or lb <= 1e-9:
        raise DegenerateElementError("degenerate monitor segment")
    cosang = np.clip((a @ b) / (la * lb), -1.0, 1.0)
    interior = np.degrees(np.arccos(cosang))
    return float(180.0 - interior)


def _log_header(scene: SimScene):
    cols = list(PROFILE_HEADER)
    for mon in scene.monitors:
        for k in range(1, 4):
            cols += [f"m{mon.id}_p{k}x_mm", f"m{mon.id}_p{k}y_mm", f"m{mon.id}_p{k}z_mm"]
        cols.append(f"m{mon.id}_angle_deg")
    cols += ["roi_Fx_N", "roi_Fy_N", "roi_Fz_N"]
    return cols


def run_regime(scene: SimScene, profile: PressureProfile, log_path=None, state=None):
    """Play a pressure profile through the FEM, logging monitors and ROI force.

    Returns (traces, angle_series, force_log, log_text). The log is also
    written to log_path when given.
    """
    if state is None:
        state = scene.rest_state()
    else:
        state = state.copy()
    traces = [MonitorTrace(m.id, m.node_triplet) for m in scene.monitors]
    series = [AngleSeries(m.id) for m in scene.monitors]
    force_log = []

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_log_header(scene))

    total = profile.total_duration
    while state.time <= total:
        state.pressures = profile.at(state.time)
        drive = float(state.pressures[np.argmax(np.abs(state.pressures))])
        row = [repr(float(state.time))] + [repr(float(p)) for p in state.pressures]
        for mon, trace, ser in zip(scene.monitors, traces, series):
            pts = state.positions[mon.node_triplet]
            angle = compute_angle(*pts)
            trace.times.append(state.time)
            trace.points.append(pts.copy())
            ser.times.append(state.time)
            ser.angles.append(angle)
            ser.drive_pressures.append(drive)
            row += [repr(float(v)) for v in pts.ravel()]
            row.append(repr(angle))
        if scene.force_roi is not None:
            f, _ = reaction_force_in_roi(scene, state, scene.force_roi)
        else:
            f = np.zeros(3)
        force_log.append((state.time, f.copy()))
        row += [repr(float(v)) for v in f]
        writer.writerow(row)
        state = step_dynamic(scene, state)
    text = buf.getvalue()
    if log_path is not None:
        Path(log_path).write_text(text)
    return traces, series, force_log, text


# ---------------------------------------------------------------- teleop


@dataclass
class TeleopCommand:
    kind: str  # inc | dec | translate | rotate | stop
    cavity: int | None = None
    axis: str | None = None
    step: float = 0.0


class TeleopSession:
    """Serialized command handling over one scene; owns target pressures."""

    def __init__(self, scene: SimScene, pressure_step=5.0, move_step=1.0, rotate_step=5.0):
        self.scene = scene
        self.pressure_step = pressure_step
        self.move_step = move_step
        self.rotate_step = rotate_step
        self.targets = np.zeros(5)
        self.stopped = False
        self._cavity_ids = {cid for cid, _ in scene.cavities}

    def apply(self, cmd: TeleopCommand):
        if cmd.kind in ("inc", "dec"):
            if cmd.cavity not in self._cavity_ids:
                raise CommandError(f"unknown cavity id {cmd.cavity}")
            sign = 1.0 if cmd.kind == "inc" else -1.0
            step = cmd.step or self.pressure_step
            self.targets[cmd.cavity - 1] = clamp_pressure(
                self.targets[cmd.cavity - 1] + sign * step
            )
        elif cmd.kind == "translate":
            axis = {"x": 0, "y": 1, "z": 2}.get(cmd.axis)
            if axis is None:
                raise CommandError(f"unknown axis {cmd.axis!r}")
            delta = np.zeros(3)
            delta[axis] = cmd.step or self.move_step
            self._move_rest(lambda pts: pts + delta)
        elif cmd.kind == "rotate":
            ang = np.radians(cmd.step or self.rotate_step)
            c, s = np.cos(ang), np.sin(ang)
            R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
            model = self.scene.model()
            mask = model.spring_k.reshape(-1, 3).any(axis=1)
            center = model.spring_rest[mask].mean(axis=0) if mask.any() else np.zeros(3)
            self._move_rest(lambda pts: (pts - center) @ R.T + center)
        elif cmd.kind == "stop":
            self.stopped = True
        else:
            raise CommandError(f"unknown command {cmd.kind!r}")
        return self

    def _move_rest(self, transform):
        model = self.scene.model()
        mask = model.spring_k.reshape(-1, 3).any(axis=1)
        rest = model.spring_rest.copy()
        rest[mask] = transform(rest[mask])
        model.spring_rest = rest


def teleop_apply(session: TeleopSession, command: TeleopCommand) -> TeleopSession:
    """Apply one teleoperation command (see TeleopSession for the semantics)."""
    return session.apply(command)
