"""Sensor-placement rules: amplitude, decoupling, and stiffening checks.

Model A is the bare body, Model B the same body with stiffer sensor
subdomains embedded; placement passes when motion-sensing sites bend far
enough, touch-sensing sites stay quiet during free motion, and embedding
the sensors costs only a small bending-angle delta.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, PlacementError, ValidationError
from .fem import Monitor, SimScene
from .pneumatics import AngleSeries, MonitorTrace, load_regime, run_regime

SITE_ROLES = ("tactile", "bending", "actuator")

STIFFENING_NOISE_FLOOR_DEG = -0.2


@dataclass
class CandidateSite:
    id: int
    role: str
    anchors: np.ndarray  # (3, 3) mm, resolved to the nearest mesh nodes
    node_triplet: np.ndarray | None = None

    def __post_init__(self):
        if self.role not in SITE_ROLES:
            raise ConfigError(f"site role must be one of {SITE_ROLES}")
        self.anchors = np.asarray(self.anchors, dtype=float).reshape(3, 3)


@dataclass(frozen=True)
class PlacementThresholds:
    amplitude_min_deg: float = 40.0
    decoupling_max_deg: float = 5.0
    stiffening_max_deg: float = 5.0

    def __post_init__(self):
        if min(self.amplitude_min_deg, self.decoupling_max_deg, self.stiffening_max_deg) <= 0:
            raise ConfigError("placement thresholds must be positive")


@dataclass
class SiteResult:
    site_id: int
    role: str
    max_amplitude_deg: float
    decoupling_deg: float | None
    amplitude_pass: bool | None
    decoupling_pass: bool | None


@dataclass
class PlacementReport:
    sites: list
    stiffening_delta_deg: dict  # regime -> delta
    stiffening_pass: bool | None
    thresholds: PlacementThresholds

    @property
    def overall_pass(self):
        verdicts = [self.stiffening_pass] if self.stiffening_pass is not None else []
        for s in self.sites:
            verdicts += [v for v in (s.amplitude_pass, s.decoupling_pass) if v is not None]
        return bool(verdicts) and all(verdicts)

    def to_json(self):
        return json.dumps(
            {
                "sites": [dataclasses.asdict(s) for s in self.sites],
                "stiffening_delta_deg": self.stiffening_delta_deg,
                "stiffening_pass": self.stiffening_pass,
                "overall_pass": self.overall_pass,
                "thresholds": dataclasses.asdict(self.thresholds),
            },
            indent=2,
        )

    def summary(self):
        lines = [f"placement: {'PASS' if self.overall_pass else 'FAIL'}"]
        for s in self.sites:
            parts = [f"site {s.site_id} ({s.role}): amplitude {s.max_amplitude_deg:.2f} deg"]
            if s.amplitude_pass is not None:
                parts.append("amplitude " + ("ok" if s.amplitude_pass else "LOW"))
            if s.decoupling_pass is not None:
                parts.append(
                    f"decoupling {s.decoupling_deg:.2f} deg "
                    + ("ok" if s.decoupling_pass else "COUPLED")
                )
            lines.append("  " + ", ".join(parts))
        for regime, delta in self.stiffening_delta_deg.items():
            lines.append(f"  stiffening {regime}: delta {delta:.3f} deg")
        return "\n".join(lines)


def resolve_site(scene: SimScene, site: CandidateSite, max_dist=None) -> CandidateSite:
    """Snap the site's three anchors to mesh nodes; distant anchors are errors."""
    nodes = scene.mesh.nodes
    if max_dist is None:
        span = nodes.max(axis=0) - nodes.min(axis=0)
        max_dist = 0.25 * float(span.max())
    triplet = np.empty(3, dtype=np.int64)
    for k, anchor in enumerate(site.anchors):
        d = np.linalg.norm(nodes - anchor, axis=1)
        j = int(np.argmin(d))
        if d[j] > max_dist:
            raise PlacementError(
                f"site {site.id} anchor {anchor.tolist()} is {d[j]:.1f} mm from the mesh"
            )
        triplet[k] = j
    if len(set(triplet.tolist())) < 3:
        raise PlacementError(f"site {site.id} anchors collapse onto shared nodes")
    return dataclasses.replace(site, node_triplet=triplet)


def _scene_with_site_monitors(scene: SimScene, sites) -> tuple[SimScene, list]:
    resolved = [
        resolve_site(scene, s) if s.node_triplet is None else s for s in sites
    ]
    monitors = [Monitor(id=s.id, node_triplet=s.node_triplet) for s in resolved]
    scene = dataclasses.replace(scene, monitors=monitors)
    return scene, resolved


def extract_site_trajectories(scene_A: SimScene, sites, regimes, profile_dir=None):
    """Run each regime on the bare body and log site paths and bending angles.

    Returns {regime: (traces, angle_series)} keyed the same way for every
    site order given.
    """
    scene, resolved = _scene_with_site_monitors(scene_A, sites)
    out = {}
    for regime in regimes:
        profile = load_regime(regime, profile_dir)
        traces, series, _, _ = run_regime(scene, profile)
        out[regime] = (traces, series)
    return out, resolved


def check_amplitude(series: AngleSeries, thresholds: PlacementThresholds) -> bool:
    return bool(series.max_angle() >= thresholds.amplitude_min_deg)


def check_decoupling(
    scene_B: SimScene, tactile_sites, finger_regimes, thresholds, profile_dir=None
):
    """Max tactile-site bending over contact-free finger regimes, with verdicts."""
    scene, resolved = _scene_with_site_monitors(scene_B, tactile_sites)
    worst = {s.id: 0.0 for s in resolved}
    for regime in finger_regimes:
        profile = load_regime(regime, profile_dir)
        _, series, _, _ = run_regime(scene, profile)
        for ser in series:
            worst[ser.monitor_id] = max(worst[ser.monitor_id], ser.max_angle())
    return {
        sid: (float(angle), bool(angle < thresholds.decoupling_max_deg))
        for sid, angle in worst.items()
    }


def compare_stiffening(
    scene_A: SimScene, scene_B: SimScene, regimes, thresholds, profile_dir=None
):
    """Endpoint bending-angle deltas (bare minus sensor-embedded) per regime.

    Both scenes replay the same profiles, so the endpoint pressures match by
    construction; a delta below the -0.2 deg noise floor means the stiffer
    model bent further, which breaks the premise of the comparison.
    """
    mon_a = [(m.id, tuple(m.node_triplet)) for m in scene_A.monitors]
    mon_b = [(m.id, tuple(m.node_triplet)) for m in scene_B.monitors]
    if [m for m, _ in mon_a] != [m for m, _ in mon_b]:
        raise ValidationError("stiffening comparison needs matching monitor ids")
    deltas = {}
    for regime in regimes:
        profile = load_regime(regime, profile_dir)
        _, series_a, _, _ = run_regime(scene_A, profile)
        _, series_b, _, _ = run_regime(scene_B, profile)
        worst = -np.inf
        for sa, sb in zip(series_a, series_b):
            delta = abs(sa.angles[-1]) - abs(sb.angles[-1])
            if delta < STIFFENING_NOISE_FLOOR_DEG:
                raise ValidationError(
                    f"regime {regime} monitor {sa.monitor_id}: stiffened model bent "
                    f"further (delta {delta:.3f} deg)"
                )
            worst = max(worst, delta)
        deltas[regime] = float(worst)
    verdict = bool(max(deltas.values()) < thresholds.stiffening_max_deg) if deltas else None
    return deltas, verdict


def build_report(
    scene_A: SimScene,
    scene_B: SimScene | None,
    sites,
    regimes,
    thresholds: PlacementThresholds | None = None,
    finger_regimes=("open", "close"),
    profile_dir=None,
) -> PlacementReport:
    """Full placement evaluation: amplitudes on Model A, decoupling and
    stiffening against Model B when one is given."""
    thresholds = thresholds or PlacementThresholds()
    runs, resolved = extract_site_trajectories(scene_A, sites, regimes, profile_dir)

    amp = {s.id: 0.0 for s in resolved}
    for _, series in runs.values():
        for ser in series:
            amp[ser.monitor_id] = max(amp[ser.monitor_id], ser.max_angle())

    decoupling = {}
    stiff_deltas, stiff_pass = {}, None
    if scene_B is not None:
        tactile = [s for s in resolved if s.role == "tactile"]
        if tactile:
            decoupling = check_decoupling(
                scene_B, tactile, finger_regimes, thresholds, profile_dir
            )
        scene_a_mon, _ = _scene_with_site_monitors(scene_A, resolved)
        scene_b_mon, _ = _scene_with_site_monitors(scene_B, resolved)
        stiff_deltas, stiff_pass = compare_stiffening(
            scene_a_mon, scene_b_mon, regimes, thresholds, profile_dir
        )

    site_results = []
    for s in resolved:
        checked = s.role in ("bending", "actuator")
        dec = decoupling.get(s.id)
        site_results.append(
            SiteResult(
                site_id=s.id,
                role=s.role,
                max_amplitude_deg=amp[s.id],
                decoupling_deg=dec[0] if dec else None,
                amplitude_pass=(amp[s.id] >= thresholds.amplitude_min_deg)
                if checked
                else None,
                decoupling_pass=dec[1] if dec else None,
            )
        )
    return PlacementReport(
        sites=site_results,
        stiffening_delta_deg=stiff_deltas,
        stiffening_pass=stiff_pass,
        thresholds=thresholds,
    )


def write_trajectory_svg(trace: MonitorTrace, path, plane="xz", size=400):
    """Project the middle-point path onto an axis plane as a plain SVG polyline."""
    axes = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}.get(plane)
    if axes is None:
        raise ConfigError(f"unknown projection plane {plane!r}")
    mids = np.array([p[1] for p in trace.points])
    pts = mids[:, list(axes)]
    lo = pts.min(axis=0)
    span = max(float((pts.max(axis=0) - lo).max()), 1e-9)
    margin = 0.05 * size
    scale = (size - 2 * margin) / span
    xy = (pts - lo) * scale + margin
    xy[:, 1] = size - xy[:, 1]  # y grows downward in SVG
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in xy)
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{points}"/>\n'
        "</svg>\n"
    )
    Path(path).write_text(svg)
