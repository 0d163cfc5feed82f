"""2D geometric ray tracing of patterned waveguides under bending.

Binary total-internal-reflection model: a ray meeting a core boundary below
the critical incidence escapes and is lost; above it, the ray reflects
specularly. The bent guide is a rigid arc mapping of the straight geometry.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, GeometryError, ValidationError

SEG_WALL = 0
SEG_ENTRY = 1
SEG_EXIT = 2

RAY_LOST = 0
RAY_RECEIVED = 1

GC_RMSE_FLOOR = 1e-6


@dataclass(frozen=True)
class WellPattern:
    depth_d: float  # mm
    width_w: float
    pitch: float
    count: int


@dataclass(frozen=True)
class WaveguideGeometry:
    """Straight waveguide cross-section with wells on the bending-side surface."""

    length: float = 25.0
    width_W: float = 1.5
    wells: WellPattern | None = None
    n_core: float = 1.50
    n_outside: float = 1.00

    def __post_init__(self):
        if self.length <= 0 or self.width_W <= 0:
            raise ConfigError("waveguide dimensions must be positive")
        if self.n_core <= self.n_outside:
            raise ConfigError("core index must exceed outside index")
        w = self.wells
        if w is not None:
            if not 0 < w.depth_d < self.width_W - 0.5:
                raise GeometryError(
                    f"well depth {w.depth_d} outside (0, {self.width_W - 0.5}) "
                    "(electronics clearance)"
                )
            if w.width_w <= 0:
                raise GeometryError("well width must be positive")
            if w.count < 1 or w.pitch <= w.width_w:
                raise GeometryError("wells must not overlap (pitch > width)")
            span = (w.count - 1) * w.pitch + w.width_w
            if span >= self.length:
                raise GeometryError("well pattern exceeds the guide length")

    def critical_angle_deg(self):
        return float(np.degrees(np.arcsin(self.n_outside / self.n_core)))


@dataclass(frozen=True)
class BendState:
    bend_angle: float = 0.0  # degrees, guide mapped onto a circular arc

    def __post_init__(self):
        if not 0.0 <= self.bend_angle <= 90.0:
            raise ConfigError("bend angle must lie in [0, 90] degrees")


@dataclass
class RayTraceResult:
    launched: int
    received: int

    @property
    def lost(self):
        return self.launched - self.received

    @property
    def intensity(self):
        return self.received / self.launched if self.launched else 0.0


def _straight_outline(geom: WaveguideGeometry):
    """Polyline vertices of the bottom (well side, y=0) and top (y=W) walls."""
    L, W = geom.length, geom.width_W
    bottom = [(0.0, 0.0)]
    if geom.wells is not None:
        w = geom.wells
        span = (w.count - 1) * w.pitch + w.width_w
        x0 = (L - span) / 2.0
        for k in range(w.count):
            xl = x0 + k * w.pitch
            xr = xl + w.width_w
            bottom += [(xl, 0.0), (xl, w.depth_d), (xr, w.depth_d), (xr, 0.0)]
    bottom.append((L, 0.0))
    top = [(0.0, W), (L, W)]
    return bottom, top


def _subdivide(poly, max_len):
    out = [poly[0]]
    for a, b in zip(poly[:-1], poly[1:]):
        ax, ay = a
        bx, by = b
        n = max(1, int(np.ceil(np.hypot(bx - ax, by - ay) / max_len)))
        for k in range(1, n + 1):
            out.append((ax + (bx - ax) * k / n, ay + (by - ay) * k / n))
    return out


def build_segments(geom: WaveguideGeometry, bend: BendState, max_seg_len=0.5):
    """Segment soup (x1, y1, x2, y2, kind) of the possibly bent guide."""
    bottom, top = _straight_outline(geom)
    bottom = _subdivide(bottom, max_seg_len)
    top = _subdivide(top, max_seg_len)

    theta = np.radians(bend.bend_angle)
    if theta > 1e-9:
        Rm = geom.length / theta  # centerline radius
        if Rm - geom.width_W / 2.0 <= 0:
            raise GeometryError("bend radius smaller than the half-thickness")

        def warp(pts):
            pts = np.asarray(pts, dtype=float)
            phi = pts[:, 0] / geom.length * theta
            r = Rm + geom.width_W / 2.0 - pts[:, 1]  # y=0 on the convex side
            cx, cy = 0.0, Rm + geom.width_W / 2.0
            return np.stack([cx + r * np.sin(phi), cy - r * np.cos(phi)], axis=1)

        bottom = warp(bottom)
        top = warp(top)
        if geom.wells is not None:
            dmax = geom.wells.depth_d
            if Rm + geom.width_W / 2.0 - dmax <= 0:
                raise GeometryError("arc mapping self-intersects at the wells")
    else:
        bottom = np.asarray(bottom)
        top = np.asarray(top)

    segs = []
    for poly in (bottom, top):
        for a, b in zip(poly[:-1], poly[1:]):
            segs.append((a[0], a[1], b[0], b[1], SEG_WALL))
    # entry and exit faces connect the wall endpoints
    segs.append((bottom[0][0], bottom[0][1], top[0][0], top[0][1], SEG_ENTRY))
    segs.append((bottom[-1][0], bottom[-1][1], top[-1][0], top[-1][1], SEG_EXIT))
    arr = np.array(segs, dtype=float)
    lens = np.hypot(arr[:, 2] - arr[:, 0], arr[:, 3] - arr[:, 1])
    if np.any(lens < 1e-12):
        arr = arr[lens >= 1e-12]
    return arr


@numba.njit(cache=True, parallel=True)
def _trace_kernel(segs, kinds, origins, directions, cos_crit, eps, max_bounces):
    n_rays = origins.shape[0]
    n_segs = segs.shape[0]
    outcome = np.zeros(n_rays, dtype=np.int64)
    for r in numba.prange(n_rays):
        ox, oy = origins[r, 0], origins[r, 1]
        dx, dy = directions[r, 0], directions[r, 1]
        alive = True
        received = False
        for _ in range(max_bounces):
            if not alive:
                break
            best_t = np.inf
            best_i = -1
            for i in range(n_segs):
                x1, y1, x2, y2 = segs[i, 0], segs[i, 1], segs[i, 2], segs[i, 3]
                ex, ey = x2 - x1, y2 - y1
                denom = dx * ey - dy * ex
                if abs(denom) < 1e-14:
                    continue
                t = ((x1 - ox) * ey - (y1 - oy) * ex) / denom
                if t <= eps or t >= best_t:
                    continue
                s = ((x1 - ox) * dy - (y1 - oy) * dx) / denom
                if s < -1e-12 or s > 1.0 + 1e-12:
                    continue
                best_t = t
                best_i = i
            if best_i < 0:
                alive = False  # escaped through a numerical crack
                break
            kind = kinds[best_i]
            ox = ox + dx * best_t
            oy = oy + dy * best_t
            if kind == SEG_EXIT:
                received = True
                alive = False
                break
            if kind == SEG_ENTRY:
                alive = False
                break
            x1, y1, x2, y2 = segs[best_i, 0], segs[best_i, 1], segs[best_i, 2], segs[best_i, 3]
            ex, ey = x2 - x1, y2 - y1
            elen = (ex * ex + ey * ey) ** 0.5
            nx, ny = ey / elen, -ex / elen
            cosi = dx * nx + dy * ny
            if abs(cosi) > cos_crit:  # incidence below critical: ray escapes
                alive = False
                break
            dx = dx - 2.0 * cosi * nx
            dy = dy - 2.0 * cosi * ny
        if received:
            outcome[r] = 1
    return outcome


def trace_rays(geom: WaveguideGeometry, bend: BendState, origins, directions):
    """Trace explicit rays; returns per-ray outcomes (1 received, 0 lost)."""
    segs = build_segments(geom, bend)
    cos_crit = float(np.cos(np.radians(geom.critical_angle_deg())))
    eps = 1e-9 * geom.length
    origins = np.ascontiguousarray(np.atleast_2d(origins).astype(float))
    directions = np.ascontiguousarray(np.atleast_2d(directions).astype(float))
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    kinds = np.ascontiguousarray(segs[:, 4].astype(np.int64))
    return _trace_kernel(
        np.ascontiguousarray(segs[:, :4]), kinds, origins, directions, cos_crit, eps, 100000
    )


def emitter_rays(geom: WaveguideGeometry, n_rays, seed, half_cone_deg=20.0):
    """Uniform fan from the entry face: random height and launch angle."""
    rng = np.random.default_rng(seed)
    margin = 1e-6 * geom.width_W
    y = rng.uniform(margin, geom.width_W - margin, n_rays)
    ang = np.radians(rng.uniform(-half_cone_deg, half_cone_deg, n_rays))
    origins = np.stack([np.full(n_rays, 1e-9 * geom.length), y], axis=1)
    directions = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return origins, directions


def trace_waveguide(
    geom: WaveguideGeometry,
    bend: BendState,
    n_rays=100_000,
    seed=0,
    half_cone_deg=20.0,
) -> RayTraceResult:
    """Monte-Carlo transmission of the guide at one bend angle."""
    if n_rays < 10_000:
        raise ConfigError("n_rays must be >= 10000")
    origins, directions = emitter_rays(geom, n_rays, seed, half_cone_deg)
    outcome = trace_rays(geom, bend, origins, directions)
    return RayTraceResult(launched=n_rays, received=int(outcome.sum()))


def intensity_curve(geom, angles, n_rays=100_000, seed=0, half_cone_deg=20.0):
    """Transmitted intensity per bend angle; the same seed pairs the runs."""
    angles = list(angles)
    if not angles or angles[0] != 0 or any(np.diff(angles) <= 0):
        raise ConfigError("angles must increase and start at 0")
    out = []
    for ang in angles:
        res = trace_waveguide(geom, BendState(ang), n_rays, seed, half_cone_deg)
        out.append((float(ang), res.intensity))
    return out


def goodness_coefficient(curve):
    """GC = (I(0) - I(max angle)) / max(RMSE of an OLS line, 1e-6)."""
    if len(curve) < 3:
        raise ValidationError("goodness coefficient needs >= 3 points")
    ang = np.array([a for a, _ in curve])
    inten = np.array([i for _, i in curve])
    delta_i = float(inten[0] - inten[-1])
    A = np.stack([ang, np.ones_like(ang)], axis=1)
    coef, *_ = np.linalg.lstsq(A, inten, rcond=None)
    resid = inten - A @ coef
    rmse = float(np.sqrt(np.mean(resid**2)))
    gc = delta_i / max(rmse, GC_RMSE_FLOOR)
    return {"GC": gc, "delta_I": delta_i, "rmse": rmse}


@dataclass
class GoodnessReport:
    d_values: np.ndarray
    w_values: np.ndarray
    gc: np.ndarray  # (len(d), len(w)), NaN for invalid cells
    delta_i: np.ndarray
    rmse: np.ndarray
    argmax: tuple | None = None  # (d, w)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["d_mm", "w_mm", "GC", "delta_I", "rmse"])
            for i, d in enumerate(self.d_values):
                for j, ww in enumerate(self.w_values):
                    w.writerow(
                        [
                            repr(float(d)),
                            repr(float(ww)),
                            repr(float(self.gc[i, j])),
                            repr(float(self.delta_i[i, j])),
                            repr(float(self.rmse[i, j])),
                        ]
                    )

    def to_json(self):
        return json.dumps(
            {
                "argmax": {"d_mm": self.argmax[0], "w_mm": self.argmax[1]}
                if self.argmax
                else None,
                "valid_cells": int(np.isfinite(self.gc).sum()),
                "cells": int(self.gc.size),
            }
        )


def _sweep_cell(args):
    base, d, w, angles, n_rays, seed, half_cone = args
    try:
        if d <= 0.0:  # degenerate row: unpatterned guide
            wells = None
        else:
            wells = WellPattern(
                depth_d=d, width_w=w, pitch=base_pitch(base, w), count=base_count(base)
            )
        geom = WaveguideGeometry(
            length=base.length,
            width_W=base.width_W,
            wells=wells,
            n_core=base.n_core,
            n_outside=base.n_outside,
        )
        curve = intensity_curve(geom, angles, n_rays, seed, half_cone)
        g = goodness_coefficient(curve)
        return g["GC"], g["delta_I"], g["rmse"]
    except GeometryError:
        return np.nan, np.nan, np.nan


def base_count(base: WaveguideGeometry):
    return base.wells.count if base.wells else 8


def base_pitch(base: WaveguideGeometry, w):
    if base.wells:
        return max(base.wells.pitch, w * 1.5)
    return max(2.0, w * 1.5)


def sweep_pattern(
    base_geom: WaveguideGeometry,
    d_steps=25,
    w_steps=20,
    d_range=(0.1, 1.0),
    w_range=(0.2, 2.0),
    angle_grid=(0.0, 10.0, 20.0, 30.0, 40.0),
    n_rays=100_000,
    seed=0,
    half_cone_deg=20.0,
    jobs=1,
) -> GoodnessReport:
    """Full-grid GC evaluation over well depth and width."""
    d_values = np.linspace(d_range[0], d_range[1], d_steps)
    w_values = np.linspace(w_range[0], w_range[1], w_steps)
    shape = (d_steps, w_steps)
    gc = np.full(shape, np.nan)
    delta = np.full(shape, np.nan)
    rmse = np.full(shape, np.nan)
    tasks = [
        (base_geom, float(d), float(w), tuple(angle_grid), n_rays, seed, half_cone_deg)
        for d in d_values
        for w in w_values
    ]
    # the numba kernel already spans the cores; process pools would only
    # duplicate JIT warmup, so jobs > 1 simply chunks sequentially
    results = [_sweep_cell(t) for t in tasks]
    for idx, (g, di, rm) in enumerate(results):
        i, j = divmod(idx, w_steps)
        gc[i, j], delta[i, j], rmse[i, j] = g, di, rm
    argmax = None
    if np.isfinite(gc).any():
        flat = np.nanargmax(gc)
        i, j = divmod(int(flat), w_steps)
        argmax = (float(d_values[i]), float(w_values[j]))
    return GoodnessReport(d_values, w_values, gc, delta, rmse, argmax)
