"""IWP lattice field evaluation, isosurface extraction, and isovalue calibration.

The solid region is the sublevel set {F >= t}: raising the isovalue thins
the struts over the calibrated bracket.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .errors import ConfigError, ConvergenceError, EmptyGeometryError, GeometryError, ValidationError
from .surface import TriSurface, points_inside, ray_hits, sample_surface_points

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TpmsField:
    """Implicit IWP field with unit cell size L (mm) and isovalue t."""

    cell_size_L: float
    isovalue_t: float = 0.0
    family: str = "IWP"

    def __post_init__(self):
        if not (self.cell_size_L > 0):
            raise ConfigError("cell_size_L must be positive")
        if self.family != "IWP":
            raise ConfigError(f"unsupported TPMS family: {self.family}")


def eval_field(field: TpmsField, points):
    """Evaluate the IWP field at one point or an (n, 3) array of points (mm)."""
    p = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValidationError("non-finite input coordinates")
    single = p.ndim == 1
    p = np.atleast_2d(p)
    c = np.cos(TWO_PI * p / field.cell_size_L)
    c2 = np.cos(2.0 * TWO_PI * p / field.cell_size_L)
    cx, cy, cz = c[..., 0], c[..., 1], c[..., 2]
    f = 2.0 * (cx * cy + cy * cz + cz * cx) - (c2[..., 0] + c2[..., 1] + c2[..., 2])
    return float(f[0]) if single else f


@dataclass
class Envelope:
    """Clipping region for isosurface extraction: axis-aligned box or closed surface."""

    kind: str = "box"
    box_min: np.ndarray | None = None
    box_max: np.ndarray | None = None
    surface: TriSurface | None = None

    def __post_init__(self):
        if self.kind == "box":
            self.box_min = np.asarray(self.box_min, dtype=float)
            self.box_max = np.asarray(self.box_max, dtype=float)
            if np.any(self.box_min >= self.box_max):
                raise ConfigError("envelope box must have min < max per axis")
        elif self.kind == "external-surface":
            if self.surface is None:
                raise ConfigError("external-surface envelope needs a surface")
            self.surface.validate()
        else:
            raise ConfigError(f"unknown envelope kind: {self.kind}")

    def bounds(self):
        if self.kind == "box":
            return self.box_min, self.box_max
        return self.surface.bounds()

    def contains(self, points):
        points = np.atleast_2d(points)
        if self.kind == "box":
            return np.all((points >= self.box_min) & (points <= self.box_max), axis=1)
        return points_inside(self.surface, points)


def extract_isosurface(field: TpmsField, env: Envelope, resolution: int) -> TriSurface:
    """Extract the watertight triangle surface of {F >= t} clipped to the envelope.

    resolution is the sample count per cell edge (>= 8). Samples outside the
    envelope are forced below the isovalue so the surface closes on its faces.
    """
    if resolution < 8:
        raise ConfigError("resolution must be >= 8 samples per cell edge")
    lo, hi = env.bounds()
    spacing = field.cell_size_L / float(resolution)
    counts = np.maximum(np.ceil((hi - lo) / spacing).astype(int) + 1, 2)
    axes = [lo[k] + spacing * np.arange(counts[k]) for k in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = grid.shape[:3]
    pts = grid.reshape(-1, 3)
    values = eval_field(field, pts) - field.isovalue_t
    inside = env.contains(pts)
    values = np.where(inside, values, -1.0)
    # level crossing exactly at a sample produces degenerate geometry; nudge
    values[np.abs(values) < 1e-12] = 1e-12
    vol = values.reshape(shape)
    if not np.any(vol > 0):
        raise EmptyGeometryError("no solid region inside the envelope")
    vol = np.pad(vol, 1, constant_values=-1.0)
    verts, faces, _, _ = measure.marching_cubes(
        vol, level=0.0, spacing=(spacing,) * 3, allow_degenerate=False
    )
    verts = verts + (lo - spacing)
    # the -1 padding closes the surface outside the envelope; snap those cap
    # vertices back onto the envelope faces so cut cells are capped exactly
    verts = np.clip(verts, lo, hi)
    surf = TriSurface(verts, faces).oriented_outward()
    return surf


def measure_min_thickness(surface: TriSurface, n_probes: int = 2000, seed: int = 0) -> float:
    """Minimum inward ray-cast diameter over surface probes (mm).

    Probes are triangle centroids (strided down to ~n_probes when the surface
    is finer), supplemented with seeded random surface samples on coarse
    surfaces. Centroid probing keeps the measurement a continuous function of
    the isovalue, which the calibration bisection relies on.
    """
    if n_probes < 1000:
        raise ConfigError("n_probes must be >= 1000")
    if not surface.is_watertight():
        raise GeometryError("thickness probing requires a watertight surface")
    surf = surface.oriented_outward()
    corners = surf.triangle_corners()
    centroids = corners.mean(axis=1)
    normals = surf.normals()
    if len(centroids) > n_probes:
        stride = int(np.ceil(len(centroids) / n_probes))
        pts = centroids[::stride]
        dirs = -normals[::stride]
    else:
        rng = np.random.default_rng(seed)
        extra, tri_idx = sample_surface_points(surf, n_probes - len(centroids), rng)
        pts = np.concatenate([centroids, extra])
        dirs = -np.concatenate([normals, normals[tri_idx]])
    lo, hi = surf.bounds()
    eps = 1e-6 * float(np.max(hi - lo))
    dists = ray_hits(surf, pts, dirs, eps=eps)
    dists = dists[np.isfinite(dists)]
    if dists.size == 0:
        raise GeometryError("no inward probe crossed the opposite wall")
    return float(dists.min())


def calibrate_isovalue(
    field: TpmsField,
    target_thickness: float,
    tol: float = 0.05,
    resolution: int = 32,
    n_probes: int = 4000,
    max_iter: int = 60,
) -> float:
    """Bisect the isovalue until the minimum strut thickness matches the target.

    All geometry is evaluated on a normalized unit cell, so the result depends
    only on target_thickness / L (exact scale invariance).
    """
    L = field.cell_size_L
    if not (0 < target_thickness < L / 2):
        raise ConfigError("target thickness must lie in (0, L/2)")
    target_n = target_thickness / L
    tol_n = tol / L
    unit_env = Envelope(kind="box", box_min=(0.0, 0.0, 0.0), box_max=(1.0, 1.0, 1.0))

    def thickness_at(t):
        f = TpmsField(cell_size_L=1.0, isovalue_t=t)
        try:
            surf = extract_isosurface(f, unit_env, resolution)
        except EmptyGeometryError:
            return 0.0
        return measure_min_thickness(surf, n_probes=n_probes, seed=7)

    # thickness decreases as t rises on this bracket
    t_lo, t_hi = 0.0, 2.9
    th_lo = thickness_at(t_lo)
    th_hi = thickness_at(t_hi)
    if not (th_hi <= target_n <= th_lo):
        raise ConvergenceError(
            f"target thickness {target_thickness} mm outside the calibration "
            f"bracket [{th_hi * L:.3g}, {th_lo * L:.3g}] mm"
        )
    t_mid = 0.5 * (t_lo + t_hi)
    for _ in range(max_iter):
        t_mid = 0.5 * (t_lo + t_hi)
        th = thickness_at(t_mid)
        if th > target_n:
            t_lo = t_mid
        else:
            t_hi = t_mid
        if t_hi - t_lo < 1e-8:
            break
    t_star = 0.5 * (t_lo + t_hi)
    if abs(thickness_at(t_star) - target_n) > tol_n:
        raise ConvergenceError("isovalue bisection did not converge in 60 iterations")
    return t_star


def lattice_spec_to_json(field: TpmsField, env: Envelope, strut_thickness=None):
    """Serializable lattice description mirroring the CLI's JSON schema."""
    spec = {"family": field.family, "cell_size_mm": field.cell_size_L}
    if strut_thickness is not None:
        spec["strut_thickness_mm"] = strut_thickness
    else:
        spec["isovalue"] = field.isovalue_t
    if env.kind == "box":
        spec["envelope"] = {
            "kind": "box",
            "min": list(map(float, env.box_min)),
            "max": list(map(float, env.box_max)),
        }
    else:
        spec["envelope"] = {"kind": "external-surface"}
    return spec


def lattice_spec_from_json(text_or_dict):
    spec = text_or_dict if isinstance(text_or_dict, dict) else json.loads(text_or_dict)
    if spec.get("family", "IWP") != "IWP":
        raise ConfigError("only the IWP family is supported")
    envd = spec["envelope"]
    if envd["kind"] != "box":
        raise ConfigError("JSON lattice specs support box envelopes only")
    env = Envelope(kind="box", box_min=envd["min"], box_max=envd["max"])
    L = float(spec["cell_size_mm"])
    if "isovalue" in spec:
        field = TpmsField(cell_size_L=L, isovalue_t=float(spec["isovalue"]))
    elif "strut_thickness_mm" in spec:
        t = calibrate_isovalue(TpmsField(cell_size_L=L), float(spec["strut_thickness_mm"]))
        field = TpmsField(cell_size_L=L, isovalue_t=t)
    else:
        raise ConfigError("lattice spec needs isovalue or strut_thickness_mm")
    return field, env
