"""Virtual compression of lattice cubes and effective-modulus extraction."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError, ValidationError
from .fem import MN_PER_N, Material, SimScene, solve_quasistatic
from .mesh import TetMesh, nodes_in_box


@dataclass
class CompressionProtocol:
    strain_targets: tuple = (0.20, 0.40, 0.60)
    rate_mm_per_min: float = 10.0  # informational, quasistatic solves ignore it
    preload_N: float = 1.0

    def __post_init__(self):
        st = tuple(self.strain_targets)
        if not st or any(not 0 < s < 1 for s in st) or any(np.diff(st) <= 0):
            raise ConfigError("strain targets must be increasing and inside (0, 1)")
        self.strain_targets = st


@dataclass
class StressStrainCurve:
    strains: np.ndarray
    stresses_kPa: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        self.strains = np.asarray(self.strains, dtype=float)
        self.stresses_kPa = np.asarray(self.stresses_kPa, dtype=float)
        if len(self.strains) != len(self.stresses_kPa):
            raise ValidationError("strain/stress length mismatch")
        if np.any(np.diff(self.strains) <= 0):
            raise ValidationError("strains must be increasing")
        if self.strains[0] != 0.0 or self.stresses_kPa[0] != 0.0:
            raise ValidationError("curve must start at (0, 0)")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strain", "stress_kPa"])
            for e, s in zip(self.strains, self.stresses_kPa):
                w.writerow([repr(float(e)), repr(float(s))])

    @staticmethod
    def from_csv(path):
        strains, stresses = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["strain", "stress_kPa"]:
                raise ValidationError("curve CSV header must be strain,stress_kPa")
            for row in reader:
                if not row or not "".join(row).strip():
                    continue
                strains.append(float(row[0]))
                stresses.append(float(row[1]))
        return StressStrainCurve(np.array(strains), np.array(stresses))


@dataclass
class HomogenizationResult:
    effective_modulus_kPa: float
    fit_strain_limit: float
    rmse_kPa: float

    def to_json(self):
        return json.dumps(
            {
                "effective_modulus_kPa": self.effective_modulus_kPa,
                "fit_strain_limit": self.fit_strain_limit,
                "rmse_kPa": self.rmse_kPa,
            },
            indent=2,
        )


def _platen_scene(mesh: TetMesh, material: Material, dt=20.0):
    lo = mesh.nodes.min(axis=0)
    hi = mesh.nodes.max(axis=0)
    eps = 1e-6 * (hi[2] - lo[2])
    bottom = nodes_in_box(mesh, lo - 1, (hi[0] + 1, hi[1] + 1, lo[2] + eps))
    top = nodes_in_box(mesh, (lo[0] - 1, lo[1] - 1, hi[2] - eps), hi + 1)
    if len(bottom) == 0 or len(top) == 0:
        raise ConfigError("sample has no platen-contact nodes")
    # frictionless platens: axial constraint only, plus a 3-2-1 pin on the
    # bottom to remove in-plane rigid modes
    dirichlet = [(bottom, 2), (top, 2)]
    corner = bottom[np.lexsort((mesh.nodes[bottom, 1], mesh.nodes[bottom, 0]))[0]]
    other = bottom[np.argmax(mesh.nodes[bottom, 0])]
    dirichlet.append((np.array([corner]), 0))
    dirichlet.append((np.array([corner]), 1))
    dirichlet.append((np.array([other]), 1))
    scene = SimScene(
        mesh=mesh,
        material_by_tag={int(t): material for t in np.unique(mesh.tet_tags)},
        fixed_regions=[],
        cavities=[],
        gravity=np.zeros(3),
        dt=dt,
        dirichlet=dirichlet,
    )
    return scene, top, bottom, lo, hi


def virtual_compression(
    lattice_mesh: TetMesh,
    base_material: Material,
    protocol: CompressionProtocol,
    increment=0.02,
    tol_N=1e-4,
) -> StressStrainCurve:
    """Displacement-controlled compression between frictionless platens.

    Engineering stress is the top-platen reaction over the footprint area of
    the undeformed sample; a partial curve is returned (flagged truncated)
    when a strain step fails to converge.
    """
    scene, top, bottom, lo, hi = _platen_scene(lattice_mesh, base_material)
    model = scene.model()
    height = hi[2] - lo[2]
    footprint = (hi[0] - lo[0]) * (hi[1] - lo[1])
    top_z0 = lattice_mesh.nodes[top, 2].copy()

    strains = [0.0]
    stresses = [0.0]
    truncated = False
    state = scene.rest_state()
    current = 0.0
    for target in protocol.strain_targets:
        try:
            while current < target - 1e-12:
                current = min(current + increment, target)
                state.positions = state.positions.copy()
                state.positions[top, 2] = top_z0 - current * height
                state.velocities = state.velocities.copy()
                state.velocities[top] = 0.0
                state = solve_quasistatic(
                    scene, np.zeros(5), tol=tol_N, state=state, max_steps=4000
                )
        except ConvergenceError:
            truncated = True
            break
        # platen reaction: out-of-balance force on the held top dofs
        f_el, _ = model.elastic_forces(state.positions)
        f_ext = model.external_forces(state.positions, state.pressures)
        fz = (f_el + f_ext).reshape(-1, 3)[top, 2].sum()
        stresses.append(fz / footprint)  # mN/mm^2 == kPa, compression positive
        strains.append(current)
    return StressStrainCurve(np.array(strains), np.array(stresses), truncated=truncated)


def fit_effective_modulus(curve: StressStrainCurve, strain_limit=0.40) -> HomogenizationResult:
    """Least-squares line through the origin over samples with strain <= limit."""
    sel = curve.strains <= strain_limit
    e = curve.strains[sel]
    s = curve.stresses_kPa[sel]
    if len(e) < 3:
        raise ValidationError(
            f"need >= 3 samples at strain <= {strain_limit}, found {len(e)}"
        )
    denom = float(e @ e)
    if denom == 0.0:
        raise ValidationError("no nonzero strain samples to fit")
    slope = float(e @ s) / denom
    rmse = float(np.sqrt(np.mean((s - slope * e) ** 2)))
    if slope <= 0:
        raise ValidationError("fitted modulus is not positive")
    return HomogenizationResult(
        effective_modulus_kPa=slope, fit_strain_limit=strain_limit, rmse_kPa=rmse
    )
