"""Corotational linear-elastic tet FEM with implicit time stepping.

Unit system: mm, ms, mg, so stresses and moduli are in kPa and internal
forces in mN. Public force-valued results are reported in N.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError, DivergenceError
from .mesh import RegionTag, SurfacePatch, TetMesh, boundary_surface, nodes_in_box
from .mesh_io import read_vtk

MN_PER_N = 1000.0  # mN per N


@dataclass(frozen=True)
class Material:
    """Linear-elastic isotropic material with Rayleigh damping."""

    young_modulus: float  # kPa
    poisson_ratio: float = 0.45
    density: float = 1.1e-3  # mg/mm^3... stored as mg/mm^3 scale below
    rayleigh_mass: float = 0.1
    rayleigh_stiffness: float = 0.1

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise ConfigError("young_modulus must be positive")
        if not 0.0 < self.poisson_ratio < 0.5:
            raise ConfigError("poisson_ratio must lie strictly inside (0, 0.5)")
        if self.rayleigh_mass < 0 or self.rayleigh_stiffness < 0:
            raise ConfigError("Rayleigh coefficients must be >= 0")

    def lame(self):
        E, nu = self.young_modulus, self.poisson_ratio
        lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        mu = E / (2 * (1 + nu))
        return lam, mu


@dataclass
class FixedRegion:
    """Box of nodes anchored to their rest pose by springs (N/mm per node)."""

    box_min: np.ndarray
    box_max: np.ndarray
    stiffness: float  # N/mm
    axes: tuple = (0, 1, 2)


@dataclass
class CavitySpec:
    """Pressure surface: boundary faces whose centroids fall inside a box."""

    id: int
    box_min: np.ndarray | None = None
    box_max: np.ndarray | None = None


@dataclass
class Monitor:
    id: int
    node_triplet: np.ndarray  # 3 node indices


@dataclass
class SimScene:
    mesh: TetMesh
    material_by_tag: dict  # tag code -> Material
    fixed_regions: list
    cavities: list  # of (id, SurfacePatch)
    gravity: np.ndarray
    dt: float  # ms
    monitors: list = field(default_factory=list)
    force_roi: tuple | None = None  # (box_min, box_max)
    dirichlet: list = field(default_factory=list)  # (node_ids, axis) held fixed
    _model: "FemModel" = None

    def model(self) -> "FemModel":
        if self._model is None:
            self._model = FemModel(self)
        return self._model

    def rest_state(self) -> "SimState":
        n = len(self.mesh.nodes)
        return SimState(
            positions=self.mesh.nodes.copy(),
            velocities=np.zeros((n, 3)),
            time=0.0,
            pressures=np.zeros(5),
        )


@dataclass
class SimState:
    positions: np.ndarray  # (n, 3) mm
    velocities: np.ndarray  # (n, 3) mm/ms
    time: float  # ms
    pressures: np.ndarray  # kPa per cavity id 1..5

    def copy(self):
        return SimState(
            self.positions.copy(), self.velocities.copy(), self.time, self.pressures.copy()
        )

    def check_finite(self):
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise DivergenceError("non-finite state detected")


def _element_stiffness(nodes, tets, lam, mu):
    """Rest-frame element stiffness matrices (m, 12, 12) and volumes."""
    c = nodes[tets]
    dm = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0], c[:, 3] - c[:, 0]], axis=2)
    vols = np.linalg.det(dm) / 6.0
    dm_inv = np.linalg.inv(dm)
    # shape function gradients: rows of dm_inv give grads of N1..N3; N0 = -sum
    grads = np.zeros((len(tets), 4, 3))
    grads[:, 1:, :] = dm_inv
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)

    m = len(tets)
    B = np.zeros((m, 6, 12))
    for a in range(4):
        gx, gy, gz = grads[:, a, 0], grads[:, a, 1], grads[:, a, 2]
        B[:, 0, 3 * a + 0] = gx
        B[:, 1, 3 * a + 1] = gy
        B[:, 2, 3 * a + 2] = gz
        B[:, 3, 3 * a + 0] = gy
        B[:, 3, 3 * a + 1] = gx
        B[:, 4, 3 * a + 1] = gz
        B[:, 4, 3 * a + 2] = gy
        B[:, 5, 3 * a + 0] = gz
        B[:, 5, 3 * a + 2] = gx

    D = np.zeros((m, 6, 6))
    D[:, :3, :3] = lam[:, None, None]
    idx = np.arange(3)
    D[:, idx, idx] += 2 * mu[:, None]
    D[:, idx + 3, idx + 3] = mu[:, None]

    Ke = np.einsum("mia,mij,mjb->mab", B, D, B) * vols[:, None, None]
    return Ke, vols, grads


class FemModel:
    """Precomputed assembly data for a scene."""

    def __init__(self, scene: SimScene):
        mesh = scene.mesh
        self.scene = scene
        self.n_nodes = len(mesh.nodes)
        self.rest = mesh.nodes.copy()
        tags = mesh.tet_tags
        mats = scene.material_by_tag
        missing = set(np.unique(tags)) - set(mats)
        if missing:
            names = ", ".join(str(RegionTag.from_code(c)) for c in sorted(missing))
            raise ConfigError(f"missing material for region(s): {names}")

        lam = np.empty(len(tags))
        mu = np.empty(len(tags))
        rho = np.empty(len(tags))
        a_m = np.empty(len(tags))
        b_k = np.empty(len(tags))
        for code, mat in mats.items():
            sel = tags == code
            la, m_ = mat.lame()
            lam[sel], mu[sel], rho[sel] = la, m_, mat.density
            a_m[sel], b_k[sel] = mat.rayleigh_mass, mat.rayleigh_stiffness

        self.Ke, self.vols, grads = _element_stiffness(mesh.nodes, mesh.tets, lam, mu)
        self.tets = mesh.tets
        c = mesh.nodes[self.tets]
        self.dm_inv = np.linalg.inv(
            np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0], c[:, 3] - c[:, 0]], axis=2)
        )
        self.alpha_m = a_m
        self.beta_k = b_k

        # lumped mass
        mass = np.zeros(self.n_nodes)
        np.add.at(mass, self.tets.ravel(), np.repeat(rho * self.vols / 4.0, 4))
        self.mass = mass

        # sparse pattern for 12x12 element blocks on 3n dofs
        dofs = (3 * self.tets[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 12)
        self.rows = np.repeat(dofs, 12, axis=1).ravel()
        self.cols = np.tile(dofs, (1, 12)).ravel()

        # rest-shape springs (store per-dof stiffness in mN/mm)
        self.spring_k = np.zeros(3 * self.n_nodes)
        self.spring_nodes = []
        for fr in scene.fixed_regions:
            ids = nodes_in_box(mesh, fr.box_min, fr.box_max)
            self.spring_nodes.append(ids)
            for ax in fr.axes:
                self.spring_k[3 * ids + ax] += fr.stiffness * MN_PER_N
        self.spring_rest = self.rest.copy()

        self.fixed_dofs = np.zeros(3 * self.n_nodes, dtype=bool)
        for ids, ax in scene.dirichlet:
            if ax == "all":
                for a in range(3):
                    self.fixed_dofs[3 * np.asarray(ids) + a] = True
            else:
                self.fixed_dofs[3 * np.asarray(ids) + int(ax)] = True
        self.free = ~self.fixed_dofs

        self.cavity_patches = dict(scene.cavities)

    # ---------------------------------------------------------------- forces

    def rotations(self, positions):
        c = positions[self.tets]
        ds = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0], c[:, 3] - c[:, 0]], axis=2)
        F = ds @ self.dm_inv
        U, _, Vt = np.linalg.svd(F)
        R = U @ Vt
        det = np.linalg.det(R)
        # reflection fix for inverted elements
        flip = det < 0
        if np.any(flip):
            Uf = U[flip].copy()
            Uf[:, :, 2] *= -1.0
            R[flip] = Uf @ Vt[flip]
        return R

    def elastic_forces(self, positions, with_stiffness=False):
        """Nodal elastic forces (mN, flat 3n) and optionally rotated stiffness blocks."""
        R = self.rotations(positions)
        x = positions[self.tets].reshape(-1, 4, 3)
        x0 = self.rest[self.tets].reshape(-1, 4, 3)
        # pull current positions back to the rest frame
        local = np.einsum("mji,maj->mai", R, x)  # R^T x per corner
        u = (local - x0).reshape(-1, 12)
        f_local = -np.einsum("mab,mb->ma", self.Ke, u)
        f = np.einsum("mij,maj->mai", R, f_local.reshape(-1, 4, 3)).reshape(-1, 12)
        out = np.zeros(3 * self.n_nodes)
        dofs = (3 * self.tets[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 12)
        np.add.at(out, dofs.ravel(), f.ravel())
        if not with_stiffness:
            return out, None
        Rb = np.zeros((len(self.tets), 12, 12))
        for a in range(4):
            Rb[:, 3 * a : 3 * a + 3, 3 * a : 3 * a + 3] = R
        Krot = np.einsum("mab,mbc,mdc->mad", Rb, self.Ke, Rb)
        return out, Krot

    def elastic_energy(self, positions):
        R = self.rotations(positions)
        x = positions[self.tets].reshape(-1, 4, 3)
        x0 = self.rest[self.tets].reshape(-1, 4, 3)
        local = np.einsum("mji,maj->mai", R, x)
        u = (local - x0).reshape(-1, 12)
        return 0.5 * float(np.einsum("ma,mab,mb->", u, self.Ke, u))

    def spring_forces(self, positions):
        return self.spring_k * (self.spring_rest - positions).ravel()

    def pressure_forces(self, positions, pressures):
        """Follower loads from all cavities, lumped barycentrically (mN, flat)."""
        out = np.zeros(3 * self.n_nodes)
        for cav_id, patch in self.cavity_patches.items():
            p = pressures[cav_id - 1]
            if p == 0.0:
                continue
            areas, normals = patch.areas_and_normals(positions)
            tri_force = -p * areas[:, None] * normals / 3.0
            for corner in range(3):
                ids = patch.triangles[:, corner]
                np.add.at(out, 3 * ids + 0, tri_force[:, 0])
                np.add.at(out, 3 * ids + 1, tri_force[:, 1])
                np.add.at(out, 3 * ids + 2, tri_force[:, 2])
        return out

    def external_forces(self, positions, pressures, extra=None):
        """Gravity + pressure + rest-shape springs (mN, flat)."""
        f = np.zeros(3 * self.n_nodes)
        g = self.scene.gravity
        f += (self.mass[:, None] * g[None, :]).ravel()
        f += self.pressure_forces(positions, pressures)
        f += self.spring_forces(positions)
        if extra is not None:
            f += extra
        return f

    def assemble_stiffness(self, Krot):
        n = 3 * self.n_nodes
        K = sp.coo_matrix((Krot.ravel(), (self.rows, self.cols)), shape=(n, n)).tocsr()
        K += sp.diags(self.spring_k)
        return K

    def damping_matrices(self, K):
        # Rayleigh damping, elementwise alpha folded into a global average
        # per-element beta applied via scaled stiffness assembly
        alpha = float(np.mean(self.alpha_m)) if len(self.alpha_m) else 0.0
        beta = float(np.mean(self.beta_k)) if len(self.beta_k) else 0.0
        M = sp.diags(np.repeat(self.mass, 3))
        return M, alpha * M + beta * K


def step_dynamic(scene: SimScene, state: SimState, external=None) -> SimState:
    """One backward-Euler step of the damped corotational system."""
    model = scene.model()
    dt = scene.dt
    state.check_finite()
    x = state.positions
    v = state.velocities.ravel()

    f_el, Krot = model.elastic_forces(x, with_stiffness=True)
    K = model.assemble_stiffness(Krot)
    M, C = model.damping_matrices(K)
    f = f_el + model.external_forces(x, state.pressures, extra=external)
    rhs = dt * (f - C @ v) - dt * dt * (K @ v)
    A = M + dt * C + dt * dt * K

    free = model.free
    dv = np.zeros_like(v)
    if np.any(~free):
        # held dofs keep zero velocity, so the coupling term vanishes
        idx = np.flatnonzero(free)
        A_ff = A[idx][:, idx]
        dv[idx] = spla.spsolve(A_ff.tocsc(), rhs[idx])
    else:
        dv = spla.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(dv)):
        raise DivergenceError("linear solve produced non-finite velocities")

    v_new = v + dv
    x_new = x + dt * v_new.reshape(-1, 3)
    out = SimState(x_new, v_new.reshape(-1, 3), state.time + dt, state.pressures.copy())
    out.check_finite()
    return out


def residual_forces(scene: SimScene, state: SimState, external=None):
    """Static out-of-balance force per free dof (mN, flat)."""
    model = scene.model()
    f_el, _ = model.elastic_forces(state.positions)
    f = f_el + model.external_forces(state.positions, state.pressures, extra=external)
    f[~model.free] = 0.0
    return f


def solve_quasistatic(
    scene: SimScene,
    pressures,
    tol=1e-4,
    max_steps=2000,
    external=None,
    state=None,
) -> SimState:
    """Dynamic relaxation to equilibrium: step until the residual force (N)
    on free dofs drops below tol."""
    model = scene.model()
    mats = scene.material_by_tag.values()
    if all(m.rayleigh_mass == 0 and m.rayleigh_stiffness == 0 for m in mats):
        raise ConfigError("quasistatic relaxation needs damping > 0")
    if state is None:
        state = scene.rest_state()
    else:
        state = state.copy()
    state.pressures = np.asarray(pressures, dtype=float).copy()
    tol_mn = tol * MN_PER_N
    history = []
    for _ in range(max_steps):
        r = residual_forces(scene, state, external=external)
        res = float(np.abs(r).max())
        history.append(res)
        if res < tol_mn:
            state.velocities[:] = 0.0
            return state
        state = step_dynamic(scene, state, external=external)
        state.velocities *= 0.5  # kinetic damping accelerates settling
    raise ConvergenceError(
        f"quasistatic relaxation did not reach {tol} N in {max_steps} steps",
        history=history,
    )


def reaction_force_in_roi(scene: SimScene, state: SimState, roi, external=None):
    """Sum of anchoring forces (springs + Dirichlet reactions) in a box, in N.

    Returns (force_3vector_N, warning_flag) where the flag marks an empty roi.
    """
    model = scene.model()
    box_min, box_max = np.asarray(roi[0], dtype=float), np.asarray(roi[1], dtype=float)
    ids = nodes_in_box(scene.mesh, box_min, box_max)
    anchored = np.zeros(len(scene.mesh.nodes), dtype=bool)
    anchored[ids] = True
    has_anchor = (
        model.spring_k.reshape(-1, 3)[ids].any(axis=1) | model.fixed_dofs.reshape(-1, 3)[ids].any(axis=1)
    )
    if len(ids) == 0 or not has_anchor.any():
        return np.zeros(3), True

    f_spring = model.spring_forces(state.positions).reshape(-1, 3)
    total = f_spring[ids].sum(axis=0)

    # Dirichlet reaction = -(elastic + external w/o springs) on held dofs
    f_el, _ = model.elastic_forces(state.positions)
    f_ext = model.external_forces(state.positions, state.pressures, extra=external)
    resid = (f_el + f_ext - model.spring_forces(state.positions)).reshape(-1, 3)
    held = model.fixed_dofs.reshape(-1, 3)
    mask = anchored[:, None] & held
    total = total - (resid * mask).sum(axis=0)
    return total / MN_PER_N, False


# ---------------------------------------------------------------- manifests


def build_scene(manifest, base_dir=None) -> SimScene:
    """Construct a SimScene from a manifest dict or JSON file path."""
    if isinstance(manifest, (str, Path)):
        base_dir = Path(manifest).parent
        manifest = json.loads(Path(manifest).read_text())
    base_dir = Path(base_dir) if base_dir else Path(".")

    if "mesh_file" in manifest:
        mesh = read_vtk(base_dir / manifest["mesh_file"])
    elif "mesh" in manifest and isinstance(manifest["mesh"], TetMesh):
        mesh = manifest["mesh"]
    else:
        raise ConfigError("manifest needs a mesh_file")

    materials = {}
    for tag_text, props in manifest.get("materials", {}).items():
        tag = RegionTag.parse(tag_text)
        materials[tag.code] = Material(
            young_modulus=props["E_kPa"],
            poisson_ratio=props.get("nu", 0.45),
            density=props.get("density", 1.1e-3),
            rayleigh_mass=props.get("rayleigh_mass", 0.1),
            rayleigh_stiffness=props.get("rayleigh_stiffness", 0.1),
        )
    present = set(np.unique(mesh.tet_tags))
    missing = present - set(materials)
    if missing:
        names = ", ".join(str(RegionTag.from_code(c)) for c in sorted(missing))
        raise ConfigError(f"manifest omits material for region(s): {names}")

    fixed = []
    for fr in manifest.get("fixed_boxes", []):
        fixed.append(
            FixedRegion(
                box_min=np.asarray(fr["min"], dtype=float),
                box_max=np.asarray(fr["max"], dtype=float),
                stiffness=fr.get("stiffness_N_per_mm", 10.0),
                axes=tuple(fr.get("axes", (0, 1, 2))),
            )
        )

    outer = boundary_surface(mesh)
    cavities = []
    for cav in manifest.get("cavities", []):
        cid = int(cav["id"])
        if not 1 <= cid <= 5:
            raise ConfigError("cavity id must be in [1, 5]")
        bmin = np.asarray(cav["min"], dtype=float)
        bmax = np.asarray(cav["max"], dtype=float)
        cent = mesh.nodes[outer.triangles].mean(axis=1)
        sel = np.all((cent >= bmin) & (cent <= bmax), axis=1)
        if not sel.any():
            raise ConfigError(f"cavity {cid} surface not found in its box")
        cavities.append((cid, SurfacePatch(mesh, outer.triangles[sel])))

    monitors = []
    for mon in manifest.get("monitors", []):
        anchors = np.asarray(mon["anchors"], dtype=float).reshape(3, 3)
        triplet = np.array(
            [int(np.argmin(np.linalg.norm(mesh.nodes - a, axis=1))) for a in anchors]
        )
        monitors.append(Monitor(id=int(mon["id"]), node_triplet=triplet))

    roi = None
    if "force_roi" in manifest:
        roi = (
            np.asarray(manifest["force_roi"]["min"], dtype=float),
            np.asarray(manifest["force_roi"]["max"], dtype=float),
        )

    dirichlet = []
    for d in manifest.get("dirichlet_boxes", []):
        ids = nodes_in_box(mesh, np.asarray(d["min"], float), np.asarray(d["max"], float))
        dirichlet.append((ids, d.get("axis", "all")))

    return SimScene(
        mesh=mesh,
        material_by_tag=materials,
        fixed_regions=fixed,
        cavities=cavities,
        gravity=np.asarray(manifest.get("gravity", [0.0, 0.0, 0.0]), dtype=float),
        dt=float(manifest.get("dt_ms", 1.0)),
        monitors=monitors,
        force_roi=roi,
        dirichlet=dirichlet,
    )
