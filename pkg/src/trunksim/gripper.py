"""Procedural two-finger gripper scene used by the examples and tests.

A voxelized base slab carries three internal pressure chambers; two solid
fingers rise from it. The finger bladders act on the outer finger faces as
follower surface loads, so positive pressure closes the gripper and negative
pressure opens it. Sensor voxel strips near each finger's neutral plane
become stiffer subdomains when the scene is built with sensors enabled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import FixedRegion, Material, Monitor, SimScene
from .mesh import TAG_LATTICE, TAG_SENSOR_BASE, SurfacePatch, TetMesh, boundary_surface
from .mesh_io import write_vtk
from .placement import CandidateSite
from .voxelize import voxel_tet_mesh


@dataclass(frozen=True)
class GripperDesign:
    voxel: float = 3.0  # mm
    base_nx: int = 10  # base footprint in voxels (x)
    base_ny: int = 3
    base_nz: int = 5
    finger_nx: int = 4  # finger cross-section in voxels (x is the bending plane)
    finger_ny: int = 3
    finger_nz: int = 20
    envelope_E: float = 4700.0  # kPa, tuned so close2 lands in the trajectory bands
    poisson: float = 0.45
    density: float = 1.1e-3  # mg/mm^3
    rayleigh_mass: float = 0.35  # 1/ms, settles the ramps without ringing
    rayleigh_stiffness: float = 0.02
    sensor_factor: float = 10.0  # sensor modulus multiplier (Model B)
    base_spring: float = 20.0  # N/mm anchoring the bottom voxel layer
    dt: float = 25.0  # ms

    @property
    def base_height(self):
        return self.base_nz * self.voxel

    @property
    def finger_len(self):
        return self.finger_nz * self.voxel


def _grid_shape(d: GripperDesign):
    nx = d.base_nx
    ny = d.base_ny
    nz = d.base_nz + d.finger_nz
    return nx, ny, nz


def build_gripper_grid(d: GripperDesign):
    """Occupancy + tag + cavity-id voxel grids for the whole gripper."""
    nx, ny, nz = _grid_shape(d)
    occ = np.zeros((nx, ny, nz), dtype=bool)
    tags = np.full((nx, ny, nz), TAG_LATTICE, dtype=np.int64)
    cav = np.zeros((nx, ny, nz), dtype=np.int64)  # cavity id per VOID voxel

    occ[:, :, : d.base_nz] = True

    # fingers at the two x-ends of the base; finger 0 is dorsal, 1 ventral
    f0x = 0
    f1x = nx - d.finger_nx
    zf = slice(d.base_nz, nz)
    occ[f0x : f0x + d.finger_nx, :ny, zf] = True
    occ[f1x : f1x + d.finger_nx, :ny, zf] = True

    # base chambers: single-voxel voids in the mid layer (ids 1..3)
    zb = d.base_nz // 2
    for k, cx in enumerate(np.linspace(1, nx - 2, 3).astype(int), start=1):
        occ[cx, ny // 2, zb] = False
        cav[cx, ny // 2, zb] = k

    # sensor strips (ids 1..6): per finger a bending strip (lower half) and an
    # actuator strip (upper half) one column in from the outer face near the
    # neutral plane, plus an inner-face tactile strip at the tip
    half = d.base_nz + d.finger_nz // 2
    for j, (near, inner) in enumerate(
        [(f0x + 1, f0x + d.finger_nx - 1), (f1x + d.finger_nx - 2, f1x)]
    ):
        s = 3 * j
        tags[near, 0, d.base_nz : half] = TAG_SENSOR_BASE + s + 1  # bending
        tags[near, 0, half : nz] = TAG_SENSOR_BASE + s + 2  # actuator
        tags[inner, ny // 2, nz - 3 : nz] = TAG_SENSOR_BASE + s + 3  # tactile
    tags[~occ] = TAG_LATTICE
    return occ, tags, cav


def cavity_boxes(d: GripperDesign):
    """Per-cavity boxes selecting the pressure surfaces.

    1-3 enclose the base chamber voids; 4 and 5 hug the outer finger faces
    (the bladder contact patches, lower 60% of the finger).
    """
    occ, _, cav = build_gripper_grid(d)
    nx, ny, nz = _grid_shape(d)
    v = d.voxel
    boxes = {}
    for cid in range(1, 4):
        idx = np.argwhere(cav == cid)
        lo = idx.min(axis=0) * v - 0.25 * v
        hi = (idx.max(axis=0) + 1) * v + 0.25 * v
        boxes[cid] = (lo.tolist(), hi.tolist())
    z_lo = d.base_height + 0.1
    z_hi = d.base_height + 0.6 * d.finger_len
    boxes[4] = ([-0.3, -0.3, z_lo], [0.3, ny * v + 0.3, z_hi])  # dorsal outer face
    boxes[5] = ([nx * v - 0.3, -0.3, z_lo], [nx * v + 0.3, ny * v + 0.3, z_hi])
    return boxes


def build_gripper_mesh(d: GripperDesign | None = None) -> TetMesh:
    d = d or GripperDesign()
    occ, tags, _ = build_gripper_grid(d)
    return voxel_tet_mesh(occ, origin=(0.0, 0.0, 0.0), spacing=d.voxel, voxel_tags=tags)


def default_sites(d: GripperDesign | None = None):
    """Candidate sensing sites on the ventral finger and both inner tips."""
    d = d or GripperDesign()
    nx, _, nz = _grid_shape(d)
    v = d.voxel
    x_out = (nx - d.finger_nx) * v  # ventral finger inner face
    x_far = nx * v  # ventral finger outer face
    y = (d.base_ny // 2) * v
    ztop = nz * v
    zb = d.base_height

    def triplet(x, z_mid, dz):
        return [(x, y, z_mid - dz), (x, y, z_mid), (x, y, min(z_mid + dz, ztop))]

    # actuator site spans the finger so its angle tracks the full bend;
    # the bending site sits low where travel stays in the narrow band
    return [
        CandidateSite(id=1, role="actuator", anchors=triplet(x_far, zb + 0.55 * d.finger_len, 0.5 * d.finger_len)),
        CandidateSite(id=2, role="bending", anchors=triplet(x_far, zb + 0.15 * d.finger_len, 0.1 * d.finger_len)),
        CandidateSite(id=3, role="tactile", anchors=triplet(x_out, ztop - 2.5 * v, v)),
    ]


def reference_scene(d: GripperDesign | None = None, with_sensors=False) -> SimScene:
    """Full gripper SimScene; with_sensors stiffens the sensor subdomains."""
    d = d or GripperDesign()
    mesh = build_gripper_mesh(d)
    env = Material(
        young_modulus=d.envelope_E,
        poisson_ratio=d.poisson,
        density=d.density,
        rayleigh_mass=d.rayleigh_mass,
        rayleigh_stiffness=d.rayleigh_stiffness,
    )
    sensor = Material(
        young_modulus=d.envelope_E * (d.sensor_factor if with_sensors else 1.0),
        poisson_ratio=d.poisson,
        density=d.density,
        rayleigh_mass=d.rayleigh_mass,
        rayleigh_stiffness=d.rayleigh_stiffness,
    )
    materials = {int(t): (sensor if t >= TAG_SENSOR_BASE else env) for t in np.unique(mesh.tet_tags)}
    lo = mesh.nodes.min(axis=0)
    hi = mesh.nodes.max(axis=0)
    fixed = [
        FixedRegion(
            box_min=lo - 0.1,
            box_max=np.array([hi[0] + 0.1, hi[1] + 0.1, lo[2] + 0.1 * d.voxel]),
            stiffness=d.base_spring,
        )
    ]
    outer = boundary_surface(mesh)
    cent = mesh.nodes[outer.triangles].mean(axis=1)
    cavities = []
    for cid, (bmin, bmax) in cavity_boxes(d).items():
        sel = np.all((cent >= np.asarray(bmin)) & (cent <= np.asarray(bmax)), axis=1)
        cavities.append((cid, SurfacePatch(mesh, outer.triangles[sel])))
    scene = SimScene(
        mesh=mesh,
        material_by_tag=materials,
        fixed_regions=fixed,
        cavities=cavities,
        gravity=np.zeros(3),
        dt=d.dt,
    )

    sites = default_sites(d)
    from .placement import resolve_site

    monitors = []
    for s in sites:
        rs = resolve_site(scene, s)
        monitors.append(Monitor(id=rs.id, node_triplet=rs.node_triplet))
    scene.monitors = monitors
    return scene


def write_gripper_manifest(out_dir, d: GripperDesign | None = None):
    """Emit mesh VTK + scene manifest JSON consumable by build_scene."""
    d = d or GripperDesign()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = build_gripper_mesh(d)
    mesh_path = out / "gripper.vtk"
    write_vtk(mesh, mesh_path)
    lo = mesh.nodes.min(axis=0)
    hi = mesh.nodes.max(axis=0)
    materials = {
        "lattice_volume": {
            "E_kPa": d.envelope_E,
            "nu": d.poisson,
            "density": d.density,
            "rayleigh_mass": d.rayleigh_mass,
            "rayleigh_stiffness": d.rayleigh_stiffness,
        }
    }
    for j in range(1, 7):
        materials[f"sensor{j}"] = {
            "E_kPa": d.envelope_E * d.sensor_factor,
            "nu": d.poisson,
            "density": d.density,
            "rayleigh_mass": d.rayleigh_mass,
            "rayleigh_stiffness": d.rayleigh_stiffness,
        }
    sites = default_sites(d)
    manifest = {
        "mesh_file": mesh_path.name,
        "materials": materials,
        "fixed_boxes": [
            {
                "min": list(lo - 0.1),
                "max": [hi[0] + 0.1, hi[1] + 0.1, lo[2] + 0.1 * d.voxel],
                "stiffness_N_per_mm": d.base_spring,
            }
        ],
        "cavities": [
            {"id": cid, "min": b[0], "max": b[1]} for cid, b in cavity_boxes(d).items()
        ],
        "monitors": [
            {"id": s.id, "anchors": np.asarray(s.anchors).tolist()} for s in sites
        ],
        "gravity": [0.0, 0.0, 0.0],
        "dt_ms": d.dt,
    }
    manifest_path = out / "gripper_scene.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
