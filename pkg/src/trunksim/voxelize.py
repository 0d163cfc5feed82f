"""Structured tet meshing of voxelized solids.

Each occupied voxel splits into six tets around its main diagonal (Kuhn
subdivision), which is face-conforming across the whole grid. This gives the
toolkit a self-contained way to build test specimens and the reference
gripper without an external Delaunay mesher.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyGeometryError
from .lattice import TpmsField, eval_field
from .mesh import TetMesh

# corner bit order: (x, y, z); paths 000 -> 111 inserting one axis at a time
_KUHN_PATHS = [
    (0b000, 0b001, 0b011, 0b111),
    (0b000, 0b001, 0b101, 0b111),
    (0b000, 0b010, 0b011, 0b111),
    (0b000, 0b010, 0b110, 0b111),
    (0b000, 0b100, 0b101, 0b111),
    (0b000, 0b100, 0b110, 0b111),
]
_CORNER_OFFSETS = np.array(
    [[(b >> 0) & 1, (b >> 1) & 1, (b >> 2) & 1] for b in range(8)], dtype=np.int64
)


def voxel_tet_mesh(occupancy, origin=(0.0, 0.0, 0.0), spacing=1.0, voxel_tags=None):
    """Tet-mesh the occupied voxels of a 3D boolean array.

    voxel_tags, when given, is an integer array of the occupancy shape; each
    voxel's tag is copied to its six tets.
    """
    occ = np.asarray(occupancy, dtype=bool)
    if not occ.any():
        raise EmptyGeometryError("no occupied voxels")
    origin = np.asarray(origin, dtype=float)
    vx = np.argwhere(occ)  # (k, 3) voxel indices

    # global corner ids on the (nx+1, ny+1, nz+1) lattice, restricted to used corners
    corner_idx = vx[:, None, :] + _CORNER_OFFSETS[None, :, :]  # (k, 8, 3)
    dims = np.array(occ.shape) + 1
    flat = (
        corner_idx[..., 0] * dims[1] * dims[2]
        + corner_idx[..., 1] * dims[2]
        + corner_idx[..., 2]
    )
    uniq, local = np.unique(flat, return_inverse=True)
    local = local.reshape(flat.shape)  # (k, 8)
    gx = uniq // (dims[1] * dims[2])
    gy = (uniq // dims[2]) % dims[1]
    gz = uniq % dims[2]
    nodes = origin + spacing * np.stack([gx, gy, gz], axis=1).astype(float)

    tets = np.concatenate([local[:, list(path)] for path in _KUHN_PATHS], axis=0)
    if voxel_tags is not None:
        tags = np.asarray(voxel_tags)[tuple(vx.T)]
        tet_tags = np.tile(tags, 6)
    else:
        tet_tags = None
    return TetMesh(nodes, tets, tet_tags)


def lattice_occupancy(field: TpmsField, box_min, box_max, voxels_per_cell: int):
    """Boolean occupancy of the lattice solid sampled at voxel centers."""
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    spacing = field.cell_size_L / float(voxels_per_cell)
    counts = np.maximum(np.round((box_max - box_min) / spacing).astype(int), 1)
    axes = [box_min[k] + spacing * (np.arange(counts[k]) + 0.5) for k in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = eval_field(field, grid.reshape(-1, 3)).reshape(grid.shape[:3])
    return values >= field.isovalue_t, box_min, spacing


def lattice_voxel_mesh(field: TpmsField, box_min, box_max, voxels_per_cell: int):
    """Voxelized tet mesh of the lattice solid inside a box."""
    occ, origin, spacing = lattice_occupancy(field, box_min, box_max, voxels_per_cell)
    if not occ.any():
        raise EmptyGeometryError("lattice solid does not intersect the box")
    return voxel_tet_mesh(occ, origin, spacing)


def box_voxel_mesh(box_min, box_max, spacing):
    """Solid rectangular block as a voxel tet mesh."""
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    counts = np.maximum(np.round((box_max - box_min) / spacing).astype(int), 1)
    occ = np.ones(counts, dtype=bool)
    return voxel_tet_mesh(occ, box_min, spacing)
