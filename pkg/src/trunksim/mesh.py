"""Tagged tetrahedral meshes: merging, region tagging, boundary extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateElementError, GeometryError
from .surface import TriSurface, points_inside

log = logging.getLogger(__name__)

DEFAULT_MERGE_TOL = 1e-4  # mm, far below the 50 um feature floor

# region tag integer codes (persisted in VTK cell data)
TAG_LATTICE = 0
TAG_MEMBRANE_BASE = 100
TAG_CAVITY_BASE = 200
TAG_SENSOR_BASE = 300
TAG_FIXED_BASE = 400
TAG_FORCE_ROI = 500

_KIND_BASES = {
    "lattice_volume": TAG_LATTICE,
    "membrane": TAG_MEMBRANE_BASE,
    "cavity": TAG_CAVITY_BASE,
    "sensor": TAG_SENSOR_BASE,
    "fixed_base": TAG_FIXED_BASE,
    "force_roi": TAG_FORCE_ROI,
}


@dataclass(frozen=True)
class RegionTag:
    """Region label: kind plus small index (membrane/cavity 1..5, sensor 1..6)."""

    kind: str
    index: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_BASES:
            raise ConfigError(f"unknown region kind: {self.kind}")
        if self.kind in ("membrane", "cavity") and not 1 <= self.index <= 5:
            raise ConfigError(f"{self.kind} index must be in [1, 5]")
        if self.kind == "sensor" and not 1 <= self.index <= 6:
            raise ConfigError("sensor index must be in [1, 6]")
        if self.kind in ("lattice_volume", "fixed_base", "force_roi") and self.index != 0:
            raise ConfigError(f"{self.kind} takes no index")

    @property
    def code(self) -> int:
        return _KIND_BASES[self.kind] + self.index

    @staticmethod
    def from_code(code: int) -> "RegionTag":
        for kind, base in sorted(_KIND_BASES.items(), key=lambda kv: -kv[1]):
            if code >= base:
                idx = code - base
                return RegionTag(kind, idx) if idx else RegionTag(kind)
        raise ConfigError(f"invalid region code: {code}")

    @staticmethod
    def parse(text: str) -> "RegionTag":
        """Parse labels like "lattice_volume", "cavity3", "sensor2"."""
        for kind in _KIND_BASES:
            if text == kind:
                return RegionTag(kind)
            if text.startswith(kind) and text[len(kind):].isdigit():
                return RegionTag(kind, int(text[len(kind):]))
        raise ConfigError(f"unknown region tag: {text}")

    def __str__(self):
        return f"{self.kind}{self.index}" if self.index else self.kind


class TetMesh:
    """Immutable tetrahedral mesh with per-node and per-tet region codes."""

    def __init__(self, nodes, tets, tet_tags=None, node_tags=None, fix_orientation=True):
        self.nodes = np.asarray(nodes, dtype=float).reshape(-1, 3)
        self.tets = np.asarray(tets, dtype=np.int64).reshape(-1, 4)
        if self.tets.size and (self.tets.min() < 0 or self.tets.max() >= len(self.nodes)):
            raise GeometryError("tet index out of range")
        if tet_tags is None:
            tet_tags = np.zeros(len(self.tets), dtype=np.int64)
        if node_tags is None:
            node_tags = np.zeros(len(self.nodes), dtype=np.int64)
        self.tet_tags = np.asarray(tet_tags, dtype=np.int64).reshape(-1)
        self.node_tags = np.asarray(node_tags, dtype=np.int64).reshape(-1)
        if len(self.tet_tags) != len(self.tets) or len(self.node_tags) != len(self.nodes):
            raise GeometryError("tag array length mismatch")
        if fix_orientation and len(self.tets):
            vols = self.signed_volumes()
            flipped = vols < 0
            if np.any(flipped):
                log.info("repairing orientation of %d inverted tets", int(flipped.sum()))
                t = self.tets.copy()
                t[flipped] = t[flipped][:, [0, 1, 3, 2]]
                self.tets = t
        for arr in (self.nodes, self.tets, self.tet_tags, self.node_tags):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.tets)

    def signed_volumes(self):
        c = self.nodes[self.tets]
        return np.einsum(
            "ij,ij->i",
            c[:, 1] - c[:, 0],
            np.cross(c[:, 2] - c[:, 0], c[:, 3] - c[:, 0]),
        ) / 6.0

    def centroids(self):
        return self.nodes[self.tets].mean(axis=1)

    def validate(self, volume_floor=1e-12):
        vols = self.signed_volumes()
        if np.any(vols <= volume_floor):
            bad = int(np.argmin(vols))
            raise DegenerateElementError(
                f"tet {bad} has non-positive volume {vols[bad]:.3g}", element=bad
            )

    def with_tet_tags(self, tet_tags):
        return TetMesh(self.nodes, self.tets, tet_tags, self.node_tags, fix_orientation=False)

    def with_node_tags(self, node_tags):
        return TetMesh(self.nodes, self.tets, self.tet_tags, node_tags, fix_orientation=False)

    def tets_with_tag(self, tag: RegionTag):
        return np.flatnonzero(self.tet_tags == tag.code)


@dataclass
class SurfacePatch:
    """Boundary triangles of a mesh (or one tagged region), oriented outward."""

    mesh: TetMesh
    triangles: np.ndarray  # (k, 3) node indices
    outward: bool = True

    def as_surface(self) -> TriSurface:
        return TriSurface(self.mesh.nodes, self.triangles)

    def areas_and_normals(self, positions=None):
        """Triangle areas and unit normals, optionally in a deformed configuration."""
        pos = self.mesh.nodes if positions is None else positions
        c = pos[self.triangles]
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        lens = np.linalg.norm(n, axis=1)
        areas = 0.5 * lens
        lens[lens == 0] = 1.0
        return areas, n / lens[:, None]

    def enclosed_volume(self, positions=None):
        pos = self.mesh.nodes if positions is None else positions
        c = pos[self.triangles]
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def merge_meshes(parts, tol=DEFAULT_MERGE_TOL):
    """Merge part meshes, consolidating nodes from different parts within tol.

    Consolidated nodes take the coordinate average of their cluster; tags and
    connectivity are re-indexed. Raises when consolidation collapses a tet.
    """
    if not parts:
        raise ConfigError("merge_meshes needs at least one part")
    if not tol > 0:
        raise ConfigError("merge tolerance must be positive")
    if len(parts) == 1:
        return parts[0]

    offsets = np.cumsum([0] + [len(p.nodes) for p in parts])
    all_nodes = np.concatenate([p.nodes for p in parts])
    part_of = np.concatenate(
        [np.full(len(p.nodes), k) for k, p in enumerate(parts)]
    )
    n = len(all_nodes)
    uf = _UnionFind(n)

    cells = np.floor(all_nodes / tol).astype(np.int64)
    grid = {}
    for i in range(n):
        grid.setdefault(tuple(cells[i]), []).append(i)
    tol2 = tol * tol
    for i in range(n):
        ci = cells[i]
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    bucket = grid.get((ci[0] + dx, ci[1] + dy, ci[2] + dz))
                    if bucket is None:
                        continue
                    for j in bucket:
                        if j <= i or part_of[j] == part_of[i]:
                            continue
                        d = all_nodes[i] - all_nodes[j]
                        if d @ d <= tol2:
                            uf.union(i, j)

    roots = np.array([uf.find(i) for i in range(n)])
    uniq_roots, new_index = np.unique(roots, return_inverse=True)
    merged_nodes = np.zeros((len(uniq_roots), 3))
    np.add.at(merged_nodes, new_index, all_nodes)
    counts = np.bincount(new_index).astype(float)
    merged_nodes /= counts[:, None]

    node_tags = np.zeros(len(uniq_roots), dtype=np.int64)
    all_node_tags = np.concatenate([p.node_tags for p in parts])
    np.maximum.at(node_tags, new_index, all_node_tags)

    tets = np.concatenate(
        [p.tets + offsets[k] for k, p in enumerate(parts)]
    )
    tets = new_index[tets]
    tet_tags = np.concatenate([p.tet_tags for p in parts])

    merged = TetMesh(merged_nodes, tets, tet_tags, node_tags, fix_orientation=False)
    vols = merged.signed_volumes()
    if np.any(vols <= 1e-12):
        bad = int(np.argmin(vols))
        raise DegenerateElementError(
            f"node consolidation collapsed tet {bad} (volume {vols[bad]:.3g} mm^3)",
            element=bad,
        )
    return merged


def tag_region_by_enclosure(mesh: TetMesh, region: TriSurface, tag: RegionTag):
    """Tag every tet whose centroid lies inside the closed region surface.

    Returns (tagged mesh, count of tets tagged).
    """
    region.validate()
    inside = points_inside(region, mesh.centroids())
    tags = mesh.tet_tags.copy()
    tags[inside] = tag.code
    # carry the tag onto the member nodes as well
    node_tags = mesh.node_tags.copy()
    node_tags[np.unique(mesh.tets[inside])] = tag.code
    return mesh.with_tet_tags(tags).with_node_tags(node_tags), int(inside.sum())


_FACES = np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]])


def boundary_surface(mesh: TetMesh, tag_filter: RegionTag | None = None) -> SurfacePatch:
    """Outward-oriented boundary faces of the mesh or of one tagged region."""
    if tag_filter is not None:
        tets = mesh.tets[mesh.tet_tags == tag_filter.code]
    else:
        tets = mesh.tets
    if len(tets) == 0:
        return SurfacePatch(mesh, np.zeros((0, 3), dtype=np.int64))
    faces = tets[:, _FACES].reshape(-1, 3)
    keys = np.sort(faces, axis=1)
    _, index, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    boundary = faces[index[counts == 1]]
    return SurfacePatch(mesh, boundary)


def tag_region_by_box(mesh: TetMesh, box_min, box_max, tag: RegionTag, what="tets"):
    """Tag tets (by centroid) or nodes inside an axis-aligned box."""
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    if what == "tets":
        pts = mesh.centroids()
        inside = np.all((pts >= box_min) & (pts <= box_max), axis=1)
        tags = mesh.tet_tags.copy()
        tags[inside] = tag.code
        return mesh.with_tet_tags(tags), int(inside.sum())
    pts = mesh.nodes
    inside = np.all((pts >= box_min) & (pts <= box_max), axis=1)
    tags = mesh.node_tags.copy()
    tags[inside] = tag.code
    return mesh.with_node_tags(tags), int(inside.sum())


def nodes_in_box(mesh: TetMesh, box_min, box_max):
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    return np.flatnonzero(np.all((mesh.nodes >= box_min) & (mesh.nodes <= box_max), axis=1))
