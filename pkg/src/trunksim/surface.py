"""Triangle surfaces: validity checks, containment queries, ray casting, STL I/O."""

from __future__ import annotations

import struct

import numba
import numpy as np

from .errors import GeometryError, ParseError

DEGENERATE_AREA_TOL = 1e-10  # mm^2


class TriSurface:
    """Indexed triangle surface in millimetres.

    vertices: (n, 3) float array, triangles: (m, 3) int array.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise GeometryError("triangle index out of range")

    def __len__(self):
        return len(self.triangles)

    def triangle_corners(self):
        """Return (m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def areas(self):
        c = self.triangle_corners()
        return 0.5 * np.linalg.norm(
            np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1
        )

    def normals(self):
        """Unit normals per triangle (right-hand rule)."""
        c = self.triangle_corners()
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        lens = np.linalg.norm(n, axis=1)
        lens[lens == 0] = 1.0
        return n / lens[:, None]

    def signed_volume(self):
        """Enclosed volume; positive when triangles are oriented outward."""
        c = self.triangle_corners()
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def edge_counts(self):
        """Map from undirected edge to number of incident triangles."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return counts

    def is_watertight(self):
        """Every undirected edge shared by exactly two triangles."""
        if len(self.triangles) == 0:
            return False
        return bool(np.all(self.edge_counts() == 2))

    def validate(self):
        if not self.is_watertight():
            raise GeometryError("surface is not watertight")
        if np.any(self.areas() <= DEGENERATE_AREA_TOL):
            raise GeometryError("surface contains degenerate triangles")

    def oriented_outward(self):
        """Return a copy with consistent outward orientation (positive volume)."""
        if self.signed_volume() < 0:
            return TriSurface(self.vertices, self.triangles[:, [0, 2, 1]])
        return self

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@numba.njit(cache=True, parallel=True)
def _ray_min_dist(v0, e1, e2, origins, directions, eps):
    n_rays = origins.shape[0]
    n_tri = v0.shape[0]
    best = np.full(n_rays, np.inf)
    for r in numba.prange(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = directions[r, 0], directions[r, 1], directions[r, 2]
        bmin = np.inf
        for i in range(n_tri):
            e2x, e2y, e2z = e2[i, 0], e2[i, 1], e2[i, 2]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = px * e1[i, 0] + py * e1[i, 1] + pz * e1[i, 2]
            if abs(det) < 1e-14:
                continue
            inv = 1.0 / det
            tx = ox - v0[i, 0]
            ty = oy - v0[i, 1]
            tz = oz - v0[i, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < -1e-12 or u > 1.0 + 1e-12:
                continue
            qx = ty * e1[i, 2] - tz * e1[i, 1]
            qy = tz * e1[i, 0] - tx * e1[i, 2]
            qz = tx * e1[i, 1] - ty * e1[i, 0]
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < -1e-12 or u + v > 1.0 + 1e-12:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t > eps and t < bmin:
                bmin = t
        best[r] = bmin
    return best


def ray_hits(surface: TriSurface, origins, directions, eps=1e-9):
    """Distance to the nearest triangle hit per ray (inf when none)."""
    origins = np.ascontiguousarray(np.atleast_2d(np.asarray(origins, dtype=float)))
    directions = np.ascontiguousarray(np.atleast_2d(np.asarray(directions, dtype=float)))
    corners = surface.triangle_corners()
    v0 = np.ascontiguousarray(corners[:, 0])
    e1 = np.ascontiguousarray(corners[:, 1] - corners[:, 0])
    e2 = np.ascontiguousarray(corners[:, 2] - corners[:, 0])
    return _ray_min_dist(v0, e1, e2, origins, directions, float(eps))


@numba.njit(cache=True, parallel=True)
def _ray_parity(v0, e1, e2, points, d):
    n_pts = points.shape[0]
    n_tri = v0.shape[0]
    inside = np.zeros(n_pts, dtype=np.bool_)
    dx, dy, dz = d[0], d[1], d[2]
    for r in numba.prange(n_pts):
        ox, oy, oz = points[r, 0], points[r, 1], points[r, 2]
        crossings = 0
        for i in range(n_tri):
            e2x, e2y, e2z = e2[i, 0], e2[i, 1], e2[i, 2]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = px * e1[i, 0] + py * e1[i, 1] + pz * e1[i, 2]
            if abs(det) < 1e-14:
                continue
            inv = 1.0 / det
            tx = ox - v0[i, 0]
            ty = oy - v0[i, 1]
            tz = oz - v0[i, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = ty * e1[i, 2] - tz * e1[i, 1]
            qy = tz * e1[i, 0] - tx * e1[i, 2]
            qz = tx * e1[i, 1] - ty * e1[i, 0]
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t > 0.0:
                crossings += 1
        inside[r] = (crossings % 2) == 1
    return inside


def points_inside(surface: TriSurface, points, rng=None):
    """Parity test: True where a point lies inside the closed surface."""
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    if rng is None:
        rng = np.random.default_rng(20260826)
    # fixed but skew direction avoids axis-aligned edge grazing
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    corners = surface.triangle_corners()
    v0 = np.ascontiguousarray(corners[:, 0])
    e1 = np.ascontiguousarray(corners[:, 1] - corners[:, 0])
    e2 = np.ascontiguousarray(corners[:, 2] - corners[:, 0])
    return _ray_parity(v0, e1, e2, points, d)


def sample_surface_points(surface: TriSurface, n, rng):
    """Area-weighted random points on the surface with their triangle indices."""
    areas = surface.areas()
    probs = areas / areas.sum()
    tri_idx = rng.choice(len(areas), size=n, p=probs)
    corners = surface.triangle_corners()[tri_idx]
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a = 1.0 - r1
    b = r1 * (1.0 - r2)
    c = r1 * r2
    pts = a[:, None] * corners[:, 0] + b[:, None] * corners[:, 1] + c[:, None] * corners[:, 2]
    return pts, tri_idx


# ---------------------------------------------------------------- STL I/O


def write_stl(surface: TriSurface, path, binary=True, name="trunksim"):
    corners = surface.triangle_corners()
    normals = surface.normals()
    if binary:
        with open(path, "wb") as fh:
            fh.write(name.encode()[:80].ljust(80, b"\0"))
            fh.write(struct.pack("<I", len(corners)))
            rec = np.zeros(len(corners), dtype=np.dtype("<12f4, <u2"))
            flat = np.concatenate([normals, corners.reshape(-1, 9)], axis=1)
            rec["f0"] = flat.astype("<f4")
            fh.write(rec.tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(f"solid {name}\n")
            for n, c in zip(normals, corners):
                fh.write(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
                fh.write("    outer loop\n")
                for v in c:
                    fh.write(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
                fh.write("    endloop\n  endfacet\n")
            fh.write(f"endsolid {name}\n")


def _weld_vertices(corners, tol=0.0):
    """Build an indexed surface from a triangle soup by exact coordinate welding."""
    flat = corners.reshape(-1, 3)
    if tol > 0:
        keys = np.round(flat / tol).astype(np.int64)
    else:
        keys = flat
    uniq, index = np.unique(keys, axis=0, return_inverse=True)
    verts = np.zeros((len(uniq), 3))
    np.add.at(verts, index, flat)
    counts = np.bincount(index, minlength=len(uniq)).astype(float)
    verts /= counts[:, None]
    tris = index.reshape(-1, 3)
    return TriSurface(verts, tris)


def read_stl(path):
    with open(path, "rb") as fh:
        head = fh.read(80)
        rest = fh.read()
    is_ascii = head.lstrip().startswith(b"solid")
    if is_ascii:
        # binary files may also start with "solid"; check record-count consistency
        if len(rest) >= 4:
            (n,) = struct.unpack("<I", rest[:4])
            if len(rest) == 4 + 50 * n:
                is_ascii = False
    if is_ascii:
        text = (head + rest).decode(errors="replace")
        coords = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            parts = line.split()
            if parts[:1] == ["vertex"]:
                if len(parts) != 4:
                    raise ParseError("malformed vertex line", line=lineno)
                try:
                    coords.append([float(x) for x in parts[1:]])
                except ValueError:
                    raise ParseError("non-numeric vertex coordinate", line=lineno)
        if len(coords) % 3 != 0:
            raise ParseError("vertex count not a multiple of 3")
        corners = np.array(coords).reshape(-1, 3, 3)
    else:
        (n,) = struct.unpack("<I", rest[:4])
        if len(rest) < 4 + 50 * n:
            raise ParseError("binary STL truncated")
        rec = np.frombuffer(rest[4 : 4 + 50 * n], dtype=np.dtype("<12f4, <u2"))
        corners = rec["f0"].reshape(-1, 12)[:, 3:].astype(float).reshape(-1, 3, 3)
    return _weld_vertices(corners)
