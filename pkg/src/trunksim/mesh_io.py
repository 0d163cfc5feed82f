"""VTK legacy ASCII and STL file exchange for tet meshes and surfaces."""

from __future__ import annotations

import numpy as np

from .errors import FormatError, ParseError
from .mesh import TetMesh
from .surface import TriSurface, read_stl, write_stl

VTK_TET = 10
VTK_TRIANGLE = 5


def write_vtk(mesh: TetMesh, path, title="trunksim mesh"):
    """Write a legacy ASCII VTK 3.0 UNSTRUCTURED_GRID with region tags."""
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(mesh.nodes)} double\n")
        for p in mesh.nodes:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        n = len(mesh.tets)
        fh.write(f"CELLS {n} {5 * n}\n")
        for t in mesh.tets:
            fh.write(f"4 {t[0]} {t[1]} {t[2]} {t[3]}\n")
        fh.write(f"CELL_TYPES {n}\n")
        fh.write("\n".join(["10"] * n) + "\n")
        fh.write(f"CELL_DATA {n}\n")
        fh.write("SCALARS region_tag int 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(str(int(x)) for x in mesh.tet_tags) + "\n")
        fh.write(f"POINT_DATA {len(mesh.nodes)}\n")
        fh.write("SCALARS region_tag int 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(str(int(x)) for x in mesh.node_tags) + "\n")


class _Tokens:
    """Line-tracking token stream over a VTK file."""

    def __init__(self, path):
        self.items = []  # (token, line_number)
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if lineno == 2:
                    continue  # free-form title line
                if line.startswith("#"):
                    continue
                for tok in line.split():
                    self.items.append((tok, lineno))
        self.pos = 0

    def next(self, expect=None):
        if self.pos >= len(self.items):
            raise ParseError("unexpected end of file", line=self.items[-1][1] if self.items else 0)
        tok, line = self.items[self.pos]
        self.pos += 1
        if expect is not None and tok.upper() != expect:
            raise ParseError(f"expected {expect!r}, found {tok!r}", line=line)
        return tok, line

    def next_int(self):
        tok, line = self.next()
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected integer, found {tok!r}", line=line)

    def next_float(self):
        tok, line = self.next()
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"expected number, found {tok!r}", line=line)

    def peek(self):
        if self.pos >= len(self.items):
            return None
        return self.items[self.pos][0]


def read_vtk(path) -> TetMesh:
    """Read a legacy ASCII VTK UNSTRUCTURED_GRID tet mesh with region tags."""
    toks = _Tokens(path)
    toks.next(expect="ASCII")
    toks.next(expect="DATASET")
    tok, line = toks.next()
    if tok.upper() != "UNSTRUCTURED_GRID":
        raise FormatError(f"unsupported dataset type {tok!r}")
    toks.next(expect="POINTS")
    n_pts = toks.next_int()
    toks.next()  # dtype
    pts = np.array([toks.next_float() for _ in range(3 * n_pts)]).reshape(-1, 3)
    toks.next(expect="CELLS")
    n_cells = toks.next_int()
    toks.next_int()  # total size
    cells = []
    for _ in range(n_cells):
        k = toks.next_int()
        cells.append([toks.next_int() for _ in range(k)])
    toks.next(expect="CELL_TYPES")
    if toks.next_int() != n_cells:
        raise ParseError("CELL_TYPES count mismatch")
    for _ in range(n_cells):
        ct = toks.next_int()
        if ct != VTK_TET:
            raise FormatError(f"unsupported VTK cell type {ct} (only tetrahedra)")
    tets = np.array(cells, dtype=np.int64)
    if tets.shape[1] != 4:
        raise FormatError("tetrahedral cells must list 4 nodes")

    tet_tags = None
    node_tags = None
    while toks.peek() is not None:
        section, _ = toks.next()
        section = section.upper()
        if section in ("CELL_DATA", "POINT_DATA"):
            count = toks.next_int()
            toks.next(expect="SCALARS")
            name, _ = toks.next()
            toks.next()  # dtype
            toks.next()  # components
            toks.next(expect="LOOKUP_TABLE")
            toks.next()  # table name
            values = np.array([toks.next_int() for _ in range(count)], dtype=np.int64)
            if name == "region_tag":
                if section == "CELL_DATA":
                    tet_tags = values
                else:
                    node_tags = values
        else:
            raise ParseError(f"unexpected section {section!r}")
    return TetMesh(pts, tets, tet_tags, node_tags, fix_orientation=False)


def mesh_io(path, format, direction, mesh=None, surface=None):
    """Uniform read/write entry point over the supported formats."""
    if format == "vtk-legacy-ascii":
        if direction == "write":
            write_vtk(mesh, path)
            return None
        return read_vtk(path)
    if format == "stl":
        if direction == "write":
            write_stl(surface, path)
            return None
        return read_stl(path)
    raise FormatError(f"unsupported format {format!r}")
