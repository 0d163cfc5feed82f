import numpy as np
import pytest

from trunksim.errors import FormatError, ParseError
from trunksim.mesh import RegionTag
from trunksim.mesh_io import mesh_io, read_vtk, write_vtk
from trunksim.surface import read_stl, write_stl
from trunksim.voxelize import box_voxel_mesh


def tagged_mesh():
    mesh = box_voxel_mesh((0, 0, 0), (2, 1, 1), 1.0)
    tags = mesh.tet_tags.copy()
    tags[:6] = RegionTag("sensor", 3).code
    nodes = mesh.node_tags.copy()
    nodes[:4] = RegionTag("fixed_base").code
    return mesh.with_tet_tags(tags).with_node_tags(nodes)


class TestVtkRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        mesh = tagged_mesh()
        path = tmp_path / "mesh.vtk"
        write_vtk(mesh, path)
        back = read_vtk(path)
        assert np.array_equal(back.nodes, mesh.nodes)
        assert np.array_equal(back.tets, mesh.tets)
        assert np.array_equal(back.tet_tags, mesh.tet_tags)
        assert np.array_equal(back.node_tags, mesh.node_tags)

    def test_coordinates_preserved_to_last_bit(self, tmp_path):
        mesh = box_voxel_mesh((0, 0, 0), (1, 1, 1), 1.0)
        jittered = mesh.nodes + np.pi * 1e-7
        mesh = type(mesh)(jittered, mesh.tets, fix_orientation=False)
        path = tmp_path / "mesh.vtk"
        write_vtk(mesh, path)
        assert np.array_equal(read_vtk(path).nodes, jittered)

    def test_uniform_entry_point(self, tmp_path):
        mesh = tagged_mesh()
        path = tmp_path / "m.vtk"
        mesh_io(path, "vtk-legacy-ascii", "write", mesh=mesh)
        back = mesh_io(path, "vtk-legacy-ascii", "read")
        assert np.array_equal(back.tets, mesh.tets)

    def test_unsupported_format(self, tmp_path):
        with pytest.raises(FormatError):
            mesh_io(tmp_path / "x.obj", "obj", "read")


class TestVtkErrors:
    def write(self, tmp_path, text):
        path = tmp_path / "bad.vtk"
        path.write_text(text)
        return path

    def test_bad_token_reports_line(self, tmp_path):
        mesh = box_voxel_mesh((0, 0, 0), (1, 1, 1), 1.0)
        good = tmp_path / "good.vtk"
        write_vtk(mesh, good)
        lines = good.read_text().splitlines()
        lines[5] = "oops 0.0 0.0"  # first POINTS row
        bad = self.write(tmp_path, "\n".join(lines) + "\n")
        with pytest.raises(ParseError) as err:
            read_vtk(bad)
        assert err.value.line == 6

    def test_truncated_file(self, tmp_path):
        bad = self.write(
            tmp_path,
            "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 4 double\n0 0 0\n",
        )
        with pytest.raises(ParseError):
            read_vtk(bad)

    def test_non_tet_cells_rejected(self, tmp_path):
        bad = self.write(
            tmp_path,
            "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n"
            "POINTS 3 double\n0 0 0\n1 0 0\n0 1 0\n"
            "CELLS 1 4\n3 0 1 2\nCELL_TYPES 1\n5\n",
        )
        with pytest.raises(FormatError):
            read_vtk(bad)

    def test_wrong_dataset_type(self, tmp_path):
        bad = self.write(
            tmp_path,
            "# vtk DataFile Version 3.0\nt\nASCII\nDATASET STRUCTURED_POINTS\n",
        )
        with pytest.raises(FormatError):
            read_vtk(bad)


class TestStl:
    def test_round_trip_geometry(self, tmp_path):
        from trunksim.mesh import boundary_surface

        mesh = box_voxel_mesh((0, 0, 0), (2, 1, 1), 1.0)
        surf = boundary_surface(mesh).as_surface()
        path = tmp_path / "s.stl"
        write_stl(surf, path)
        back = read_stl(path)
        assert len(back.triangles) == len(surf.triangles)
        assert back.signed_volume() == pytest.approx(surf.signed_volume(), abs=1e-9)
