import numpy as np
import pytest

from fresnelwave.errors import ValidationError
from fresnelwave.io import emit_plotdata, export_mesh, import_mesh, read_field, write_field
from fresnelwave.meshing import SurfaceMesh, classify_and_mesh


def test_mesh_round_trip_is_byte_identical(tmp_path, biaxial):
    mesh = classify_and_mesh(biaxial, 0.0, h=0.35)
    obj, csv = export_mesh(mesh, tmp_path / "a")
    back = import_mesh(obj)
    obj2, csv2 = export_mesh(back, tmp_path / "b")
    assert obj.read_bytes() == obj2.read_bytes()
    assert csv.read_bytes() == csv2.read_bytes()
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    assert list(back.regions) == list(mesh.regions)


def test_empty_mesh_round_trip(tmp_path):
    obj, _ = export_mesh(SurfaceMesh.empty(), tmp_path / "e")
    back = import_mesh(obj)
    assert back.vertices.shape == (0, 3) and back.triangles.shape == (0, 3)


def test_field_round_trip(tmp_path):
    data = (np.arange(24) + 1j * np.arange(24)[::-1]).reshape(2, 3, 4).astype(np.complex64)
    raw, meta = write_field(tmp_path / "f", data, {"delta": 0.1})
    assert raw.stat().st_size == data.nbytes
    back, info = read_field(raw)
    np.testing.assert_array_equal(back, data)
    assert info["shape"] == [2, 3, 4] and info["delta"] == 0.1


def test_missing_files_raise_validation_error(tmp_path):
    with pytest.raises(ValidationError):
        read_field(tmp_path / "nothing")
    with pytest.raises(ValidationError):
        import_mesh(tmp_path / "nothing")


def test_plotdata_without_fits(tmp_path):
    paths = emit_plotdata({"reports": []}, tmp_path)
    assert [p.name for p in paths] == ["fits.csv"]
    assert paths[0].read_text().count("\n") == 1


def test_field_names_with_dots_do_not_collide(tmp_path):
    a = np.ones(3, np.complex64)
    write_field(tmp_path / "field_delta_0.1", a)
    write_field(tmp_path / "field_delta_0.01", 2 * a)
    assert read_field(tmp_path / "field_delta_0.1")[0][0] == 1
    assert read_field(tmp_path / "field_delta_0.01.c64")[0][0] == 2
