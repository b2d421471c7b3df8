import numpy as np
import pytest

from richards_dmp.diagnostics import StepDiagnostics, diagnostics_header
from richards_dmp.io import (
    DiagnosticsWriter,
    interpolate_p1,
    read_diagnostics_csv,
    vertical_profile,
    write_profile_csv,
    write_vtk,
)
from richards_dmp.mesh import build_interval_mesh, build_rect_mesh


def _diag(t, **kw):
    base = dict(
        t=t, tau=1.0, tau_crit=float("inf"), mu_min=0.5, n_margin_violations=0, rowsum_min=-1e-3,
        peclet_max=0.1, peclet_condition_ok=False, theta_min=0.2, theta_max=0.8, upper_bound_M=0.8,
        explicit_condition_met=True, tau_crit_G=float("inf"), mu_min_G=0.5, n_margin_violations_G=0,
        newton_iterations=1, newton_residual=1e-15,
    )
    base.update(kw)
    return StepDiagnostics(**base)


def test_csv_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    rows = [_diag(1.0), _diag(2.0, theta_min=0.1 + 0.2, upper_bound_M=float("nan"))]
    with DiagnosticsWriter(path) as w:
        for r in rows:
            w.write(r)
    text = path.read_text().splitlines()
    assert text[0].split(",") == diagnostics_header()
    back = read_diagnostics_csv(path)
    assert len(back) == 2
    assert back[1]["theta_min"] == 0.1 + 0.2  # full float precision survives
    assert back[0]["tau_crit"] == float("inf")
    assert back[0]["condition_met"] is True and back[0]["peclet_ok"] is False
    assert np.isnan(back[1]["M"])


def test_writer_flushes_each_row(tmp_path):
    path = tmp_path / "d.csv"
    with DiagnosticsWriter(path) as w:
        w.write(_diag(1.0))
        assert len(path.read_text().splitlines()) == 2


def test_interpolation_exact_for_affine():
    mesh = build_rect_mesh(3, 2, 3, 4, {"bottom"})
    x, z = mesh.vertices.T
    vals = 1.0 + 2.0 * x - 0.5 * z
    pts = np.array([[0.3, 0.1], [2.9, 1.7], [1.5, 1.0], [3.0, 2.0]])
    assert np.allclose(interpolate_p1(mesh, vals, pts), 1.0 + 2.0 * pts[:, 0] - 0.5 * pts[:, 1])
    with pytest.raises(ValueError):
        interpolate_p1(mesh, vals, [[4.0, 0.0]])


def test_vertical_profile_2d_midline():
    mesh = build_rect_mesh(2, 4, 3, 4, {"bottom"})  # x = 1 is not a mesh line
    z = mesh.vertices[:, 1]
    zs, th = vertical_profile(mesh, 0.1 * z)
    assert np.allclose(zs, [0, 1, 2, 3, 4])
    assert np.allclose(th, 0.1 * zs)


def test_vertical_profile_1d_sorted():
    mesh = build_interval_mesh(2, 5)
    zs, th = vertical_profile(mesh, np.arange(5.0))
    assert np.allclose(zs, [0, 0.5, 1, 1.5, 2]) and np.allclose(th, np.arange(5.0))


def test_profile_csv(tmp_path):
    p = tmp_path / "sub" / "p.csv"
    write_profile_csv(p, [0.0, 1.0], [0.2, 0.3])
    assert p.read_text() == "z,theta\n0,0.20000000000000001\n1,0.29999999999999999\n"


def _parse_vtk(text):
    lines = text.splitlines()
    i = lines.index(next(l for l in lines if l.startswith("POINTS")))
    n = int(lines[i].split()[1])
    pts = np.array([[float(v) for v in l.split()] for l in lines[i + 1 : i + 1 + n]])
    j = i + 1 + n
    ne, size = map(int, lines[j].split()[1:])
    cells = [list(map(int, l.split())) for l in lines[j + 1 : j + 1 + ne]]
    k = j + 1 + ne
    types = [int(l) for l in lines[k + 1 : k + 1 + ne]]
    return lines, pts, ne, size, cells, types


def test_vtk_triangles(tmp_path):
    mesh = build_rect_mesh(1, 1, 1, 1, {"bottom"})
    path = tmp_path / "f.vtk"
    write_vtk(path, mesh, {"theta": np.arange(4.0)}, title="snap")
    lines, pts, ne, size, cells, types = _parse_vtk(path.read_text())
    assert lines[:4] == ["# vtk DataFile Version 3.0", "snap", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    assert pts.shape == (4, 3) and np.all(pts[:, 2] == 0)
    assert ne == 2 and size == 8 and all(c[0] == 3 for c in cells)
    assert types == [5, 5]
    k = lines.index("POINT_DATA 4")
    assert lines[k + 1 : k + 3] == ["SCALARS theta double 1", "LOOKUP_TABLE default"]
    assert [float(v) for v in lines[k + 3 : k + 7]] == [0, 1, 2, 3]


def test_vtk_lines_and_shape_check(tmp_path):
    mesh = build_interval_mesh(1, 3)
    write_vtk(tmp_path / "l.vtk", mesh, {"u": np.zeros(3)})
    _, pts, ne, _, cells, types = _parse_vtk((tmp_path / "l.vtk").read_text())
    assert ne == 2 and types == [3, 3] and cells[0][0] == 2
    assert np.allclose(pts[:, 0], [0, 0.5, 1])
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "bad.vtk", mesh, {"u": np.zeros(2)})
