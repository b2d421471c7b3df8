"""Writers for diagnostics tables, saturation profiles and VTK snapshots."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .diagnostics import StepDiagnostics, diagnostics_header, format_value
from .mesh import Mesh

VTK_TRIANGLE = 5
VTK_LINE = 3


class DiagnosticsWriter:
    """Streams one CSV row per step and flushes after each row.

    Use as a context manager; rows already written survive a solver failure.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._fh = None
        self._writer = None
        self.columns = diagnostics_header()

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(self.columns)
        self._fh.flush()
        return self

    def write(self, diag: StepDiagnostics) -> None:
        row = diag.as_row()
        self._writer.writerow([format_value(row[c]) for c in self.columns])
        self._fh.flush()

    def __exit__(self, *exc):
        self._fh.close()
        return False


def read_diagnostics_csv(path) -> list[dict]:
    """Rows as dicts of floats (booleans as Python bools)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, text in row.items():
                if text in ("true", "false"):
                    parsed[key] = text == "true"
                else:
                    parsed[key] = float(text)
            out.append(parsed)
    return out


def vertical_profile(mesh: Mesh, values, x: float | None = None):
    """Sample a nodal P1 field along the vertical line through ``x``.

    Samples sit at the distinct vertex heights. In 1D the line is the whole
    interval and ``x`` is ignored. Returns ``(z, values)`` sorted by z.
    """
    values = np.asarray(values, dtype=float)
    if mesh.dim == 1:
        order = np.argsort(mesh.vertices[:, 0], kind="stable")
        return mesh.vertices[order, 0], values[order]
    if mesh.dim != 2:
        raise ValueError("profiles are defined for 1D and 2D meshes")
    xs = mesh.vertices[:, 0]
    if x is None:
        x = 0.5 * (xs.min() + xs.max())
    zs = np.unique(mesh.vertices[:, 1])
    pts = np.column_stack([np.full_like(zs, x), zs])
    return zs, interpolate_p1(mesh, values, pts)


def interpolate_p1(mesh: Mesh, values, points, tol: float = 1e-10) -> np.ndarray:
    """Evaluate the P1 interpolant of nodal ``values`` at 2D points."""
    values = np.asarray(values, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    X = mesh.vertices[mesh.elements]  # (ne, 3, 2)
    v0 = X[:, 0, :]
    T = np.stack([X[:, 1, :] - v0, X[:, 2, :] - v0], axis=-1)  # (ne, 2, 2)
    Tinv = np.linalg.inv(T)
    out = np.full(len(pts), np.nan)
    for k, p in enumerate(pts):
        lam12 = np.einsum("eij,ej->ei", Tinv, p - v0)
        lam = np.column_stack([1.0 - lam12.sum(axis=1), lam12])
        inside = np.flatnonzero(np.all(lam >= -tol, axis=1))
        if inside.size == 0:
            raise ValueError(f"point {tuple(p)} lies outside the mesh")
        e = inside[0]
        out[k] = lam[e] @ values[mesh.elements[e]]
    return out


def write_profile_csv(path, z, theta) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "theta"])
        for zi, ti in zip(z, theta):
            w.writerow([format_value(zi), format_value(ti)])


def write_vtk(path, mesh: Mesh, point_data: dict[str, np.ndarray], title: str = "richards") -> None:
    """Legacy ASCII VTK unstructured grid with nodal scalar fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nv, ne = mesh.n_vertices, mesh.n_elements
    pts = np.zeros((nv, 3))
    pts[:, : mesh.dim] = mesh.vertices
    cell_type = VTK_TRIANGLE if mesh.dim == 2 else VTK_LINE
    nloc = mesh.elements.shape[1]
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [" ".join(format_value(c) for c in p) for p in pts]
    lines.append(f"CELLS {ne} {ne * (nloc + 1)}")
    lines += [f"{nloc} " + " ".join(str(int(i)) for i in e) for e in mesh.elements]
    lines.append(f"CELL_TYPES {ne}")
    lines += [str(cell_type)] * ne
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (nv,):
                raise ValueError(f"field {name!r} must have one value per vertex")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [format_value(v) for v in arr]
    path.write_text("\n".join(lines) + "\n")
