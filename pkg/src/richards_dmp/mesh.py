"""Structured simplicial meshes on intervals and rectangles.

Meshes carry the node partition used everywhere else in the package:
``boundary_nodes`` are the Dirichlet nodes (strongly imposed data) and
``interior_nodes`` are the unknowns, which includes nodes sitting on
zero-flux (natural) sides.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

RECT_SIDES = ("bottom", "top", "left", "right")
INTERVAL_SIDES = ("left", "right")

WEAKLY_ACUTE_TOL = 1e-14


class DegenerateElementError(ValueError):
    """Raised when a simplex has zero (or negative) measure."""


@dataclass(frozen=True)
class ElementGeometry:
    element_id: int
    volume: float
    basis_gradients: np.ndarray  # (dim+1, dim)
    diameter: float
    pairwise_grad_dots: np.ndarray  # (dim+1, dim+1)


def _simplex_geometry(coords: np.ndarray):
    """Volumes, P1 basis gradients and diameters for a batch of simplices.

    ``coords`` has shape (n_elements, dim+1, dim).
    """
    ne, nloc, dim = coords.shape
    edges = coords[:, 1:, :] - coords[:, :1, :]  # rows are edge vectors
    det = np.linalg.det(edges)
    volume = np.abs(det) / np.prod(np.arange(1, dim + 1))
    bad = np.flatnonzero(~(volume > 0.0))
    if bad.size:
        raise DegenerateElementError(f"degenerate element(s): {bad[:10].tolist()}")
    # x - x0 = E^T xi with E rows = edges, so grad(xi_k) = column k of E^{-1}
    inv = np.linalg.inv(edges)
    grads = np.empty((ne, nloc, dim))
    grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    diffs = coords[:, :, None, :] - coords[:, None, :, :]
    diameter = np.sqrt((diffs**2).sum(axis=-1)).reshape(ne, -1).max(axis=1)
    return volume, grads, diameter


class Mesh:
    """Conforming simplicial mesh in 1D or 2D.

    Parameters
    ----------
    vertices
        Array of shape (n_vertices, dim). In 2D the second coordinate is the
        vertical (gravity) axis; in 1D the only coordinate is vertical.
    elements
        Integer array of shape (n_elements, dim+1).
    boundary_nodes
        Indices of the Dirichlet nodes. All other nodes are interior unknowns.
    boundary_markers
        Optional map from Dirichlet node to side label.
    side_nodes
        Optional map from geometric side label to the nodes lying on it
        (whether or not that side is Dirichlet).
    """

    def __init__(
        self,
        vertices,
        elements,
        boundary_nodes: Iterable[int],
        boundary_markers: dict[int, str] | None = None,
        side_nodes: dict[str, np.ndarray] | None = None,
    ):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        if self.vertices.ndim == 1:
            self.vertices = self.vertices[:, None]
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        self.dim = self.vertices.shape[1]
        if self.dim not in (1, 2):
            raise ValueError("only 1D and 2D meshes are supported")
        if self.elements.ndim != 2 or self.elements.shape[1] != self.dim + 1:
            raise ValueError(f"elements must have {self.dim + 1} vertices each")
        nv = len(self.vertices)
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= nv):
            raise ValueError("element vertex index out of range")
        bnd = np.unique(np.asarray(list(boundary_nodes), dtype=np.int64))
        if bnd.size and (bnd.min() < 0 or bnd.max() >= nv):
            raise ValueError("boundary node index out of range")
        self.boundary_nodes = bnd
        mask = np.ones(nv, dtype=bool)
        mask[bnd] = False
        self.interior_nodes = np.flatnonzero(mask)
        self.is_boundary = ~mask
        self.boundary_markers = dict(boundary_markers or {})
        self.side_nodes = {k: np.asarray(v, dtype=np.int64) for k, v in (side_nodes or {}).items()}
        # fail fast on degenerate simplices
        self._geometry  # noqa: B018

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def _geometry(self):
        return _simplex_geometry(self.vertices[self.elements])

    @property
    def volumes(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def gradients(self) -> np.ndarray:
        """Basis gradients, shape (n_elements, dim+1, dim)."""
        return self._geometry[1]

    @property
    def diameters(self) -> np.ndarray:
        return self._geometry[2]

    @cached_property
    def grad_dots(self) -> np.ndarray:
        """Local Gram matrices of basis gradients, shape (n_elements, dim+1, dim+1)."""
        g = self.gradients
        return np.einsum("eid,ejd->eij", g, g)

    @property
    def measure(self) -> float:
        return float(self.volumes.sum())

    def __repr__(self) -> str:
        return (
            f"Mesh(dim={self.dim}, n_vertices={self.n_vertices}, "
            f"n_elements={self.n_elements}, n_boundary={len(self.boundary_nodes)})"
        )


def build_rect_mesh(L: float, H: float, nx: int, nz: int, dirichlet_sides) -> Mesh:
    """Right-triangle mesh of (0, L) x (0, H).

    Every grid cell is split along its lower-left to upper-right diagonal.
    Nodes on ``dirichlet_sides`` form the Dirichlet set; nodes on any other
    side stay interior and receive the natural zero-flux condition. A
    corner shared by a Dirichlet and a non-Dirichlet side is Dirichlet.
    """
    if not (L > 0 and H > 0):
        raise ValueError("L and H must be positive")
    if int(nx) != nx or int(nz) != nz or nx < 1 or nz < 1:
        raise ValueError("nx and nz must be positive integers")
    nx, nz = int(nx), int(nz)
    sides = set(dirichlet_sides)
    if not sides:
        raise ValueError("at least one Dirichlet side is required")
    unknown = sides - set(RECT_SIDES)
    if unknown:
        raise ValueError(f"unknown side label(s): {sorted(unknown)}")

    xs = np.linspace(0.0, L, nx + 1)
    zs = np.linspace(0.0, H, nz + 1)
    X, Z = np.meshgrid(xs, zs)  # row index = z level
    vertices = np.column_stack([X.ravel(), Z.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(nz))
    i, j = i.ravel(), j.ravel()
    ll, lr, ur, ul = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    elements = np.empty((2 * len(ll), 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    all_i, all_j = np.meshgrid(np.arange(nx + 1), np.arange(nz + 1))
    all_i, all_j = all_i.ravel(), all_j.ravel()
    side_nodes = {
        "bottom": vid(np.arange(nx + 1), 0),
        "top": vid(np.arange(nx + 1), nz),
        "left": vid(0, np.arange(nz + 1)),
        "right": vid(nx, np.arange(nz + 1)),
    }
    markers: dict[int, str] = {}
    for side in RECT_SIDES:
        if side in sides:
            for node in side_nodes[side]:
                markers.setdefault(int(node), side)
    return Mesh(vertices, elements, sorted(markers), markers, side_nodes)


def build_interval_mesh(H: float, n_points: int) -> Mesh:
    """Uniform mesh of (0, H) with ``n_points`` vertices; both ends Dirichlet."""
    if not H > 0:
        raise ValueError("H must be positive")
    if int(n_points) != n_points or n_points < 2:
        raise ValueError("n_points must be an integer >= 2")
    n_points = int(n_points)
    z = np.linspace(0.0, H, n_points)
    elements = np.column_stack([np.arange(n_points - 1), np.arange(1, n_points)])
    last = n_points - 1
    markers = {0: "left", last: "right"}
    side_nodes = {"left": np.array([0]), "right": np.array([last])}
    return Mesh(z[:, None], elements, [0, last], markers, side_nodes)


def element_geometry(mesh: Mesh, element_id: int) -> ElementGeometry:
    if not 0 <= element_id < mesh.n_elements:
        raise IndexError(f"element id {element_id} out of range")
    return ElementGeometry(
        element_id=int(element_id),
        volume=float(mesh.volumes[element_id]),
        basis_gradients=mesh.gradients[element_id].copy(),
        diameter=float(mesh.diameters[element_id]),
        pairwise_grad_dots=mesh.grad_dots[element_id].copy(),
    )


@dataclass
class WeaklyAcuteReport:
    passed: bool
    tolerance: float
    # (element, local i, local j, grad_i . grad_j) for every offending pair
    violations: list[tuple[int, int, int, float]] = field(default_factory=list)

    @property
    def max_dot(self) -> float:
        return max((v[3] for v in self.violations), default=float("nan"))


def check_weakly_acute(mesh: Mesh, tol: float = WEAKLY_ACUTE_TOL) -> WeaklyAcuteReport:
    """Report every local pair with ``grad phi_i . grad phi_j > tol``."""
    dots = mesh.grad_dots
    nloc = mesh.dim + 1
    iu, ju = np.triu_indices(nloc, k=1)
    pair = dots[:, iu, ju]
    e_idx, p_idx = np.nonzero(pair > tol)
    violations = [
        (int(e), int(iu[p]), int(ju[p]), float(pair[e, p])) for e, p in zip(e_idx, p_idx)
    ]
    return WeaklyAcuteReport(passed=not violations, tolerance=tol, violations=violations)


def write_mesh_text(mesh: Mesh, path) -> None:
    """Plain-text dump: header, vertices, elements, Dirichlet nodes with labels."""
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    lines += [" ".join(str(int(k)) for k in e) for e in mesh.elements]
    lines.append(str(len(mesh.boundary_nodes)))
    for node in mesh.boundary_nodes:
        label = mesh.boundary_markers.get(int(node), "-")
        lines.append(f"{int(node)} {label}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh_text(path) -> Mesh:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    dim, nv, ne = (int(x) for x in rows[0])
    verts = np.array([[float(x) for x in r] for r in rows[1 : 1 + nv]]).reshape(nv, dim)
    elems = np.array([[int(x) for x in r] for r in rows[1 + nv : 1 + nv + ne]], dtype=np.int64)
    nb = int(rows[1 + nv + ne][0])
    markers = {}
    for r in rows[2 + nv + ne : 2 + nv + ne + nb]:
        markers[int(r[0])] = r[1] if len(r) > 1 else "-"
    return Mesh(verts, elems.reshape(ne, dim + 1), sorted(markers), markers)
