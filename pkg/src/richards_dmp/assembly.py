"""Discrete operators built from a mesh, a soil model and a lagged state.

All coefficient integrals use vertex (nodal) quadrature, which is exact for
P1-interpolated coefficients and matches the lumped mass. The vertical
direction ``e_z`` is the last coordinate axis, pointing upward.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import constitutive as cm
from .mesh import Mesh
from .sparse import assemble


@dataclass
class AssembledOperators:
    lumped_mass: np.ndarray  # all nodes
    stiffness_full: sp.csr_matrix  # A over all nodes
    advection_full: sp.csr_matrix  # C over all nodes
    gravity_load: np.ndarray  # G over interior nodes
    boundary_lift: np.ndarray  # -sum_{j in Gamma} A_ij u_b,j over interior nodes
    s_full: sp.csr_matrix  # A + C over all nodes

    @property
    def gravity_load_tilde(self) -> np.ndarray:
        return self.gravity_load + self.boundary_lift


def quadrature_average(values) -> float | np.ndarray:
    """Vertex-quadrature mean over the last axis."""
    return np.mean(np.asarray(values, dtype=float), axis=-1)


def _check_state(mesh: Mesh, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError(f"state has shape {u.shape}, expected ({mesh.n_vertices},)")
    return u


def _local_triplets(mesh: Mesh, local: np.ndarray):
    e = mesh.elements
    nloc = e.shape[1]
    rows = np.repeat(e, nloc, axis=1)
    cols = np.tile(e, (1, nloc))
    return rows, cols, local.reshape(len(e), nloc * nloc)


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """m_i = integral of phi_i = sum of |T|/(dim+1) over elements touching i."""
    share = np.repeat(mesh.volumes / (mesh.dim + 1), mesh.dim + 1)
    return np.bincount(mesh.elements.ravel(), weights=share, minlength=mesh.n_vertices)


def assemble_stiffness(mesh: Mesh, model: cm.SoilModel, u_prev) -> sp.csr_matrix:
    """A_ij = int K(u_prev) grad phi_j . grad phi_i with element-mean K."""
    u = _check_state(mesh, u_prev)
    k_nodes = cm.diffusive_K(model, u)
    return stiffness_from_coefficient(mesh, k_nodes)


def stiffness_from_coefficient(mesh: Mesh, k_nodes) -> sp.csr_matrix:
    k_T = quadrature_average(np.asarray(k_nodes, dtype=float)[mesh.elements])
    local = (k_T * mesh.volumes)[:, None, None] * mesh.grad_dots
    rows, cols, vals = _local_triplets(mesh, local)
    return assemble(mesh.n_vertices, rows, cols, vals)


def nodal_beta(model: cm.SoilModel, u) -> np.ndarray:
    """beta at nodes with negative states clamped to zero."""
    return cm.beta(model, np.maximum(np.asarray(u, dtype=float), 0.0))


def assemble_advection(mesh: Mesh, model: cm.SoilModel, u_prev) -> sp.csr_matrix:
    """C_ij = int beta phi_j e_z . grad phi_i with nodal quadrature.

    Nodal quadrature of ``beta phi_j`` only sees vertex j, so the local entry
    is ``|T|/(dim+1) * beta_j * dz(phi_i)``.
    """
    u = _check_state(mesh, u_prev)
    return advection_from_coefficient(mesh, nodal_beta(model, u))


def advection_from_coefficient(mesh: Mesh, beta_nodes) -> sp.csr_matrix:
    b = np.asarray(beta_nodes, dtype=float)[mesh.elements]  # (ne, nloc) indexed by j
    dz = mesh.gradients[:, :, -1]  # (ne, nloc) indexed by i
    w = (mesh.volumes / (mesh.dim + 1))[:, None, None]
    local = w * dz[:, :, None] * b[:, None, :]
    rows, cols, vals = _local_triplets(mesh, local)
    return assemble(mesh.n_vertices, rows, cols, vals)


def vertical_flux_integral(mesh: Mesh, coef_nodes) -> np.ndarray:
    """int c e_z . grad phi_i over all nodes, c interpolated from nodal values."""
    c_T = quadrature_average(np.asarray(coef_nodes, dtype=float)[mesh.elements])
    contrib = (c_T * mesh.volumes)[:, None] * mesh.gradients[:, :, -1]
    return np.bincount(mesh.elements.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices)


def advective_rowsum_integral(mesh: Mesh, model: cm.SoilModel, u_prev) -> np.ndarray:
    """Direct assembly of int beta e_z . grad phi_i (all nodes)."""
    u = _check_state(mesh, u_prev)
    return vertical_flux_integral(mesh, nodal_beta(model, u))


def boundary_lift(mesh: Mesh, matrix: sp.csr_matrix, dirichlet_values) -> np.ndarray:
    """-sum_{j in Gamma} M_ij u_b,j for the interior rows."""
    ub = np.zeros(mesh.n_vertices)
    ub[mesh.boundary_nodes] = np.asarray(dirichlet_values, dtype=float)[mesh.boundary_nodes]
    return -(matrix @ ub)[mesh.interior_nodes]


def gravity_load(mesh: Mesh, model: cm.SoilModel, u_prev, dirichlet_values, stiffness=None):
    """Explicit gravity load G and the boundary-lifted load G~ (interior nodes).

    G_i = -int Kbar(u_prev) e_z . grad phi_i and G~ = G - sum_{j in Gamma} A_ij u_b,j.
    """
    u = _check_state(mesh, u_prev)
    if dirichlet_values is None:
        raise ValueError("Dirichlet values are required")
    dv = np.asarray(dirichlet_values, dtype=float)
    if dv.shape != (mesh.n_vertices,) or not np.all(np.isfinite(dv[mesh.boundary_nodes])):
        raise ValueError("Dirichlet values must be given (finite) on every boundary node")
    if stiffness is None:
        stiffness = assemble_stiffness(mesh, model, u)
    G = -vertical_flux_integral(mesh, cm.advective_Kbar(model, u))[mesh.interior_nodes]
    return G, G + boundary_lift(mesh, stiffness, dv)


def assemble_operators(mesh: Mesh, model: cm.SoilModel, u_prev, dirichlet_values) -> AssembledOperators:
    u = _check_state(mesh, u_prev)
    A = assemble_stiffness(mesh, model, u)
    C = assemble_advection(mesh, model, u)
    G, _ = gravity_load(mesh, model, u, dirichlet_values, stiffness=A)
    return AssembledOperators(
        lumped_mass=lumped_mass(mesh),
        stiffness_full=A,
        advection_full=C,
        gravity_load=G,
        boundary_lift=boundary_lift(mesh, A, dirichlet_values),
        s_full=(A + C).tocsr(),
    )
