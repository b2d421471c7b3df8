"""Per-step algebraic checks for positivity and the discrete maximum principle."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constitutive as cm
from .assembly import AssembledOperators
from .mesh import Mesh

PECLET_TOL = 1e-12

CSV_COLUMNS = (
    "t",
    "tau_crit",
    "mu_min",
    "n_margin_violations",
    "rowsum_min",
    "peclet_max",
    "peclet_ok",
    "theta_min",
    "theta_max",
    "M",
    "condition_met",
)
# appended after the fixed columns: the G (unlifted) variants and solver info
EXTRA_COLUMNS = (
    "tau",
    "tau_crit_G",
    "mu_min_G",
    "n_margin_violations_G",
    "newton_iterations",
    "newton_residual",
)


@dataclass
class StepDiagnostics:
    t: float
    tau: float
    tau_crit: float
    mu_min: float
    n_margin_violations: int
    rowsum_min: float
    peclet_max: float
    peclet_condition_ok: bool
    theta_min: float = math.nan
    theta_max: float = math.nan
    upper_bound_M: float = math.nan
    explicit_condition_met: bool = False
    tau_crit_G: float = math.inf
    mu_min_G: float = math.nan
    n_margin_violations_G: int = 0
    newton_iterations: int = 0
    newton_residual: float = math.nan

    def as_row(self) -> dict:
        return {
            "t": self.t,
            "tau_crit": self.tau_crit,
            "mu_min": self.mu_min,
            "n_margin_violations": self.n_margin_violations,
            "rowsum_min": self.rowsum_min,
            "peclet_max": self.peclet_max,
            "peclet_ok": self.peclet_condition_ok,
            "theta_min": self.theta_min,
            "theta_max": self.theta_max,
            "M": self.upper_bound_M,
            "condition_met": self.explicit_condition_met,
            "tau": self.tau,
            "tau_crit_G": self.tau_crit_G,
            "mu_min_G": self.mu_min_G,
            "n_margin_violations_G": self.n_margin_violations_G,
            "newton_iterations": self.newton_iterations,
            "newton_residual": self.newton_residual,
        }


def format_value(value) -> str:
    """CSV cell text: 17 significant digits, ``inf`` sentinel, true/false."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def critical_timestep(m, theta_prev, g_tilde) -> float:
    """min over nodes with g < 0 of max(0, m_i theta_i / |g_i|); inf if none."""
    m = np.asarray(m, dtype=float)
    th = np.asarray(theta_prev, dtype=float)
    g = np.asarray(g_tilde, dtype=float)
    if not (m.shape == th.shape == g.shape):
        raise ValueError("m, theta and g must have equal lengths")
    adverse = g < 0.0
    if not np.any(adverse):
        return math.inf
    with np.errstate(over="ignore"):  # tiny |g| gives inf, which is the right answer
        quot = m[adverse] * th[adverse] / np.abs(g[adverse])
    return float(np.maximum(quot, 0.0).min())


def nodal_margins(m, theta_prev, g, tau: float):
    """mu_i = m_i theta_i + tau g_i, its minimum and the count of mu_i < 0."""
    mu = np.asarray(m, dtype=float) * np.asarray(theta_prev, dtype=float) + tau * np.asarray(g, dtype=float)
    if mu.size == 0:
        return mu, math.inf, 0
    return mu, float(mu.min()), int(np.count_nonzero(mu < 0.0))


def interior_row_sums(s_full, interior_nodes):
    """Row sums over all columns for the interior rows, and their minimum."""
    sums = np.asarray(s_full.sum(axis=1)).ravel()[np.asarray(interior_nodes)]
    return sums, (float(sums.min()) if sums.size else math.inf)


@dataclass
class PecletReport:
    pe_max: float
    condition_ok: bool
    rho_sup: np.ndarray  # per element, max of nodal rho
    slack: np.ndarray  # per element, min over i of rhs - lhs
    worst_local: np.ndarray  # per element, local vertex attaining the slack


def peclet_check(mesh: Mesh, model: cm.SoilModel, u_prev, tol: float = PECLET_TOL) -> PecletReport:
    """Local Peclet condition on every element and the cell Peclet maximum.

    For every element T and local vertex i the condition reads
    ``sup_T rho * max(dz phi_i, 0) <= min_{j != i} (-grad phi_i . grad phi_j)``
    where sup_T rho is the maximum of the nodal values.
    """
    u = np.maximum(np.asarray(u_prev, dtype=float), 0.0)
    rho_nodes = cm.peclet_ratio(model, u)
    rho_sup = rho_nodes[mesh.elements].max(axis=1)
    dots = mesh.grad_dots.copy()
    nloc = mesh.dim + 1
    diag = np.arange(nloc)
    dots[:, diag, diag] = -np.inf
    rhs = (-dots).min(axis=2)
    dz_plus = np.maximum(mesh.gradients[:, :, -1], 0.0)
    lhs = rho_sup[:, None] * dz_plus
    slack_all = rhs - lhs
    worst = slack_all.argmin(axis=1)
    slack = slack_all[np.arange(mesh.n_elements), worst]
    pe = mesh.diameters * rho_sup
    return PecletReport(
        pe_max=float(pe.max()) if pe.size else 0.0,
        condition_ok=bool(np.all(slack >= -tol)),
        rho_sup=rho_sup,
        slack=slack,
        worst_local=worst,
    )


def saturation_bounds(model: cm.SoilModel, mesh: Mesh, u, u_prev=None, dirichlet_values=None):
    """(theta_min, theta_max) over interior nodes and the dynamic bound M.

    ``M = max(max_I theta(u_prev), max_Gamma theta(u_b))``; it is NaN when
    no previous state is given.
    """
    th = cm.effective_saturation(model, np.asarray(u, dtype=float)[mesh.interior_nodes])
    tmin = float(th.min()) if th.size else math.nan
    tmax = float(th.max()) if th.size else math.nan
    M = math.nan
    if u_prev is not None:
        prev = cm.effective_saturation(model, np.asarray(u_prev, dtype=float)[mesh.interior_nodes])
        cands = [prev.max()] if prev.size else []
        if dirichlet_values is not None and len(mesh.boundary_nodes):
            bc = cm.effective_saturation(model, np.asarray(dirichlet_values, dtype=float)[mesh.boundary_nodes])
            cands.append(bc.max())
        M = float(max(cands)) if cands else math.nan
    return tmin, tmax, M


def pre_step_diagnostics(
    mesh: Mesh,
    model: cm.SoilModel,
    ops: AssembledOperators,
    u_prev,
    dirichlet_values,
    tau: float,
    t: float,
) -> StepDiagnostics:
    """Everything that depends on the lagged state only."""
    interior = mesh.interior_nodes
    m = ops.lumped_mass[interior]
    theta_prev = cm.effective_saturation(model, np.asarray(u_prev)[interior])
    g_t = ops.gravity_load_tilde
    g = ops.gravity_load
    tc = critical_timestep(m, theta_prev, g_t)
    _, mu_min, n_viol = nodal_margins(m, theta_prev, g_t, tau)
    tc_g = critical_timestep(m, theta_prev, g)
    _, mu_min_g, n_viol_g = nodal_margins(m, theta_prev, g, tau)
    _, rs_min = interior_row_sums(ops.s_full, interior)
    pe = peclet_check(mesh, model, u_prev)
    _, _, M = saturation_bounds(model, mesh, u_prev, u_prev, dirichlet_values)
    return StepDiagnostics(
        t=t,
        tau=tau,
        tau_crit=tc,
        mu_min=mu_min,
        n_margin_violations=n_viol,
        rowsum_min=rs_min,
        peclet_max=pe.pe_max,
        peclet_condition_ok=pe.condition_ok,
        upper_bound_M=M,
        explicit_condition_met=mu_min > 0.0,
        tau_crit_G=tc_g,
        mu_min_G=mu_min_g,
        n_margin_violations_G=n_viol_g,
    )


def diagnostics_header() -> list[str]:
    return list(CSV_COLUMNS + EXTRA_COLUMNS)


