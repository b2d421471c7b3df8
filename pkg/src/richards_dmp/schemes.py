"""Semi-implicit time steppers and the simulation loop.

Both schemes solve, for every interior node i,

    m_i (theta(U_i^n) - theta(U_i^{n-1})) / tau + (S U^n)_i = b_i

with a matrix S frozen at the previous state, so Newton only has to update
the diagonal ``m_i theta'(U_i) / tau``:

* explicit gravity: ``S = A_II``, ``b = G~`` (gravity load plus Dirichlet lift);
* linearly implicit advection: ``S = (A + C)_II``,
  ``b = -sum_{j in Gamma} (A + C)_ij u_b,j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator

import numpy as np
import scipy.sparse as sp

from . import constitutive as cm
from .assembly import AssembledOperators, assemble_operators, boundary_lift
from .diagnostics import StepDiagnostics, pre_step_diagnostics, saturation_bounds
from .mesh import Mesh
from .sparse import solve


class Scheme(str, Enum):
    EXPLICIT_GRAVITY = "explicit"
    LINEARLY_IMPLICIT = "implicit"


class NewtonConvergenceError(RuntimeError):
    def __init__(self, message: str, report: "NewtonReport"):
        super().__init__(message)
        self.report = report


class TimeStepCollapse(RuntimeError):
    """Adaptive step fell below 1e-12 * tau (degenerate-limit stall)."""


@dataclass
class State:
    time: float
    u: np.ndarray


@dataclass
class SchemeConfig:
    scheme: Scheme = Scheme.LINEARLY_IMPLICIT
    tau: float = 1.0
    t_final: float = 1.0
    newton_tol: float = 1e-6
    newton_max_iter: int = 100
    adaptive: bool = False
    adaptive_safety: float = 0.9

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not 0 < self.adaptive_safety < 1:
            raise ValueError("adaptive_safety must lie in (0, 1)")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")


@dataclass
class NewtonReport:
    iterations: int
    final_residual: float
    converged: bool
    history: list[float] = field(default_factory=list)


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], object],
    x0,
    tol: float = 1e-6,
    max_iter: int = 100,
):
    """Newton iteration stopped on the infinity norm of the residual.

    ``jacobian`` may return a dense array or a scipy sparse matrix.
    Raises :class:`NewtonConvergenceError` after ``max_iter`` updates.
    """
    x = np.array(x0, dtype=float, copy=True)
    r = residual(x)
    norm = float(np.abs(r).max()) if r.size else 0.0
    history = [norm]
    it = 0
    while norm > tol:
        if it >= max_iter:
            report = NewtonReport(it, norm, False, history)
            raise NewtonConvergenceError(
                f"Newton did not converge in {max_iter} iterations (residual {norm:.3e})", report
            )
        J = jacobian(x)
        if sp.issparse(J):
            dx = solve(J, -r)
        else:
            dx = np.linalg.solve(np.atleast_2d(J), -np.atleast_1d(r)).reshape(x.shape)
        x = x + dx
        it += 1
        r = residual(x)
        norm = float(np.abs(r).max())
        history.append(norm)
        if not math.isfinite(norm):
            report = NewtonReport(it, norm, False, history)
            raise NewtonConvergenceError("Newton iterate became non-finite", report)
    return x, NewtonReport(it, norm, True, history)


def _reduced_system(mesh: Mesh, ops: AssembledOperators, scheme: Scheme, dirichlet_values):
    I = mesh.interior_nodes
    if scheme is Scheme.EXPLICIT_GRAVITY:
        S = ops.stiffness_full[I][:, I].tocsr()
        b = ops.gravity_load_tilde
    else:
        S = ops.s_full[I][:, I].tocsr()
        b = boundary_lift(mesh, ops.s_full, dirichlet_values)
    return S, b


def advance(
    mesh: Mesh,
    model: cm.SoilModel,
    prev: State,
    tau: float,
    dirichlet_values,
    scheme: Scheme,
    ops: AssembledOperators | None = None,
    newton_tol: float = 1e-6,
    newton_max_iter: int = 100,
):
    """One step of either scheme; returns (State, NewtonReport)."""
    scheme = Scheme(scheme)
    u_prev = np.asarray(prev.u, dtype=float)
    dv = np.asarray(dirichlet_values, dtype=float)
    if ops is None:
        ops = assemble_operators(mesh, model, u_prev, dv)
    I = mesh.interior_nodes
    S, b = _reduced_system(mesh, ops, scheme, dv)
    w = ops.lumped_mass[I] / tau
    theta_old = cm.effective_saturation(model, u_prev[I])

    def residual(x):
        return w * (cm.effective_saturation(model, x) - theta_old) + S @ x - b

    def jacobian(x):
        return (sp.diags(w * cm.theta_prime(model, x)) + S).tocsc()

    x, report = newton_solve(residual, jacobian, u_prev[I], newton_tol, newton_max_iter)
    u_new = u_prev.copy()
    u_new[mesh.boundary_nodes] = dv[mesh.boundary_nodes]
    u_new[I] = x
    return State(prev.time + tau, u_new), report


def step_explicit_gravity(mesh, model, prev: State, tau: float, dirichlet_values, **kw):
    return advance(mesh, model, prev, tau, dirichlet_values, Scheme.EXPLICIT_GRAVITY, **kw)


def step_linearly_implicit(mesh, model, prev: State, tau: float, dirichlet_values, **kw):
    return advance(mesh, model, prev, tau, dirichlet_values, Scheme.LINEARLY_IMPLICIT, **kw)


@dataclass
class StepRecord:
    state: State
    diagnostics: StepDiagnostics
    newton: NewtonReport


def iter_simulation(
    mesh: Mesh,
    model: cm.SoilModel,
    config: SchemeConfig,
    initial: State,
    dirichlet_values,
) -> Iterator[StepRecord]:
    """Advance from ``initial`` to ``config.t_final``, yielding each step.

    Diagnostics are evaluated on the lagged state before each step; the
    saturation bounds are filled in after the step converges.
    """
    dv = np.asarray(dirichlet_values, dtype=float)
    u0 = np.asarray(initial.u, dtype=float).copy()
    if u0.shape != (mesh.n_vertices,) or not np.all(np.isfinite(u0)):
        raise ValueError("initial state must be finite with one value per node")
    B = mesh.boundary_nodes
    if not np.allclose(u0[B], dv[B], rtol=0, atol=1e-12):
        raise ValueError("initial boundary values must equal the Dirichlet data")
    state = State(initial.time, u0)
    T = config.t_final
    n = 0
    while state.time < T * (1 - 1e-12):
        ops = assemble_operators(mesh, model, state.u, dv)
        if config.adaptive and config.scheme is Scheme.EXPLICIT_GRAVITY:
            probe = pre_step_diagnostics(mesh, model, ops, state.u, dv, config.tau, state.time)
            tau = min(config.tau, config.adaptive_safety * probe.tau_crit)
            if not tau > 1e-12 * max(1.0, abs(state.time)):  # no longer advances the clock
                raise TimeStepCollapse(
                    f"adaptive step collapsed at t={state.time:g} (tau_crit={probe.tau_crit:g})"
                )
            t_next = min(state.time + tau, T)
        else:
            t_next = min(initial.time + (n + 1) * config.tau, T)
        if T - t_next < 1e-12 * T:
            t_next = T
        tau = t_next - state.time
        diag = pre_step_diagnostics(mesh, model, ops, state.u, dv, tau, t_next)
        new, report = advance(
            mesh, model, state, tau, dv, config.scheme, ops, config.newton_tol, config.newton_max_iter
        )
        new = State(t_next, new.u)
        tmin, tmax, _ = saturation_bounds(model, mesh, new.u)
        diag = replace(
            diag,
            theta_min=tmin,
            theta_max=tmax,
            newton_iterations=report.iterations,
            newton_residual=report.final_residual,
        )
        yield StepRecord(new, diag, report)
        state = new
        n += 1


def run_simulation(mesh, model, config: SchemeConfig, initial: State, dirichlet_values) -> list[StepRecord]:
    return list(iter_simulation(mesh, model, config, initial, dirichlet_values))
