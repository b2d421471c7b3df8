import math

import numpy as np
import pytest
import scipy.sparse as sp

from richards_dmp import assembly as asm
from richards_dmp import constitutive as cm
from richards_dmp.constitutive import SoilModel
from richards_dmp.diagnostics import peclet_check
from richards_dmp.mesh import build_rect_mesh
from richards_dmp.runner import resolve_scenario, run_scenario
from richards_dmp.schemes import (
    NewtonConvergenceError,
    Scheme,
    SchemeConfig,
    State,
    TimeStepCollapse,
    advance,
    iter_simulation,
    newton_solve,
    run_simulation,
)

from conftest import random_acute_mesh

SOIL = SoilModel(Ks=5.0, alpha=0.05)


# -- Newton ------------------------------------------------------------------------


def test_newton_scalar_cubic():
    x, rep = newton_solve(lambda x: x**3 - 8.0, lambda x: np.diag(3 * x**2), np.array([1.0]), 1e-12, 100)
    assert x[0] == pytest.approx(2.0, abs=1e-10) and rep.converged


def test_newton_affine_one_iteration():
    A = sp.csr_matrix([[3.0, -1.0], [-1.0, 3.0]])
    b = np.array([1.0, 2.0])
    x, rep = newton_solve(lambda x: A @ x - b, lambda x: A, np.zeros(2), 1e-10, 100)
    assert rep.iterations == 1
    assert np.allclose(A @ x, b)


def test_newton_already_converged():
    x0 = np.array([2.0])
    _, rep = newton_solve(lambda x: x**3 - 8.0, lambda x: np.diag(3 * x**2), x0, 1e-6, 100)
    assert rep.iterations == 0 and rep.converged


def test_newton_reports_nonconvergence():
    with pytest.raises(NewtonConvergenceError) as err:
        newton_solve(lambda x: x**3 - 8.0, lambda x: np.diag(3 * x**2), np.array([10.0]), 1e-12, 2)
    rep = err.value.report
    assert rep.iterations == 2 and not rep.converged and rep.final_residual > 1e-12
    assert len(rep.history) == 3


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(tau=0.0, t_final=1.0)
    with pytest.raises(ValueError):
        SchemeConfig(tau=1.0, t_final=-1.0)
    with pytest.raises(ValueError):
        SchemeConfig(scheme="crank")
    with pytest.raises(ValueError):
        SchemeConfig(adaptive_safety=1.0)


# -- single steps ---------------------------------------------------------------------


def _column(nx=4, nz=8):
    mesh = build_rect_mesh(50, 200, nx, nz, {"bottom", "top"})
    z = mesh.vertices[:, 1]
    u = np.where(z < 60, 1.0, 0.2)
    return mesh, u, u.copy()


def test_stationary_state_without_gravity(monkeypatch):
    monkeypatch.setattr(cm, "advective_Kbar", lambda model, u: np.zeros_like(np.asarray(u, float)))
    mesh, _, _ = _column()
    u = np.full(mesh.n_vertices, 0.4)
    for scheme in Scheme:
        new, _ = advance(mesh, SOIL, State(0.0, u), 3.0, u, scheme)
        assert np.array_equal(new.u, u)


def test_schemes_coincide_without_advection(monkeypatch):
    monkeypatch.setattr(cm, "advective_Kbar", lambda model, u: np.zeros_like(np.asarray(u, float)))
    mesh, u, dv = _column()
    a, _ = advance(mesh, SOIL, State(0.0, u), 2.0, dv, Scheme.EXPLICIT_GRAVITY, newton_tol=1e-12)
    b, _ = advance(mesh, SOIL, State(0.0, u), 2.0, dv, Scheme.LINEARLY_IMPLICIT, newton_tol=1e-12)
    assert np.allclose(a.u, b.u, rtol=0, atol=1e-10)


def test_implicit_step_is_the_linear_system():
    """Identity core: (D + tau S) U = D U_prev + tau b with D = diag(m_I)."""
    mesh, u, dv = _column()
    tau = 5.0
    new, rep = advance(mesh, SOIL, State(0.0, u), tau, dv, Scheme.LINEARLY_IMPLICIT, newton_tol=1e-10)
    ops = asm.assemble_operators(mesh, SOIL, u, dv)
    I = mesh.interior_nodes
    D = sp.diags(ops.lumped_mass[I])
    S = ops.s_full[I][:, I]
    lift = asm.boundary_lift(mesh, ops.s_full, dv)
    lhs = (D + tau * S) @ new.u[I]
    rhs = D @ u[I] + tau * lift
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())
    assert rep.iterations == 1


def test_boundary_values_are_kept():
    mesh, u, dv = _column()
    new, _ = advance(mesh, SOIL, State(0.0, u), 1.0, dv, Scheme.EXPLICIT_GRAVITY)
    B = mesh.boundary_nodes
    assert np.array_equal(new.u[B], dv[B])


# -- loop -----------------------------------------------------------------------------


def test_fixed_stepping_times():
    mesh, u, dv = _column()
    recs = run_simulation(mesh, SOIL, SchemeConfig(scheme="implicit", tau=0.5, t_final=1.0), State(0.0, u), dv)
    assert [r.diagnostics.t for r in recs] == [0.5, 1.0]
    recs = run_simulation(mesh, SOIL, SchemeConfig(scheme="implicit", tau=0.4, t_final=1.0), State(0.0, u), dv)
    assert [r.diagnostics.t for r in recs] == pytest.approx([0.4, 0.8, 1.0])
    assert recs[-1].diagnostics.tau == pytest.approx(0.2)


def test_inconsistent_boundary_data_rejected():
    mesh, u, dv = _column()
    dv = dv.copy()
    dv[mesh.boundary_nodes[0]] += 0.1
    with pytest.raises(ValueError):
        run_simulation(mesh, SOIL, SchemeConfig(tau=1.0, t_final=1.0), State(0.0, u), dv)


def test_adaptive_explicit_respects_critical_step():
    mesh, u, dv = _column()
    cfg = SchemeConfig(scheme="explicit", tau=5.0, t_final=2.0, adaptive=True)
    recs = run_simulation(mesh, SOIL, cfg, State(0.0, u), dv)
    assert recs[-1].diagnostics.t == pytest.approx(2.0)
    for r in recs:
        assert r.diagnostics.explicit_condition_met
        # positivity only; undershoot below the initial minimum is allowed
        assert r.diagnostics.theta_min > 0


def test_adaptive_explicit_stalls_at_degenerate_limit():
    scn_cfg = resolve_scenario("test1")
    from richards_dmp.config import build_scenario

    scn = build_scenario(scn_cfg)
    cfg = SchemeConfig(scheme="explicit", tau=1.0, t_final=5.0, adaptive=True)
    with pytest.raises(TimeStepCollapse):
        list(iter_simulation(scn.mesh, scn.model, cfg, scn.initial_state(), scn.dirichlet_values()))


# -- positivity and maximum principle ------------------------------------------------------------


def _lattice_state(rng, mesh, soil):
    z = mesh.vertices[:, 1]
    zn = (z - z.min()) / (z.max() - z.min())
    return np.clip(0.9 - 0.6 * zn + rng.uniform(-0.02, 0.02, mesh.n_vertices), 0.0, 1.0)


def test_implicit_positivity_and_upper_bound(rng):
    """Weakly acute mesh + local Peclet condition => U >= 0; row sums >= 0 => theta <= M."""
    checked = 0
    for _ in range(10):
        mesh = random_acute_mesh(rng)
        soil = SoilModel(Ks=float(rng.uniform(0.5, 5)), alpha=float(rng.uniform(0.01, 0.15)))
        u = _lattice_state(rng, mesh, soil)
        if not peclet_check(mesh, soil, u).condition_ok:
            continue
        dv = u.copy()
        tau = float(rng.uniform(0.1, 10))
        new, _ = advance(mesh, soil, State(0.0, u), tau, dv, Scheme.LINEARLY_IMPLICIT)
        assert new.u.min() >= -1e-12
        ops = asm.assemble_operators(mesh, soil, u, dv)
        rs = np.asarray(ops.s_full.sum(axis=1)).ravel()[mesh.interior_nodes]
        if rs.min() >= -1e-12:
            I, B = mesh.interior_nodes, mesh.boundary_nodes
            M = max(u[I].max(), dv[B].max())
            assert new.u[I].max() <= M + 1e-10
        checked += 1
    assert checked >= 5


def test_explicit_positivity_below_critical_step(rng):
    for _ in range(5):
        mesh = random_acute_mesh(rng)
        soil = SoilModel(Ks=float(rng.uniform(0.5, 5)), alpha=float(rng.uniform(0.01, 0.5)))
        u = rng.uniform(0.05, 1.0, mesh.n_vertices)
        cfg = SchemeConfig(scheme="explicit", tau=1.0, t_final=1e9, adaptive=True, adaptive_safety=0.5)
        for k, rec in enumerate(iter_simulation(mesh, soil, cfg, State(0.0, u), u.copy())):
            assert rec.state.u[mesh.interior_nodes].min() > 0
            if k == 9:
                break


# -- scenario-level examples --------------------------------------------------------------------


def test_condition_violated_yet_positive_when_starting_dry():
    res = run_scenario(resolve_scenario("test1"))
    d = res.diagnostics
    assert len(d) == 5
    assert not any(x.explicit_condition_met for x in d)
    assert all(x.tau_crit == 0.0 for x in d)
    assert all(x.mu_min < 0 for x in d)
    assert min(x.theta_min for x in d) == pytest.approx(0.0, abs=1e-12)
    assert max(x.theta_max for x in d) <= 1.0 + 1e-12


def test_stable_explicit_step_keeps_bounds():
    d = run_scenario(resolve_scenario("test2-explicit-verify")).diagnostics
    assert all(0.2 - 1e-6 <= x.theta_min and x.theta_max <= 1 + 1e-10 for x in d)


def test_large_explicit_step_goes_negative_at_first_step():
    cfg = resolve_scenario("test2-explicit")
    cfg.scheme.t_final = 5.0
    d = run_scenario(cfg).diagnostics
    assert len(d) == 1 and d[0].theta_min < 0 and not d[0].explicit_condition_met


def test_implicit_keeps_bounds_on_same_front():
    d = run_scenario(resolve_scenario("test2-implicit")).diagnostics
    assert all(abs(x.theta_min - 0.2) <= 1e-6 and x.theta_max <= 1 + 1e-10 for x in d)


def test_both_conditions_regime_bounds():
    d = run_scenario(resolve_scenario("test3")).diagnostics
    assert all(0.2 - 1e-8 <= x.theta_min and x.theta_max <= 0.8 + 1e-8 for x in d)


def test_advection_dominated_column_violates_both_bounds():
    d = run_scenario(resolve_scenario("test5")).diagnostics
    assert max(x.theta_max for x in d) > 1
    assert min(x.theta_min for x in d) < 0


def test_solver_failure_propagates():
    mesh, u, dv = _column()
    cfg = SchemeConfig(scheme="explicit", tau=5.0, t_final=5.0, newton_max_iter=1, newton_tol=1e-300)
    vgm = SoilModel(Ks=5.0, alpha=0.05, core="vgm")
    u = cm.inverse_saturation(vgm, u)
    with pytest.raises(NewtonConvergenceError):
        run_simulation(mesh, vgm, cfg, State(0.0, u), u.copy())
    assert math.isfinite(cfg.tau)
