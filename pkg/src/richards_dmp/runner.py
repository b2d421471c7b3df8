"""Scenario execution: single runs, mesh sweeps and the builtin catalogue."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import constitutive as cm
from .config import ConfigError, Scenario, ScenarioConfig, build_scenario, load_scenario, parse_scenario
from .diagnostics import StepDiagnostics, format_value, peclet_check
from .io import DiagnosticsWriter, vertical_profile, write_profile_csv, write_vtk
from .mesh import WeaklyAcuteReport, check_weakly_acute
from .schemes import NewtonConvergenceError, State, TimeStepCollapse, iter_simulation
from .sparse import SingularMatrixError

SOLVER_ERRORS = (NewtonConvergenceError, TimeStepCollapse, SingularMatrixError, cm.IllPosedRatio)
ALIASES = {"test2": "test2-explicit"}
SWEEP_COLUMNS = ("N", "h_eff", "pe_max", "theta_min", "theta_max", "max_principle", "status")
MAX_PRINCIPLE_TOL = 1e-10


# -- builtins -----------------------------------------------------------------


def _builtin_dir():
    return resources.files(__package__).joinpath("scenarios")


def builtin_names() -> list[str]:
    return sorted(p.name[:-4] for p in _builtin_dir().iterdir() if p.name.endswith(".ini"))


def builtin_text(name: str) -> str:
    name = ALIASES.get(name, name)
    res = _builtin_dir().joinpath(f"{name}.ini")
    if not res.is_file():
        raise ConfigError(f"unknown builtin scenario {name!r}; try 'list'")
    return res.read_text()


def list_builtins() -> list[tuple[str, str]]:
    """(name, one-line description) for every builtin scenario."""
    out = []
    for name in builtin_names():
        cfg = parse_scenario(builtin_text(name), name=name, source=f"builtin:{name}")
        out.append((name, cfg.description))
    return out


def resolve_scenario(ref: str) -> ScenarioConfig:
    """A path to a scenario file, or the name of a builtin."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    name = ALIASES.get(ref, ref)
    return parse_scenario(builtin_text(name), name=name, source=f"builtin:{name}")


# -- single run ---------------------------------------------------------------


@dataclass
class RunResult:
    scenario: Scenario
    diagnostics: list[StepDiagnostics] = field(default_factory=list)
    final: State | None = None
    error: Exception | None = None
    csv_path: Path | None = None
    profile_path: Path | None = None
    vtk_paths: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None


def _snapshot(scn: Scenario, state: State, out_dir: Path, step: int) -> Path:
    path = out_dir / f"{scn.config.output.vtk_prefix}_{step:04d}.vtk"
    theta = cm.effective_saturation(scn.model, state.u)
    write_vtk(path, scn.mesh, {"theta": theta, "u": state.u}, title=f"{scn.config.name} t={state.time:g}")
    return path


def run_scenario(
    cfg: ScenarioConfig,
    out_dir=None,
    vtk_every: int | None = None,
) -> RunResult:
    """Run one scenario to its final time.

    With ``out_dir`` the diagnostics CSV is streamed row by row, the final
    profile is written and VTK snapshots are taken every ``vtk_every`` steps
    (0 disables them). Solver failures are caught and stored in
    ``RunResult.error``; rows written so far stay on disk.
    """
    scn = build_scenario(cfg)
    result = RunResult(scn)
    state = scn.initial_state()
    dv = scn.dirichlet_values()
    every = cfg.output.vtk_every if vtk_every is None else vtk_every
    out = None if out_dir is None else Path(out_dir)

    steps = iter_simulation(scn.mesh, scn.model, cfg.scheme, state, dv)
    if out is None:
        try:
            for rec in steps:
                result.diagnostics.append(rec.diagnostics)
                state = rec.state
        except SOLVER_ERRORS as exc:
            result.error = exc
        result.final = state
        return result

    out.mkdir(parents=True, exist_ok=True)
    result.csv_path = out / cfg.output.csv
    if every:
        result.vtk_paths.append(_snapshot(scn, state, out, 0))
    with DiagnosticsWriter(result.csv_path) as writer:
        try:
            for k, rec in enumerate(steps, start=1):
                writer.write(rec.diagnostics)
                result.diagnostics.append(rec.diagnostics)
                state = rec.state
                if every and k % every == 0:
                    result.vtk_paths.append(_snapshot(scn, state, out, k))
        except SOLVER_ERRORS as exc:
            result.error = exc
    result.final = state
    if result.ok and cfg.output.profile:
        theta = cm.effective_saturation(scn.model, state.u)
        z, th = vertical_profile(scn.mesh, theta, cfg.output.profile_x)
        result.profile_path = out / cfg.output.profile
        write_profile_csv(result.profile_path, z, th)
    return result


# -- sweep ----------------------------------------------------------------------


@dataclass
class SweepRow:
    N: int
    h_eff: float
    pe_max: float = math.nan
    theta_min: float = math.nan
    theta_max: float = math.nan
    max_principle: bool = False
    status: str = "ok"

    def cells(self) -> list[str]:
        return [
            str(self.N),
            format_value(self.h_eff),
            format_value(self.pe_max),
            format_value(self.theta_min),
            format_value(self.theta_max),
            format_value(self.max_principle),
            self.status,
        ]


def summarize(N: int, h_eff: float, diags: list[StepDiagnostics], error: Exception | None = None) -> SweepRow:
    row = SweepRow(N, h_eff)
    if diags:
        row.pe_max = max(d.peclet_max for d in diags)
        row.theta_min = min(d.theta_min for d in diags)
        row.theta_max = max(d.theta_max for d in diags)
        row.max_principle = bool(
            row.theta_min >= -MAX_PRINCIPLE_TOL and row.theta_max <= 1.0 + MAX_PRINCIPLE_TOL
        )
    if error is not None:
        row.status = f"failed: {type(error).__name__}: {error}".replace("\n", " ")
        row.max_principle = False
    return row


def run_sweep(cfg: ScenarioConfig, meshes=None, out_dir=None) -> list[SweepRow]:
    """Repeat an interval scenario over node counts ``meshes``.

    Each row aggregates over all steps in (0, T]. A failing mesh is marked
    in the ``status`` column and the sweep moves on.
    """
    meshes = tuple(meshes) if meshes else cfg.sweep_meshes
    if not meshes:
        raise ConfigError("no mesh list: give --meshes or a [sweep] meshes entry")
    if not cfg.is_interval:
        raise ConfigError("sweeps need an interval geometry")
    rows = []
    for N in meshes:
        sub = cfg.with_resolution(N)
        h_eff = cfg.height / (N - 1)
        try:
            res = run_scenario(sub)
            rows.append(summarize(N, h_eff, res.diagnostics, res.error))
        except (ConfigError, ValueError) as exc:
            rows.append(summarize(N, h_eff, [], exc))
    if out_dir is not None:
        write_sweep_csv(Path(out_dir) / f"{cfg.name}_sweep.csv", rows)
    return rows


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow(row.cells())


# -- mesh check -------------------------------------------------------------------


@dataclass
class MeshCheck:
    weakly_acute: WeaklyAcuteReport
    peclet_ok: bool
    pe_max: float
    n_vertices: int
    n_elements: int
    n_interior: int


def check_mesh(cfg: ScenarioConfig) -> MeshCheck:
    """Weakly-acute test plus the local Peclet check on the initial state."""
    scn = build_scenario(cfg)
    rep = check_weakly_acute(scn.mesh)
    pe = peclet_check(scn.mesh, scn.model, scn.initial_state().u)
    return MeshCheck(
        rep, pe.condition_ok, pe.pe_max, scn.mesh.n_vertices, scn.mesh.n_elements, len(scn.mesh.interior_nodes)
    )

