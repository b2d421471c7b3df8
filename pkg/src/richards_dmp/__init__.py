"""P1 finite elements for the Richards equation in a bounded auxiliary variable.

Two semi-implicit steppers (explicit gravity, linearly implicit advection)
with per-step algebraic checks for positivity and the discrete maximum
principle.
"""
from .assembly import AssembledOperators, assemble_operators
from .config import ConfigError, Scenario, ScenarioConfig, build_scenario, load_scenario, parse_scenario
from .constitutive import SoilKind, SoilModel, effective_saturation, inverse_saturation
from .diagnostics import CSV_COLUMNS, StepDiagnostics, peclet_check
from .mesh import Mesh, build_interval_mesh, build_rect_mesh, check_weakly_acute
from .runner import list_builtins, resolve_scenario, run_scenario, run_sweep
from .schemes import Scheme, SchemeConfig, State, advance, run_simulation

__all__ = [
    "AssembledOperators",
    "CSV_COLUMNS",
    "ConfigError",
    "Mesh",
    "Scenario",
    "ScenarioConfig",
    "Scheme",
    "SchemeConfig",
    "SoilKind",
    "SoilModel",
    "State",
    "StepDiagnostics",
    "advance",
    "assemble_operators",
    "build_interval_mesh",
    "build_rect_mesh",
    "build_scenario",
    "check_weakly_acute",
    "effective_saturation",
    "inverse_saturation",
    "list_builtins",
    "load_scenario",
    "parse_scenario",
    "peclet_check",
    "resolve_scenario",
    "run_scenario",
    "run_simulation",
    "run_sweep",
]
