"""Scenario files: INI-style sections describing one simulation.

A scenario fixes the geometry, the soil, the time stepping, the initial
saturation and the boundary data. All saturation values are effective
saturations theta in [0, 1]; they are mapped to the auxiliary variable
through the inverse saturation map when the scenario is built.

Example::

    [geometry]
    kind = rect          ; rect | interval
    L = 50               ; width [m]
    H = 200              ; height [m]
    nx = 20
    nz = 40

    [soil]
    model = vgm
    Ks = 5.0             ; [m/day]
    alpha = 0.05         ; [1/m]

    [scheme]
    scheme = explicit
    tau = 5.0            ; [day]
    T = 50.0             ; [day]

    [initial]
    default = 0.2
    regions =
        [0, 60) 1.0

    [boundary]
    bottom = 1.0
    top = 0.2
    left = neumann
    right = neumann

See the README for the full list of keys.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import constitutive as cm
from .mesh import INTERVAL_SIDES, RECT_SIDES, Mesh, build_interval_mesh, build_rect_mesh
from .schemes import Scheme, SchemeConfig, State

_INTERVAL_ALIASES = {"bottom": "left", "top": "right"}

_REGION_RE = re.compile(
    r"^\s*([\[(])\s*([^,\s]+)\s*,\s*([^\])\s]+)\s*([\])])\s*[:=]?\s*(\S+)\s*$"
)


class ConfigError(ValueError):
    """Invalid scenario file; ``lineno`` points at the offending line when known."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.message = message
        self.lineno = lineno
        self.source = source
        where = source or "<config>"
        if lineno is not None:
            where = f"{where}:{lineno}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Region:
    """Half-open or closed interval in z carrying a constant saturation."""

    lo: float
    hi: float
    value: float
    lo_closed: bool = True
    hi_closed: bool = False

    def contains(self, z: np.ndarray) -> np.ndarray:
        above = z >= self.lo if self.lo_closed else z > self.lo
        below = z <= self.hi if self.hi_closed else z < self.hi
        return above & below


@dataclass(frozen=True)
class InitialSpec:
    default: float | None = None
    regions: tuple[Region, ...] = ()
    linear: tuple[float, float] | None = None  # theta at z = 0 and z = H

    def evaluate(self, z: np.ndarray, height: float) -> np.ndarray:
        """theta_0 at the given heights; NaN where nothing applies."""
        z = np.asarray(z, dtype=float)
        if self.linear is not None:
            lo, hi = self.linear
            theta = lo + (hi - lo) * z / height
        elif self.default is not None:
            theta = np.full_like(z, self.default)
        else:
            theta = np.full_like(z, math.nan)
        for region in self.regions:  # later regions win
            theta = np.where(region.contains(z), region.value, theta)
        return theta


@dataclass(frozen=True)
class OutputSpec:
    csv: str = "diagnostics.csv"
    profile: str | None = "profile.csv"
    profile_x: float | None = None  # default: mid-width
    vtk_every: int = 0
    vtk_prefix: str = "field"


@dataclass
class ScenarioConfig:
    name: str
    geometry: dict
    soil: cm.SoilModel
    scheme: SchemeConfig
    initial: InitialSpec
    boundary: dict  # side -> float | "neumann" | "initial"
    admissible: tuple[float, float] = (0.0, 1.0)
    output: OutputSpec = field(default_factory=OutputSpec)
    sweep_meshes: tuple[int, ...] = ()
    description: str = ""

    @property
    def is_interval(self) -> bool:
        return self.geometry["kind"] == "interval"

    @property
    def height(self) -> float:
        return float(self.geometry["H"])

    def with_overrides(self, tau: float | None = None, scheme: str | None = None) -> "ScenarioConfig":
        sc = self.scheme
        if tau is not None or scheme is not None:
            sc = replace(
                sc,
                tau=sc.tau if tau is None else float(tau),
                scheme=sc.scheme if scheme is None else Scheme(scheme),
            )
        return replace(self, scheme=sc)

    def with_resolution(self, n_points: int) -> "ScenarioConfig":
        """Same scenario on an interval mesh with ``n_points`` nodes."""
        if not self.is_interval:
            raise ConfigError("mesh sweeps are only defined for interval geometries")
        geom = dict(self.geometry, N=int(n_points))
        return replace(self, geometry=geom)


@dataclass
class Scenario:
    """A built scenario: mesh plus nodal initial and boundary data."""

    config: ScenarioConfig
    mesh: Mesh
    theta0: np.ndarray  # all nodes, boundary entries hold the Dirichlet data
    dirichlet_theta: np.ndarray  # all nodes, NaN off the Dirichlet boundary

    @property
    def model(self) -> cm.SoilModel:
        return self.config.soil

    def initial_state(self) -> State:
        return State(0.0, cm.inverse_saturation(self.model, self.theta0))

    def dirichlet_values(self) -> np.ndarray:
        """Dirichlet data in the auxiliary variable (zero off the boundary)."""
        dv = np.zeros(self.mesh.n_vertices)
        B = self.mesh.boundary_nodes
        dv[B] = cm.inverse_saturation(self.model, self.dirichlet_theta[B])
        return dv


# -- parsing ----------------------------------------------------------------


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number of the key."""
    index: dict[tuple[str, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]") and raw[0] == "[":
            section = line[1:-1].strip().lower()
            index[(section, "")] = no
            continue
        if section is not None and raw[:1] not in (" ", "\t"):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            index.setdefault((section, key), no)
    return index


class _Reader:
    def __init__(self, text: str, source: str | None):
        self.source = source
        self.lines = _line_index(text)
        self.text_lines = text.splitlines()
        self.cp = configparser.ConfigParser(
            inline_comment_prefixes=(";", "#"), interpolation=None, strict=True
        )
        try:
            self.cp.read_string(text, source=source or "<config>")
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("key outside of any [section]", exc.lineno, source) from exc
        except configparser.ParsingError as exc:
            if not exc.errors:
                raise ConfigError(str(exc), None, source) from exc
            lineno, line = exc.errors[0][0], exc.errors[0][1]
            raise ConfigError(f"malformed line {line.strip()!r}", lineno, source) from exc
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key '{exc.option}' in [{exc.section}]", exc.lineno, source) from exc
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, source) from exc
        self.used: set[tuple[str, str]] = set()

    def error(self, section: str, key: str, message: str) -> ConfigError:
        key = key.lower()
        return ConfigError(message, self.lines.get((section, key), self.lines.get((section, ""))), self.source)

    def has(self, section: str, key: str) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section: str, key: str, default=None, required: bool = False):
        if not self.cp.has_section(section):
            if required:
                raise ConfigError(f"missing section [{section}]", None, self.source)
            return default
        if not self.cp.has_option(section, key):
            if required:
                raise self.error(section, "", f"missing key '{key}' in [{section}]")
            return default
        self.used.add((section, key))
        return self.cp.get(section, key).strip()

    def number(self, section, key, default=None, required=False, positive=False) -> float | None:
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            value = float(text)
        except ValueError:
            raise self.error(section, key, f"'{key}' must be a number, got {text!r}") from None
        if not math.isfinite(value):
            raise self.error(section, key, f"'{key}' must be finite")
        if positive and not value > 0:
            raise self.error(section, key, f"'{key}' must be positive")
        return value

    def integer(self, section, key, default=None, required=False, minimum=None) -> int | None:
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            value = int(text)
        except ValueError:
            raise self.error(section, key, f"'{key}' must be an integer, got {text!r}") from None
        if minimum is not None and value < minimum:
            raise self.error(section, key, f"'{key}' must be >= {minimum}")
        return value

    def boolean(self, section, key, default=False) -> bool:
        text = self.raw(section, key)
        if text is None:
            return default
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise self.error(section, key, f"'{key}' must be true or false, got {text!r}")

    def check_unused(self):
        for section in self.cp.sections():
            for key in self.cp.options(section):
                if (section, key) not in self.used:
                    raise self.error(section, key, f"unknown key '{key}' in [{section}]")


def _parse_bound(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    return float(t)


def _parse_regions(rd: _Reader, text: str) -> tuple[Region, ...]:
    regions = []
    base = rd.lines.get(("initial", "regions"))
    if base is not None:
        # configparser drops an empty first value line ("regions =")
        head = re.split(r"[=:]", rd.text_lines[base - 1], maxsplit=1)[-1]
        if not re.split(r"\s[;#]|^[;#]", head.strip())[0].strip():
            base += 1
    for offset, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        lineno = None if base is None else base + offset
        m = _REGION_RE.match(line)
        if not m:
            raise ConfigError(f"bad region {line.strip()!r}; expected e.g. '[0, 60) 1.0'", lineno, rd.source)
        try:
            lo, hi, value = _parse_bound(m.group(2)), _parse_bound(m.group(3)), float(m.group(5))
        except ValueError:
            raise ConfigError(f"bad number in region {line.strip()!r}", lineno, rd.source) from None
        if not lo <= hi:
            raise ConfigError("region lower bound exceeds upper bound", lineno, rd.source)
        regions.append(Region(lo, hi, value, m.group(1) == "[", m.group(4) == "]"))
    return tuple(regions)


_SOIL_KEYS = {"kind": "model", "Ks": "ks", "alpha": "alpha", "n": "n", "theta_s": "theta_s",
              "theta_r": "theta_r", "B": "b", "lam": "lambda", "A": "a", "beta_hk": "beta",
              "gamma": "gamma", "core": "core"}


def _parse_soil(rd: _Reader) -> cm.SoilModel:
    s = "soil"
    kw = dict(
        kind=rd.raw(s, "model", "vgm"),
        Ks=rd.number(s, "ks", required=True),
        alpha=rd.number(s, "alpha", required=True),
        n=rd.number(s, "n", 2.0),
        theta_s=rd.number(s, "theta_s", 0.45),
        theta_r=rd.number(s, "theta_r", 0.05),
        B=rd.number(s, "b"),
        lam=rd.number(s, "lambda", 2.0),
        A=rd.number(s, "a"),
        beta_hk=rd.number(s, "beta"),
        gamma=rd.number(s, "gamma"),
        core=rd.raw(s, "core", "identity"),
    )
    try:
        return cm.SoilModel(**kw)
    except (cm.InvalidSoilParameters, ValueError) as exc:
        msg = str(exc)
        key = next((k for f, k in _SOIL_KEYS.items() if re.match(rf"{f}\b", msg)), "")
        raise rd.error(s, key, msg) from None


def _parse_scheme(rd: _Reader) -> SchemeConfig:
    s = "scheme"
    kind = rd.raw(s, "scheme", "implicit")
    try:
        return SchemeConfig(
            scheme=Scheme(kind),
            tau=rd.number(s, "tau", required=True, positive=True),
            t_final=rd.number(s, "t", required=True, positive=True),
            newton_tol=rd.number(s, "newton_tol", 1e-6, positive=True),
            newton_max_iter=rd.integer(s, "newton_max_iter", 100, minimum=1),
            adaptive=rd.boolean(s, "adaptive", False),
            adaptive_safety=rd.number(s, "adaptive_safety", 0.9),
        )
    except ValueError as exc:
        raise rd.error(s, "scheme" if "Scheme" in str(exc) else "", str(exc)) from None


def _parse_geometry(rd: _Reader) -> dict:
    g = "geometry"
    kind = rd.raw(g, "kind", required=True)
    if kind == "rect":
        return dict(
            kind="rect",
            L=rd.number(g, "l", required=True, positive=True),
            H=rd.number(g, "h", required=True, positive=True),
            nx=rd.integer(g, "nx", required=True, minimum=1),
            nz=rd.integer(g, "nz", required=True, minimum=1),
        )
    if kind == "interval":
        return dict(
            kind="interval",
            H=rd.number(g, "h", required=True, positive=True),
            N=rd.integer(g, "n", required=True, minimum=2),
        )
    raise rd.error(g, "kind", f"geometry kind must be 'rect' or 'interval', got {kind!r}")


def _parse_boundary(rd: _Reader, interval: bool) -> tuple[dict, tuple[float, float]]:
    b = "boundary"
    if not rd.cp.has_section(b):
        raise ConfigError("missing section [boundary]", None, rd.source)
    admissible = (0.0, 1.0)
    text = rd.raw(b, "admissible")
    if text is not None:
        parts = text.split()
        try:
            admissible = (float(parts[0]), float(parts[1]))
        except (ValueError, IndexError):
            raise rd.error(b, "admissible", "'admissible' takes two numbers: lo hi") from None
        if len(parts) != 2 or not admissible[0] <= admissible[1]:
            raise rd.error(b, "admissible", "'admissible' takes two numbers lo <= hi")
    sides = INTERVAL_SIDES if interval else RECT_SIDES
    spec: dict = {}
    for key in rd.cp.options(b):
        if key == "admissible":
            continue
        side = _INTERVAL_ALIASES.get(key, key) if interval else key
        if side not in sides:
            raise rd.error(b, key, f"unknown side '{key}' (expected one of {', '.join(sides)})")
        if side in spec:
            raise rd.error(b, key, f"side '{side}' given twice")
        value = rd.raw(b, key).lower()
        if value in ("neumann", "initial"):
            spec[side] = value
            continue
        try:
            theta = float(value)
        except ValueError:
            raise rd.error(b, key, f"side '{key}' must be a number, 'neumann' or 'initial'") from None
        if not admissible[0] <= theta <= admissible[1]:
            raise rd.error(b, key, f"Dirichlet value {theta:g} outside admissible range {admissible}")
        spec[side] = theta
    for side in sides:
        spec.setdefault(side, "neumann")
    if all(v == "neumann" for v in spec.values()):
        raise rd.error(b, "", "at least one side must carry Dirichlet data")
    return spec, admissible


def parse_scenario(text: str, name: str = "scenario", source: str | None = None) -> ScenarioConfig:
    """Parse scenario text; raises :class:`ConfigError` with a line number."""
    rd = _Reader(text, source)
    geometry = _parse_geometry(rd)
    interval = geometry["kind"] == "interval"
    soil = _parse_soil(rd)
    scheme = _parse_scheme(rd)

    i = "initial"
    if not rd.cp.has_section(i):
        raise ConfigError("missing section [initial]", None, source)
    default = rd.number(i, "default")
    linear = None
    lin_text = rd.raw(i, "linear")
    if lin_text is not None:
        try:
            a, c = (float(v) for v in lin_text.split())
        except ValueError:
            raise rd.error(i, "linear", "'linear' takes two numbers: theta at z=0 and at z=H") from None
        linear = (a, c)
        if default is not None:
            raise rd.error(i, "linear", "give either 'default' or 'linear', not both")
    regions_text = rd.raw(i, "regions")
    regions = _parse_regions(rd, regions_text) if regions_text else ()
    initial = InitialSpec(default, regions, linear)

    boundary, admissible = _parse_boundary(rd, interval)

    o = "output"
    profile = rd.raw(o, "profile", "profile.csv")
    output = OutputSpec(
        csv=rd.raw(o, "csv", "diagnostics.csv"),
        profile=None if profile.lower() in ("none", "false", "off") else profile,
        profile_x=rd.number(o, "profile_x"),
        vtk_every=rd.integer(o, "vtk_every", 0, minimum=0),
        vtk_prefix=rd.raw(o, "vtk_prefix", "field"),
    )

    meshes: tuple[int, ...] = ()
    mtext = rd.raw("sweep", "meshes")
    if mtext is not None:
        try:
            meshes = tuple(int(v) for v in re.split(r"[,\s]+", mtext.strip()) if v)
        except ValueError:
            raise rd.error("sweep", "meshes", "'meshes' is a list of integers") from None
        if not meshes or min(meshes) < 2:
            raise rd.error("sweep", "meshes", "'meshes' needs node counts >= 2")
    description = rd.raw("scenario", "description", "")
    name = rd.raw("scenario", "name", name)
    rd.check_unused()

    cfg = ScenarioConfig(
        name=name,
        geometry=geometry,
        soil=soil,
        scheme=scheme,
        initial=initial,
        boundary=boundary,
        admissible=admissible,
        output=output,
        sweep_meshes=meshes,
        description=description,
    )
    return cfg


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", None, str(path)) from None
    return parse_scenario(text, name=path.stem, source=str(path))


# -- building -----------------------------------------------------------------


def build_mesh(cfg: ScenarioConfig) -> Mesh:
    g = cfg.geometry
    dirichlet = {side for side, v in cfg.boundary.items() if v != "neumann"}
    if cfg.is_interval:
        mesh = build_interval_mesh(g["H"], g["N"])
        keep = [i for i, side in mesh.boundary_markers.items() if side in dirichlet]
        return Mesh(
            mesh.vertices,
            mesh.elements,
            np.array(sorted(keep), dtype=int),
            {i: mesh.boundary_markers[i] for i in keep},
            mesh.side_nodes,
        )
    return build_rect_mesh(g["L"], g["H"], g["nx"], g["nz"], dirichlet)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    """Mesh the domain and evaluate nodal initial and Dirichlet saturations."""
    mesh = build_mesh(cfg)
    z = mesh.vertices[:, -1]
    theta0 = cfg.initial.evaluate(z, cfg.height)
    if np.any(np.isnan(theta0)):
        bad = z[np.isnan(theta0)]
        raise ConfigError(
            f"initial regions do not cover the domain (e.g. z = {bad[0]:g}); add 'default'", None, None
        )
    dirichlet = np.full(mesh.n_vertices, math.nan)
    sides = INTERVAL_SIDES if cfg.is_interval else RECT_SIDES
    for side in sides:  # earlier sides take the corners
        value = cfg.boundary[side]
        if value == "neumann":
            continue
        nodes = np.asarray(mesh.side_nodes[side], dtype=int)
        nodes = nodes[np.isnan(dirichlet[nodes])]
        dirichlet[nodes] = theta0[nodes] if value == "initial" else value
    B = mesh.boundary_nodes
    lo, hi = cfg.admissible
    if np.any(np.isnan(dirichlet[B])):
        raise ConfigError("a boundary node has no Dirichlet value", None, None)
    if np.any((dirichlet[B] < lo) | (dirichlet[B] > hi)):
        raise ConfigError(f"Dirichlet data leave the admissible range [{lo:g}, {hi:g}]", None, None)
    theta0 = theta0.copy()
    theta0[B] = dirichlet[B]
    return Scenario(cfg, mesh, theta0, dirichlet)
