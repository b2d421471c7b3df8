import os

import numpy as np
import pytest

from richards_dmp.mesh import Mesh, check_weakly_acute

SEED = int(os.environ.get("RICHARDS_SEED", "20240917"))


def rng_for(tag: str) -> np.random.Generator:
    """Independent, reproducible stream per test (seeded by RICHARDS_SEED)."""
    return np.random.default_rng([SEED, sum(map(ord, tag)), len(tag)])


def triangular_lattice_mesh(nx: int, ny: int, spacing: float = 1.0, jitter: float = 0.0, rng=None) -> Mesh:
    """Staggered equilateral lattice with optional random vertex jitter.

    Rows alternate a half-spacing offset so every triangle is (close to)
    equilateral, hence strictly acute. Boundary = outer rows and row ends.
    """
    h = spacing * np.sqrt(3.0) / 2.0
    pts, bnd = [], []
    for j in range(ny + 1):
        for i in range(nx + 1):
            pts.append((spacing * (i + 0.5 * (j % 2)), h * j))
            if j in (0, ny) or i in (0, nx):
                bnd.append(j * (nx + 1) + i)
    pts = np.array(pts)
    if jitter and rng is not None:
        pts = pts + rng.uniform(-jitter, jitter, pts.shape) * spacing
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    tris = []
    for j in range(ny):
        for i in range(nx):
            if j % 2 == 0:
                tris.append((vid(i, j), vid(i + 1, j), vid(i, j + 1)))
                tris.append((vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
            else:
                tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
                tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    return Mesh(pts, np.array(tris), bnd)


def random_acute_mesh(rng, max_nodes: int = 200) -> Mesh:
    """Random strictly acute 2D mesh (rejection on the weakly-acute check)."""
    while True:
        nx = int(rng.integers(3, 11))
        ny = int(rng.integers(3, 11))
        if (nx + 1) * (ny + 1) > max_nodes:
            continue
        mesh = triangular_lattice_mesh(nx, ny, spacing=float(rng.uniform(0.5, 3.0)), jitter=0.08, rng=rng)
        if check_weakly_acute(mesh).passed:
            return mesh


def random_interval_mesh(rng, n_points: int) -> Mesh:
    """1D mesh with random spacing (every 1D mesh is weakly acute)."""
    gaps = rng.uniform(0.5, 1.5, n_points - 1)
    z = np.concatenate([[0.0], np.cumsum(gaps)])
    els = np.column_stack([np.arange(n_points - 1), np.arange(1, n_points)])
    return Mesh(z, els, [0, n_points - 1])


@pytest.fixture
def rng(request):
    return rng_for(request.node.name)


# -- acceptance summary ---------------------------------------------------------


def pytest_terminal_summary(terminalreporter):
    """One CRITERION line per acceptance test that ran."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance.py::test_criterion_" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            k = int(props.get("criterion", rep.nodeid.rsplit("_", 1)[-1]))
            lines.append((k, f"CRITERION {k}: {'PASS' if rep.passed else 'FAIL'} {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)
