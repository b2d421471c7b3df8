"""Regression against stored outputs; regenerate with
``richards-dmp run <name> --out tests/fixtures/golden`` after intended changes."""
from pathlib import Path

import pytest

from richards_dmp.cli import main
from richards_dmp.runner import builtin_names, builtin_text

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.mark.parametrize("name", builtin_names())
def test_fixture_copy_matches_builtin(name):
    assert (FIXTURES / "scenarios" / f"{name}.ini").read_text() == builtin_text(name)


@pytest.mark.parametrize("name", ["test1", "test3", "test5"])
def test_outputs_match_golden(name, tmp_path):
    assert main(["run", str(FIXTURES / "scenarios" / f"{name}.ini"), "--out", str(tmp_path)]) == 0
    for kind in ("diagnostics", "profile"):
        fname = f"{name}_{kind}.csv"
        assert (tmp_path / fname).read_bytes() == (FIXTURES / "golden" / fname).read_bytes(), fname
