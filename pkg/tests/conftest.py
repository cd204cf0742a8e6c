from dataclasses import replace
from importlib import resources
from pathlib import Path

import pytest

from predscale.harness import scenario as scenario_mod

SCENARIO_DIR = Path(str(resources.files("predscale.scenarios")))


@pytest.fixture
def load_bundled(tmp_path):
    """Load a bundled scenario with its output redirected under tmp_path."""

    def _load(policy: str, out: str | None = None):
        sc = scenario_mod.load(SCENARIO_DIR / f"{policy}.ini")
        return replace(sc, output=tmp_path / (out or policy))

    return _load


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario file plus trace into tmp_path and load it."""

    def _write(rates, body: str = "", policy: str = "static", name: str = "s"):
        trace = tmp_path / f"{name}.txt"
        trace.write_text("".join(f"{r}\n" for r in rates))
        ini = tmp_path / f"{name}.ini"
        ini.write_text(f"[scenario]\npolicy = {policy}\ntrace = {trace.name}\noutput = out_{name}\n{body}")
        return scenario_mod.load(ini)

    return _write


# --- acceptance summary ------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
