"""Scenario files.

INI syntax, one section per component. Every key is optional except
``scenario.trace``; unknown sections or keys are rejected. Relative paths are
resolved against the scenario file's directory. ``docs/scenario.md`` lists
every key.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from ..forecast.pipeline import ForecastConfig
from ..orchestrator import OrchestratorConfig
from ..sim import SimConfig

POLICIES = ("static", "lr", "mlp", "rnn")
MODES = ("sim", "live")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class AlarmConfig:
    scale_out_threshold: float = 80.0
    scale_in_threshold: float = 15.0
    periods: int = 3


@dataclass(frozen=True)
class ReportConfig:
    window_start: int = 50  # minutes
    window_end: int = 80


@dataclass(frozen=True)
class LiveConfig:
    per_request_cost: float = 0.002
    threads: int = 2
    sessions: int = 1000
    host: str = "127.0.0.1"
    payload_bytes: int = 16
    drain_timeout: float = 10.0


@dataclass(frozen=True)
class Scenario:
    trace: Path
    output: Path
    mode: str = "sim"
    policy: str = "static"
    seed: int = 0
    model: Path | None = None
    segment_seconds: int = 60
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    alarm: AlarmConfig = field(default_factory=AlarmConfig)
    orchestrator: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    live: LiveConfig = field(default_factory=LiveConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.policy not in POLICIES:
            raise ScenarioError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not Path(self.trace).exists():
            raise ScenarioError(f"trace file {self.trace} does not exist")
        if self.model is not None and not Path(self.model).exists():
            raise ScenarioError(f"model file {self.model} does not exist")
        if self.model is not None and self.policy in ("static", "lr"):
            raise ScenarioError(f"policy {self.policy!r} takes no model file")
        if self.report.window_start >= self.report.window_end:
            raise ScenarioError("report.window_start must be before report.window_end")


# section -> (dataclass, {key: converter}); the [scenario] section is flat
_SECTIONS: dict[str, type] = {
    "forecast": ForecastConfig,
    "alarm": AlarmConfig,
    "orchestrator": OrchestratorConfig,
    "sim": SimConfig,
    "live": LiveConfig,
    "report": ReportConfig,
}

_SCENARIO_KEYS = {
    "mode": str,
    "policy": str,
    "trace": Path,
    "output": Path,
    "seed": int,
    "model": Path,
    "segment_seconds": int,
}

# simulator keys that the scenario derives itself
_DERIVED = {"sim": {"rng_seed", "metric_period"}, "forecast": {"scale"}}


def _convert(tp: Any, raw: str, where: str):
    try:
        if tp in (bool, "bool"):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp in (int, "int"):
            return int(raw)
        if tp in (float, "float"):
            return float(raw)
        if tp in (Path,):
            return Path(raw)
        return str(raw).strip()
    except ValueError:
        raise ScenarioError(f"{where}: cannot parse {raw!r} as {tp}") from None


def _field_types(cls) -> dict[str, str]:
    out = {}
    for f in fields(cls):
        t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        out[f.name] = t.split("|")[0].strip()
    return out


def loads(text: str, base_dir: Path | str = ".") -> Scenario:
    base_dir = Path(base_dir)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep keys case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from None

    unknown = set(parser.sections()) - set(_SECTIONS) - {"scenario"}
    if unknown:
        raise ScenarioError(f"unknown section(s): {sorted(unknown)}")
    if "scenario" not in parser:
        raise ScenarioError("missing [scenario] section")

    top: dict[str, Any] = {}
    for key, raw in parser["scenario"].items():
        if key not in _SCENARIO_KEYS:
            raise ScenarioError(f"[scenario]: unknown key {key!r}")
        top[key] = _convert(_SCENARIO_KEYS[key], raw, f"[scenario] {key}")
    if "trace" not in top:
        raise ScenarioError("[scenario]: 'trace' is required")
    for key in ("trace", "model", "output"):
        if key in top and not top[key].is_absolute():
            top[key] = base_dir / top[key]
    top.setdefault("output", base_dir / "out")
    seed = top.get("seed", 0)

    parts: dict[str, Any] = {}
    for section, cls in _SECTIONS.items():
        kwargs: dict[str, Any] = {}
        if section in parser:
            types = _field_types(cls)
            for key, raw in parser[section].items():
                if key not in types or key in _DERIVED.get(section, ()):
                    raise ScenarioError(f"[{section}]: unknown key {key!r}")
                kwargs[key] = _convert(types[key], raw, f"[{section}] {key}")
        parts[section] = kwargs

    try:
        orch = OrchestratorConfig(**parts["orchestrator"])
        fcfg = ForecastConfig(scale=100.0 * orch.max_size, **parts["forecast"])
        sim = SimConfig(rng_seed=seed, metric_period=fcfg.sample_period, **parts["sim"])
        return Scenario(
            forecast=fcfg,
            alarm=AlarmConfig(**parts["alarm"]),
            orchestrator=orch,
            sim=sim,
            live=LiveConfig(**parts["live"]),
            report=ReportConfig(**parts["report"]),
            **top,
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None


def load(path: str | Path) -> Scenario:
    path = Path(path)
    return loads(path.read_text(), path.parent)
