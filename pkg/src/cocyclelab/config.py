"""Strict experiment configuration: parsing, validation, canonical hashing.

The format is sections of key = value lines:

    experiment = spectrum
    seed = 42

    [lattice]
    mode = sl2z

    [representation]
    rep = sym:3

    [spectrum]
    total_time = 100000

Unknown sections or keys are rejected; all problems are reported together
with their line numbers.  Hashing uses a canonical rendering (sorted
sections and keys, normalized numbers) so reruns of equivalent configs map
to the same record.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

__all__ = ["ExperimentConfig", "ConfigError", "validate_config", "canonical_text", "config_hash",
           "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = (
    "spectrum", "flags", "furstenberg", "inert", "unique-ergodicity",
    "e1-concentration", "origami", "orbit",
)


class ConfigError(ValueError):
    """Aggregated validation failures, one message per problem."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(problems))


_TOP_KEYS = {
    "experiment": str,
    "seed": int,
    "threads": int,
    "out": str,
}

_SECTION_SCHEMAS: dict[str, dict[str, type]] = {
    "lattice": {"mode": str},
    "representation": {"rep": str},
    "spectrum": {
        "total_time": float, "n_trajectories": int, "dt": float, "flow": str,
        "dump_trajectories": bool,
    },
    "flags": {"horizon": float, "n_points": int, "level": int, "element_param": float},
    "furstenberg": {"horizon": float, "n_trajectories": int},
    "inert": {"level": int, "n_samples": int, "angle_tol": float, "horizon": float,
              "n_points": int, "budget": int},
    "unique-ergodicity": {"horizon": float, "n_starts": int},
    "e1-concentration": {"horizon": float, "n_starts": int, "pull_horizon": float},
    "origami": {"surface": str, "total_time": float, "mode": str, "max_orbit": int,
                "n_trajectories": int},
    "orbit": {"surface": str, "max_size": int},
}

_POSITIVE_FIELDS = {
    "seed", "threads", "total_time", "n_trajectories", "dt", "horizon", "n_points",
    "level", "n_samples", "angle_tol", "n_starts", "pull_horizon", "max_orbit",
    "max_size", "budget", "element_param",
}

_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "threads": 1,
    "out": "",
    "lattice.mode": "sl2z",
    "representation.rep": "standard",
    "spectrum.total_time": 20000.0,
    "spectrum.n_trajectories": 4,
    "spectrum.dt": 1.0,
    "spectrum.flow": "geodesic",
    "spectrum.dump_trajectories": False,
    "flags.horizon": 100.0,
    "flags.n_points": 10,
    "flags.level": 1,
    "flags.element_param": 0.6,
    "furstenberg.horizon": 400.0,
    "furstenberg.n_trajectories": 4,
    "inert.level": 2,
    "inert.n_samples": 200,
    "inert.angle_tol": 1e-2,
    "inert.horizon": 30.0,
    "inert.n_points": 4,
    "inert.budget": 40,
    "unique-ergodicity.horizon": 2000.0,
    "unique-ergodicity.n_starts": 8,
    "e1-concentration.horizon": 30.0,
    "e1-concentration.n_starts": 10,
    "e1-concentration.pull_horizon": 40.0,
    "origami.surface": "3; (1 2); (1 3)",
    "origami.total_time": 20000.0,
    "origami.mode": "flow",
    "origami.max_orbit": 10000,
    "origami.n_trajectories": 4,
    "orbit.surface": "3; (1 2); (1 3)",
    "orbit.max_size": 10000,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    threads: int
    out: str
    values: dict[str, Any] = field(default_factory=dict)

    def get(self, dotted: str) -> Any:
        if dotted in self.values:
            return self.values[dotted]
        return _DEFAULTS[dotted]


def _parse_scalar(raw: str, target: type, where: str, problems: list[str]):
    raw = raw.strip()
    try:
        if target is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if target is int:
            v = int(raw)
            return v
        if target is float:
            return float(raw)
        return raw
    except ValueError:
        problems.append(f"{where}: cannot parse {raw!r} as {target.__name__}")
        return None


def validate_config(text: str) -> ExperimentConfig:
    """Strict parse; raises ConfigError listing every problem found."""
    problems: list[str] = []
    section: str | None = None
    seen: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SECTION_SCHEMAS:
                problems.append(f"line {lineno}: unknown section [{section}]")
                section = None
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected key = value")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if section is None:
            if key not in _TOP_KEYS:
                problems.append(f"line {lineno}: unknown key {key!r}")
                continue
            dotted = key
        else:
            schema = _SECTION_SCHEMAS[section]
            if key not in schema:
                problems.append(f"line {lineno}: unknown key {key!r} in section [{section}]")
                continue
            dotted = f"{section}.{key}"
        if dotted in seen:
            problems.append(f"line {lineno}: duplicate key {dotted!r}")
            continue
        seen[dotted] = (raw, lineno)

    values: dict[str, Any] = {}
    for dotted, (raw, lineno) in seen.items():
        key = dotted.split(".")[-1]
        target = _TOP_KEYS.get(dotted) or _SECTION_SCHEMAS[dotted.split(".")[0]][key]
        parsed = _parse_scalar(raw, target, f"line {lineno} ({dotted})", problems)
        if parsed is None:
            continue
        if key in _POSITIVE_FIELDS and isinstance(parsed, (int, float)) and not isinstance(parsed, bool):
            if parsed < 0 or (parsed == 0 and key not in ("seed",)):
                problems.append(f"line {lineno}: {dotted} must be positive, got {parsed}")
                continue
        values[dotted] = parsed

    experiment = values.pop("experiment", None)
    if experiment is None:
        problems.append("missing experiment kind (top-level `experiment = ...`)")
    elif experiment not in EXPERIMENT_KINDS:
        problems.append(f"unknown experiment kind {experiment!r}; choose from {EXPERIMENT_KINDS}")
    mode = values.get("lattice.mode", _DEFAULTS["lattice.mode"])
    if mode not in ("sl2z", "sanov"):
        problems.append(f"lattice.mode must be sl2z or sanov, got {mode!r}")
    flow = values.get("spectrum.flow", _DEFAULTS["spectrum.flow"])
    if flow not in ("geodesic", "horocycle+", "horocycle-", "word-walk"):
        problems.append(f"spectrum.flow must be a flow kind, got {flow!r}")
    omode = values.get("origami.mode", _DEFAULTS["origami.mode"])
    if omode not in ("flow", "word-walk"):
        problems.append(f"origami.mode must be flow or word-walk, got {omode!r}")
    if problems:
        raise ConfigError(problems)

    seed = values.pop("seed", _DEFAULTS["seed"])
    threads = values.pop("threads", _DEFAULTS["threads"])
    out = values.pop("out", _DEFAULTS["out"])
    return ExperimentConfig(experiment, seed, threads, out, values)


def _render_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def canonical_text(config: ExperimentConfig) -> str:
    """Canonical rendering: sorted sections and keys, normalized numbers."""
    lines = [f"experiment = {config.experiment}", f"seed = {config.seed}",
             f"threads = {config.threads}"]
    if config.out:
        lines.append(f"out = {config.out}")
    by_section: dict[str, dict[str, Any]] = {}
    for dotted, v in config.values.items():
        section, key = dotted.split(".", 1)
        by_section.setdefault(section, {})[key] = v
    for section in sorted(by_section):
        lines.append(f"[{section}]")
        for key in sorted(by_section[section]):
            lines.append(f"{key} = {_render_value(by_section[section][key])}")
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(config).encode()).hexdigest()
