"""Plain-text ``key = value`` experiment configuration.

Every file starts with ``schema = 1``. Blank lines and ``#`` comments are
ignored, lists are comma separated, and keys not in the subcommand's schema
are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Dict, Optional, Tuple

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _finite(text: str) -> float:
    x = float(text)
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


PARSERS = {"float": _finite, "int": int, "bool": _bool, "str": str.strip, "floats": _floats}

_TOL = {"rel_tol": ("float", 1e-10), "abs_tol": ("float", 1e-10)}

SCHEMAS: Dict[str, Dict[str, Tuple[str, object]]] = {
    "simulate": {
        "chart": ("str", "halfplane"),
        "b": ("float", 0.5),
        "amplitude": ("float", 0.3),
        "p0": ("float", 0.0),
        "q0": ("float", 1.0),
        "phi0": ("float", 1.0471975511965976),
        "horizon": ("float", 5.0),
        "sample_spacing": ("float", 0.01),
        **_TOL,
    },
    "mls-scaling": {
        "ells": ("floats", (1.0, 2.0, 3.7)),
        "bs": ("floats", (0.0, 0.3, 0.5, 0.9)),
        "winding": ("int", 1),
        "tolerance": ("float", 1e-6),
    },
    "psl-conjugacy": {
        "n": ("int", 100),
        "seed": ("int", 0),
        "t_max": ("float", 5.0),
        "tolerance": ("float", 1e-11),
    },
    "burns-build": {
        "delta": ("float", 0.05),
        "delta1": ("float", 0.5),
        "delta2": ("float", 1.0),
        "delta3": ("float", 3.0),
        "delta4": ("float", 15.0),
        "epsilon": ("float", 0.01),
        "a": ("float", 0.1),
        "perturbed": ("bool", True),
        "bump_height": ("float", 0.5),
        "s_max": ("float", 30.0),
    },
    "anosov-cert": {
        "system": ("str", "burns"),
        "b": ("float", 0.0),
        "n": ("int", 10_000),
        "T": ("float", 4.0),
        "H": ("float", 3.0),
        "seed": ("int", 0),
        "u0_policy": ("floats", ()),
        "p_range": ("floats", ()),
        "q_range": ("floats", ()),
        "rel_tol": ("float", 1e-8),
        "band_samples": ("int", 256),
        "band_cap": ("float", 3.0),
        "reversal_samples": ("int", 16),
        "delta": ("float", 0.05),
        "delta1": ("float", 0.5),
        "delta2": ("float", 1.0),
        "delta3": ("float", 3.0),
        "delta4": ("float", 15.0),
        "epsilon": ("float", 0.01),
        "a": ("float", 0.1),
    },
    "magnetic-length": {
        "ell": ("float", 2.0),
        "b": ("float", 0.5),
        "count": ("int", 200),
        "amplitude": ("float", 0.05),
        "seed": ("int", 0),
        "n_samples": ("int", 2048),
        "tolerance": ("float", 1e-9),
    },
}


def defaults(command: str) -> dict:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {command!r}")
    return {k: v for k, (_, v) in SCHEMAS[command].items()}


def parse_config(text: str, command: str) -> dict:
    """Parse ``text`` against the schema of ``command``, filling defaults."""
    cfg = defaults(command)
    schema = SCHEMAS[command]
    seen_schema = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "schema":
            if value != str(SCHEMA_VERSION):
                raise ConfigError(f"line {lineno}: unsupported schema version {value!r}")
            seen_schema = True
            continue
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for {command}")
        kind = schema[key][0]
        try:
            cfg[key] = PARSERS[kind](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad {kind} for {key!r}: {exc}") from None
    if not seen_schema:
        raise ConfigError("missing 'schema = 1' line")
    return cfg


def load_config(path: Optional[str], command: str) -> dict:
    if path is None:
        return defaults(command)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, command)


def dump_config(cfg: dict) -> str:
    """Canonical text form; parsing it back gives ``cfg``."""
    lines = [f"schema = {SCHEMA_VERSION}"]
    for key in sorted(cfg):
        val = cfg[key]
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, tuple):
            text = ", ".join(repr(float(v)) for v in val)
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(command: str, cfg: dict) -> str:
    blob = json.dumps({"command": command, "config": cfg}, sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()
