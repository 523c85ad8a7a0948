"""Run configuration: ``key=value`` lines with optional ``[section]`` headers.

Lines starting with ``#`` are comments. Keys inside a section are addressed
as ``section.key``. Every error is collected (with its line number) before
anything is reported, so a config can be fixed in one pass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .compact import Ball, Polydisc
from .maps import MapParseError, parse_map, parse_number

__all__ = [
    "ConfigError",
    "RunConfig",
    "COMMANDS",
    "SCHEMAS",
    "parse_config",
    "parse_mu_schedule",
    "parse_domain",
]


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Field:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    doc: str = ""


def _float(s: str) -> float:
    v = float(np.real(parse_number(s)))
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _pos_float(s: str) -> float:
    v = _float(s)
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _int(s: str) -> int:
    v = _float(s)
    if v != int(v):
        raise ValueError("must be an integer")
    return int(v)


def _nonneg_int(s: str) -> int:
    v = _int(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _pos_int(s: str) -> int:
    v = _int(s)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be a boolean")


def _float_list(s: str) -> tuple:
    body = s.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    vals = tuple(_float(x) for x in body.split(",") if x.strip())
    if not vals:
        raise ValueError("must be a nonempty list")
    return vals


def _map_literal(s: str) -> str:
    try:
        parse_map(s)
    except MapParseError as exc:
        raise ValueError(str(exc)) from None
    return s.strip()


def _direction(s: str) -> str:
    t = s.strip().lower()
    if t not in ("forward", "backward"):
        raise ValueError("must be forward or backward")
    return t


def _matrix(s: str):
    A = np.asarray(parse_number(s), dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("must be a square matrix")
    return s.strip()


_MU_FORM = re.compile(r"^1\s*-\s*2\s*\^\s*-\s*j\s*:\s*(\d+)(?:\s*\.\.\s*(\d+))?$")


def parse_mu_schedule(s: str) -> tuple:
    """``1-2^-j:8`` (j = 1..8), ``1-2^-j:3..8`` (j = 3..8) or an explicit list."""
    m = _MU_FORM.match(s.strip())
    if m:
        a, b = (1, int(m.group(1))) if m.group(2) is None else (int(m.group(1)), int(m.group(2)))
        if a < 1 or b < a:
            raise ValueError("j range must satisfy 1 <= first <= last")
        mus = tuple(1.0 - 2.0**-j for j in range(a, b + 1))
    else:
        mus = _float_list(s)
    bad = [m for m in mus if not 0 < m < 1]
    if bad:
        raise ValueError(f"mu must lie in (0,1), got {bad[0]:g}")
    if any(y <= x for x, y in zip(mus, mus[1:])):
        raise ValueError("mu schedule must be strictly increasing")
    return mus


def parse_domain(s: str, k: int = 2):
    """``ball:0,3`` (center 0, radius 3), ``ball:3``, ``polydisc:0,1`` or ``polydisc:0,1,2``."""
    kind, _, rest = s.strip().partition(":")
    kind = kind.strip().lower()
    nums = [_float(x) for x in rest.split(",") if x.strip()]
    if kind == "ball":
        if len(nums) == 1:
            nums = [0.0] + nums
        if len(nums) != 2 or nums[1] <= 0:
            raise ValueError("ball needs center,radius with radius > 0")
        return Ball(np.full(k, nums[0]), nums[1])
    if kind == "polydisc":
        if len(nums) == 1:
            nums = [0.0] + nums
        if len(nums) < 2 or min(nums[1:]) <= 0:
            raise ValueError("polydisc needs center,radii with radii > 0")
        radii = nums[1:] if len(nums) > 2 else [nums[1]] * k
        return Polydisc(np.full(k, nums[0]), radii)
    raise ValueError(f"unknown domain kind {kind!r}")


def _domain(s: str) -> str:
    parse_domain(s)
    return s.strip()


def _mu(s: str) -> tuple:
    return parse_mu_schedule(s)


_COMMON = {
    "map": Field(_map_literal, required=True, doc="map literal"),
    "seed": Field(_nonneg_int, 0),
}

_BIRKHOFF = {
    "U": Field(_domain, "ball:0,1", doc="domain U centered at 0"),
    "mu": Field(_mu, "1-2^-j:8"),
    "epsilons": Field(_float_list, (0.2, 0.1, 0.05)),
    "spacing": Field(_pos_float, 0.1),
    "surface_spacing": Field(_pos_float, None),
    "t_tol": Field(_pos_float, 1e-6),
    "n0_cap": Field(_pos_int, 100_000),
    "cauchy_tol": Field(_pos_float, None),
    "direction": Field(_direction, "forward"),
    "budget": Field(_pos_int, 4_000_000),
}

SCHEMAS: dict[str, dict[str, Field]] = {
    "henon-k": {
        **_COMMON,
        "half_width": Field(_pos_float, 2.0),
        "samples": Field(_pos_int, 1 << 20),
        "nmax": Field(_nonneg_int, 200),
        "escape_radius": Field(_pos_float, 1e3),
        "R": Field(_pos_float, None),
        "slice_count": Field(_pos_int, 256),
        "slice_half_width": Field(_pos_float, 2.5),
    },
    "birkhoff": {**_COMMON, **_BIRKHOFF},
    "classify": {
        **_COMMON,
        "W": Field(_domain, "ball:0,1"),
        "W_surface": Field(_bool, True),
        "W_spacing": Field(_pos_float, 0.5),
        "nmax": Field(_pos_int, 2000),
        "delta": Field(_pos_float, 0.05),
        "stencil_radius": Field(_pos_float, 1e-2),
        "min_gap": Field(_pos_int, 20),
        "rank_tol": Field(_pos_float, 1e-4),
        "max_records": Field(_pos_int, 64),
    },
    "hull-test": {
        **_COMMON,
        "K": Field(_domain, "ball:0,1"),
        "K_spacing": Field(_pos_float, 0.25),
        "K_surface": Field(_bool, False),
        "probe_half_width": Field(_pos_float, 1.5),
        "probe_count": Field(_pos_int, 32),
        "degree": Field(_pos_int, 6),
        "num_random": Field(_pos_int, 64),
        "tau": Field(_pos_float, None),
    },
    "linearize": {
        **_COMMON,
        "A": Field(_matrix, None),
        "radius": Field(_pos_float, 0.1),
        "spacing": Field(_pos_float, 0.05),
        "n": Field(_pos_int, 200),
        "bound": Field(_pos_float, None),
    },
    "decay": {
        **_COMMON,
        "X": Field(str, required=True, doc="CSV cloud path"),
        "K": Field(str, required=True, doc="CSV cloud path"),
        "U": Field(_domain, "ball:0,3"),
        "n": Field(_nonneg_int, 60),
    },
    "core-intersect": {
        **_COMMON,
        "X": Field(str, required=True, doc="CSV cloud path"),
        "n": Field(_pos_int, 20),
    },
    "shared-k": {**_COMMON, **_BIRKHOFF, "map2": Field(_map_literal, required=True)},
}

COMMANDS = tuple(SCHEMAS)

_ALIASES = {"mu_schedule": "mu", "hausdorff_cauchy_tol": "cauchy_tol", "epsilon_B": "epsilons"}


@dataclass(frozen=True)
class RunConfig:
    command: Optional[str]
    values: dict
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def echo(self) -> dict:
        """Config as given (normalized text values), for reports."""
        return {"command": self.command, **{k: self.raw[k] for k in sorted(self.raw)}}


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    errors: list[str] = []
    raw: dict[str, str] = {}
    lines: dict[str, int] = {}
    section = ""
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            continue
        if "=" not in s:
            errors.append(f"line {no}: expected key=value, got {s!r}")
            continue
        key, val = (x.strip() for x in s.split("=", 1))
        key = _ALIASES.get(key, key)
        if section:
            key = f"{section}.{key}"
        if key == "command":
            if command is not None and val != command:
                errors.append(f"line {no}: command {val!r} conflicts with {command!r}")
            command = val
            continue
        if key in raw:
            errors.append(f"line {no}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        raw[key] = val
        lines[key] = no
    if command is not None and command not in SCHEMAS:
        errors.append(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
        raise ConfigError(errors)
    if command is None:
        schema: dict[str, Field] = {}
        for sch in SCHEMAS.values():
            for k, fld in sch.items():
                schema.setdefault(k, fld)
        schema = {k: replace_required(v, k in _COMMON and v.required) for k, v in schema.items()}
    else:
        schema = SCHEMAS[command]
    values: dict[str, Any] = {}
    for key, val in raw.items():
        if key not in schema:
            errors.append(f"line {lines[key]}: unknown key {key!r}")
            continue
        try:
            values[key] = schema[key].parse(val)
        except (ValueError, TypeError, KeyError, SyntaxError, ZeroDivisionError) as exc:
            errors.append(f"line {lines[key]}: {key}: {exc}")
    missing = [k for k, fld in schema.items() if fld.required and k not in raw]
    if missing:
        errors.append("missing required keys: " + ", ".join(missing))
    if errors:
        raise ConfigError(errors)
    for k, fld in schema.items():
        if k not in values:
            values[k] = fld.parse(fld.default) if isinstance(fld.default, str) and fld.parse is not str else fld.default
    return RunConfig(command, values, raw)


def replace_required(fld: Field, required: bool) -> Field:
    return Field(fld.parse, fld.default, required, fld.doc)
