"""Flat key/value scenario configuration files.

Grammar: one `section.key = value` per line; `#` starts a comment; blank
lines ignored.  Values are numbers or arithmetic expressions over pi, e,
sqrt, sin, cos, tan, atan, acos, asin and acot (so `2*acot(2)` is exact to
double precision), comma-separated lists of such expressions, inclusive
grids written `start:stop:step`, or bare words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

_EVAL_ENV = {
    "pi": math.pi,
    "e": math.e,
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "atan": math.atan,
    "asin": math.asin,
    "acos": math.acos,
    "acot": lambda x: math.atan2(1.0, x),
}


@dataclass(frozen=True)
class _Entry:
    value: str
    line: int


class ScenarioConfig:
    """Parsed configuration with typed, validating accessors."""

    def __init__(self, entries: dict[str, _Entry]):
        self._entries = entries

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        entries: dict[str, _Entry] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError("empty key", line=lineno)
            if key in entries:
                raise ConfigError(f"duplicate key {key!r}", line=lineno)
            entries[key] = _Entry(value=value, line=lineno)
        return cls(entries)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        return cls.from_text(text)

    def has(self, key: str) -> bool:
        return key in self._entries

    def _entry(self, key: str) -> _Entry:
        if key not in self._entries:
            raise ConfigError(f"missing required key {key!r}")
        return self._entries[key]

    def _eval_number(self, expr: str, line: int) -> float:
        try:
            value = eval(compile(expr, "<config>", "eval"), {"__builtins__": {}}, _EVAL_ENV)
        except Exception as exc:
            raise ConfigError(f"cannot evaluate {expr!r}: {exc}", line=line)
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{expr!r} is not a number", line=line)
        return float(value)

    def get_str(self, key: str, default: str | None = None) -> str | None:
        if key not in self._entries:
            return default
        return self._entries[key].value

    def get_float(self, key: str, default: float | None = None) -> float | None:
        if key not in self._entries:
            return default
        entry = self._entries[key]
        return self._eval_number(entry.value, entry.line)

    def require_float(self, key: str) -> float:
        entry = self._entry(key)
        return self._eval_number(entry.value, entry.line)

    def get_int(self, key: str, default: int | None = None) -> int | None:
        if key not in self._entries:
            return default
        entry = self._entries[key]
        value = self._eval_number(entry.value, entry.line)
        if value != int(value):
            raise ConfigError(f"{key} must be an integer, got {entry.value!r}", line=entry.line)
        return int(value)

    def get_floats(self, key: str, default=None) -> list[float] | None:
        """Comma-separated list of numeric expressions."""
        if key not in self._entries:
            return default
        entry = self._entries[key]
        parts = [p.strip() for p in entry.value.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"{key} is an empty list", line=entry.line)
        return [self._eval_number(p, entry.line) for p in parts]

    def get_grid(self, key: str) -> list[float] | None:
        """Inclusive grid 'start:stop:step'; values rounded to 12 decimals."""
        if key not in self._entries:
            return None
        entry = self._entries[key]
        parts = entry.value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key} must look like start:stop:step", line=entry.line)
        start, stop, step = (self._eval_number(p, entry.line) for p in parts)
        if step <= 0:
            raise ConfigError(f"{key} step must be > 0", line=entry.line)
        if stop < start:
            raise ConfigError(f"{key} has stop < start", line=entry.line)
        count = int(math.floor((stop - start) / step + 1e-9))
        values = [round(start + k * step, 12) for k in range(count + 1)]
        return [v for v in values if v <= stop + 1e-12]

    def lambda_values(self) -> list[float]:
        """Coupling values from model.lambda_grid, model.lambda_list or
        model.lambda; ascending and non-empty."""
        values = self.get_grid("model.lambda_grid")
        if values is None:
            values = self.get_floats("model.lambda_list")
        if values is None:
            single = self.get_float("model.lambda")
            values = None if single is None else [single]
        if not values:
            raise ConfigError("no coupling values: set model.lambda_grid, "
                              "model.lambda_list or model.lambda")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("coupling values must be strictly ascending")
        if values[0] < 0:
            raise ConfigError("couplings must be >= 0")
        return values
