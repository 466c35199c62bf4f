"""Flat ``key = value`` experiment configuration with a typed schema."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from typing import Optional

from .errors import UsageError

EXPERIMENTS = (
    "basis",
    "decay-fit",
    "theta",
    "projector-decay",
    "khinchin",
    "randomize",
    "strichartz",
    "tail",
    "solve",
    "lens-check",
    "smoothing",
    "suite",
)


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 1
    k: float = 2.0
    r: int = 3
    sign: int = 1
    sigma: Optional[float] = None
    s: Optional[float] = None
    q: Optional[float] = None
    p: Optional[float] = None
    T: Optional[float] = None
    N: Optional[int] = None
    M: Optional[int] = None
    M_t: Optional[int] = None
    draws: Optional[int] = None
    seed: int = 0
    tol: Optional[float] = None
    max_iter: int = 60
    law: str = "complex-gaussian"
    nu: float = 0.5
    eta: float = 0.0
    n_min: Optional[int] = None
    n_max: Optional[int] = None
    points: Optional[int] = None
    margin: float = 1.2
    gamma_grid: Optional[tuple] = None
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    n_lambda: int = 40
    criteria: Optional[tuple] = None
    input: Optional[str] = None
    output: Optional[str] = None
    out: str = "results"
    cache: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}")

    # -- text form ---------------------------------------------------------

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}

    def to_text(self):
        lines = []
        for key, value in sorted(self.to_dict().items()):
            lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in raw:
                raise UsageError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = value
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw):
        schema = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(schema))
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        if "experiment" not in raw:
            raise UsageError("configuration needs an 'experiment' key")
        values = {}
        for key, value in raw.items():
            values[key] = _parse(key, schema[key].type, value)
        return cls(**values)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def _parse(key, annotation, text):
    kind = str(annotation)
    if not isinstance(text, str):
        return text
    try:
        if "tuple" in kind:
            items = [t.strip() for t in text.split(",") if t.strip()]
            if key == "gamma_grid":
                return tuple(float(t) for t in items)
            return tuple(items)
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError:
        raise UsageError(f"invalid value for {key}: {text!r}") from None
    return text
