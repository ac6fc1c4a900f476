"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

from .domain import Grid
from .model import Consumption, Model, Potential, Sensitivity
from .solver import INITIAL_KINDS, InitialData, StepControl


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _positive(v):
    return v > 0


def _unit_open(v):
    return 0 < v < 1


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


# key -> (parser, validator, description of valid range)
_RULES = {
    "nx": (int, lambda v: v >= 4, ">= 4"),
    "ny": (int, lambda v: v >= 4, ">= 4"),
    "T": (float, lambda v: v >= 0, ">= 0"),
    "dt": (float, _positive, "> 0"),
    "cfl": (float, lambda v: 0 < v <= 0.5, "in (0, 0.5]"),
    "theta": (float, lambda v: 0 <= v <= 1, "in [0, 1]"),
    "poisson_tol": (float, lambda v: 0 < v <= 1e-10, "in (0, 1e-10]"),
    "poisson_max_iter": (int, _positive, "> 0"),
    "a0": (float, lambda v: v >= 0, ">= 0"),
    "beta0": (float, lambda v: math.isfinite(v), "finite"),
    "delta_b": (float, lambda v: 0 < v <= 0.5, "in (0, 0.5]"),
    "consumption": (str, lambda v: v in ("linear", "zero", "saturating"), "linear|zero|saturating"),
    "potential": (str, lambda v: v in ("gravity", "gravity_wavy", "flat"), "gravity|gravity_wavy|flat"),
    "potential_amp": (float, lambda v: math.isfinite(v), "finite"),
    "eps": (float, _unit_open, "in (0, 1)"),
    "initial": (str, lambda v: v in INITIAL_KINDS, "|".join(INITIAL_KINDS)),
    "n_bar": (float, _positive, "> 0"),
    "c_bar": (float, lambda v: v >= 0, ">= 0"),
    "vortex_amp": (float, lambda v: math.isfinite(v), "finite"),
    "seed": (int, lambda v: v >= 0, ">= 0"),
    "mt_count": (int, _positive, "> 0"),
    "mt_grid": (int, lambda v: v >= 4, ">= 4"),
    "mt_kind": (str, lambda v: v in ("mixed", "neumann_trig", "bump", "random_smooth"), "mixed|neumann_trig|bump|random_smooth"),
    "diag_interval": (int, _positive, "> 0"),
    "snapshot_interval": (int, _positive, "> 0"),
    "slack": (float, lambda v: v >= 1.0, ">= 1"),
    "eps_list": (_float_list, lambda v: len(v) >= 1 and all(0 < e < 1 for e in v) and all(a > b for a, b in zip(v, v[1:])), "strictly decreasing values in (0, 1)"),
    "weak_levels": (_int_list, lambda v: len(v) >= 2 and all(x >= 4 for x in v), "at least two grid sizes >= 4"),
    "weak_T": (float, _positive, "> 0"),
    "weak_dt": (float, _positive, "> 0"),
}


@dataclass
class RunConfig:
    nx: int = 64
    ny: int = 64
    T: float = 1.0
    dt: float = 2e-3
    cfl: float = 0.25
    theta: float = 0.5
    poisson_tol: float = 1e-11
    poisson_max_iter: int = 50
    a0: float = 1.0
    beta0: float = 0.5
    delta_b: float = 0.1
    consumption: str = "linear"
    potential: str = "gravity"
    potential_amp: float = 0.1
    eps: float = 0.1
    initial: str = "default"
    n_bar: float = 1.0
    c_bar: float = 0.0
    vortex_amp: float = 0.05
    seed: int = 7
    mt_count: int = 1000
    mt_grid: int = 32
    mt_kind: str = "mixed"
    diag_interval: int = 1
    snapshot_interval: int = 10
    slack: float = 1.0
    eps_list: tuple = (0.2, 0.1, 0.05, 0.025)
    weak_levels: tuple = (16, 32, 64)
    weak_T: float = 0.25
    weak_dt: float = 4e-3

    def grid(self) -> Grid:
        return Grid(self.nx, self.ny)

    def model(self) -> Model:
        return Model(
            Sensitivity(self.a0, self.beta0, self.delta_b),
            Consumption(self.consumption),
            Potential(self.potential, self.potential_amp),
        )

    def step_control(self) -> StepControl:
        return StepControl(self.dt, self.cfl, self.theta, self.poisson_tol, self.poisson_max_iter)

    def initial_data(self) -> InitialData:
        return InitialData(self.initial, self.n_bar, self.c_bar, self.vortex_amp)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def serialize(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                text = ", ".join(repr(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Raises ConfigError listing every problem with its line number.
    """
    errors = []
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in _RULES:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first on line {seen[key]})")
            continue
        seen[key] = lineno
        parse, valid, desc = _RULES[key]
        try:
            v = parse(val)
        except ValueError:
            errors.append(f"line {lineno}: cannot parse {key} = {val!r}")
            continue
        if not valid(v):
            errors.append(f"line {lineno}: {key} = {val} out of range ({desc})")
            continue
        values[key] = v
    if errors:
        raise ConfigError(errors)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
