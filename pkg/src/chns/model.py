"""Parameter functions of the chemotaxis-fluid system and their regularization.

All concrete choices here (sensitivity shape, envelope, consumption, potential)
are artifact defaults; the analysis only fixes their regularity classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, VectorField, grad_neumann

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])
IDENTITY = np.eye(2)


def _mollifier_piece(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(s):
    """C-infinity ramp: 1 on (-inf, 1], 0 on [2, inf), monotone between.

    eta(s) = p(2 - s) / (p(2 - s) + p(s - 1)) with p(t) = exp(-1/t) for t > 0.
    """
    s = np.asarray(s, dtype=float)
    up = _mollifier_piece(2.0 - s)
    down = _mollifier_piece(s - 1.0)
    return up / (up + down)


def boundary_distance(x, y):
    return np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))


def boundary_bump(s):
    """Smooth bump with w(0) = 1, supported in [0, 1)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def _check_nonneg(name, v):
    if np.any(np.asarray(v) < 0):
        raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class CutoffFamily:
    """rho_eps vanishes within distance eps of the wall, chi_eps beyond n = 2/eps."""

    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    def rho(self, x, y):
        return 1.0 - smooth_step(boundary_distance(x, y) / self.eps)

    def chi(self, n):
        return smooth_step(self.eps * np.asarray(n, dtype=float))


@dataclass(frozen=True)
class Sensitivity:
    """S(x, n, c) = a I + b J with J the quarter rotation.

    ``a`` is constant; ``b = beta0 * w(dist(x, wall) / delta_b)`` so the
    rotational part lives in a collar of width ``delta_b``.
    """

    a0: float = 1.0
    beta0: float = 0.5
    delta_b: float = 0.1

    def a(self, x, y, n, c):
        return self.a0 * np.ones(np.broadcast(x, y, n, c).shape)

    def b(self, x, y, n, c):
        shape = np.broadcast(x, y, n, c).shape
        if self.beta0 == 0.0:
            return np.zeros(shape)
        return self.beta0 * boundary_bump(boundary_distance(x, y) / self.delta_b) * np.ones(shape)

    def envelope(self, c):
        """S0(c) = sqrt(2) (|a0| + |beta0|), constant hence nondecreasing."""
        return math.sqrt(2.0) * (abs(self.a0) + abs(self.beta0)) * np.ones(np.shape(c))

    def is_zero(self) -> bool:
        return self.a0 == 0.0 and self.beta0 == 0.0


@dataclass(frozen=True)
class Consumption:
    kind: str = "linear"

    def __post_init__(self):
        if self.kind not in ("linear", "zero", "saturating"):
            raise ValueError(f"unknown consumption {self.kind!r}")

    def __call__(self, c):
        _check_nonneg("c", c)
        c = np.asarray(c, dtype=float)
        if self.kind == "linear":
            return c.copy()
        if self.kind == "zero":
            return np.zeros_like(c)
        return c / (1.0 + c)

    def rate(self, c):
        """f(c) / c, continued by f'(0) at c = 0."""
        c = np.asarray(c, dtype=float)
        if self.kind == "linear":
            return np.ones_like(c)
        if self.kind == "zero":
            return np.zeros_like(c)
        return 1.0 / (1.0 + np.maximum(c, 0.0))


@dataclass(frozen=True)
class Potential:
    """phi(x, y) = -g y + amp sin(pi x); kind 'flat' is phi = 0."""

    kind: str = "gravity"
    amp: float = 0.1

    def __post_init__(self):
        if self.kind not in ("gravity", "gravity_wavy", "flat"):
            raise ValueError(f"unknown potential {self.kind!r}")

    @property
    def _g(self) -> float:
        return 0.0 if self.kind == "flat" else 1.0

    @property
    def _a(self) -> float:
        return self.amp if self.kind == "gravity_wavy" else 0.0

    def value(self, x, y):
        return -self._g * np.asarray(y, dtype=float) + self._a * np.sin(np.pi * np.asarray(x))

    def gradient(self, x, y):
        x = np.asarray(x, dtype=float)
        gx = self._a * np.pi * np.cos(np.pi * x) * np.ones(np.broadcast(x, y).shape)
        gy = -self._g * np.ones(np.broadcast(x, y).shape)
        return gx, gy

    @property
    def grad_sup(self) -> float:
        return math.hypot(self._a * math.pi, self._g)

    @property
    def hessian_sup(self) -> float:
        # only d2/dx2 = -amp pi^2 sin(pi x) is nonzero
        return abs(self._a) * math.pi**2

    def sample(self, grid: Grid) -> np.ndarray:
        return grid.sample(self.value)

    def face_gradient(self, grid: Grid) -> VectorField:
        """Discrete gradient of the sampled potential, zero on wall faces."""
        return grad_neumann(grid, self.sample(grid))


def potential_defaults() -> Potential:
    return Potential("gravity")


@dataclass(frozen=True)
class Model:
    sensitivity: Sensitivity = field(default_factory=Sensitivity)
    consumption: Consumption = field(default_factory=Consumption)
    potential: Potential = field(default_factory=potential_defaults)

    def S0(self, c) -> float:
        return float(np.max(self.sensitivity.envelope(c)))


def eval_S(model: Model, x, n: float, c: float) -> np.ndarray:
    if n < 0 or c < 0:
        raise ValueError("n and c must be nonnegative")
    px, py = x
    s = model.sensitivity
    return float(s.a(px, py, n, c)) * IDENTITY + float(s.b(px, py, n, c)) * ROTATION


def eval_S_eps(model: Model, eps: float, x, n: float, c: float) -> np.ndarray:
    cut = CutoffFamily(eps)
    return float(cut.rho(*x)) * float(cut.chi(n)) * eval_S(model, x, n, c)


def eval_f(model: Model, c: float) -> float:
    if c < 0:
        raise ValueError("c must be nonnegative")
    return float(model.consumption(c))
