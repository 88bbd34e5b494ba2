"""Uncertain control-affine systems and ground-truth simulation.

A plant is ``xdot = f(x) + g(x) u + d(x)`` with known ``f`` and ``g``, the
state and input confined to compact boxes, and an unknown disturbance ``d``
that is Lipschitz on the state box with a known constant and bounded at the
origin.  This module holds the model container, the RK4 stepper used by both
the plant and the observer, and a generator of random disturbance functions
whose Lipschitz/origin constants are certified analytically (so they can be
used as exact test oracles).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatchError, IntegrationBlowupError


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned compact box {x : lower <= x <= upper}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.ndim != 1 or up.shape != lo.shape:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise ValueError("box bounds must be finite (compactness)")
        if np.any(lo > up):
            raise ValueError("box lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def vertices(self) -> np.ndarray:
        """All 2^k corner points, one per row."""
        k = self.dim
        if k > 16:
            raise ValueError("vertex enumeration limited to 16 dimensions")
        corners = np.empty((2**k, k))
        for j in range(k):
            period = 2 ** (k - 1 - j)
            col = np.tile(np.repeat([self.lower[j], self.upper[j]], period), 2**j)
            corners[:, j] = col
        return corners

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.lower, self.upper, size=shape)


@dataclass(frozen=True)
class SystemModel:
    """Control-affine plant with declared disturbance constants.

    ``drift`` and ``input_matrix`` must be deterministic functions of the
    state.  ``lipschitz_const`` and ``origin_bound`` are the constants the
    unknown disturbance is assumed to satisfy on ``state_box``.
    """

    n: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_matrix: Callable[[np.ndarray], np.ndarray]
    state_box: BoxSet
    input_box: BoxSet
    lipschitz_const: float = 0.0
    origin_bound: float = 0.0

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise ValueError("state and input dimensions must be positive")
        if self.state_box.dim != self.n:
            raise DimensionMismatchError("state_box", self.n, self.state_box.dim)
        if self.input_box.dim != self.m:
            raise DimensionMismatchError("input_box", self.m, self.input_box.dim)
        if self.lipschitz_const < 0 or self.origin_bound < 0:
            raise ValueError("disturbance constants must be nonnegative")


@dataclass(frozen=True)
class DisturbanceFn:
    """State-dependent disturbance with certified constants.

    ``declared_lipschitz`` and ``declared_origin_bound`` are analytic upper
    bounds, not empirical fits; property tests audit them by brute force.
    ``amplitude_bound``, when known, bounds ``||eval(x)||`` globally and is
    used to pre-budget how far certification trajectories can travel.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    declared_lipschitz: float
    declared_origin_bound: float
    amplitude_bound: float | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.eval(x)


def zero_disturbance(n: int) -> DisturbanceFn:
    z = np.zeros(n)
    return DisturbanceFn(eval=lambda x: z, declared_lipschitz=0.0,
                         declared_origin_bound=0.0, amplitude_bound=0.0)


def eval_dynamics(model: SystemModel, x: np.ndarray, u: np.ndarray,
                  d: np.ndarray) -> np.ndarray:
    """Right-hand side f(x) + g(x) u + d evaluated once."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if x.shape != (model.n,):
        raise DimensionMismatchError("state", (model.n,), x.shape)
    if u.shape != (model.m,):
        raise DimensionMismatchError("input", (model.m,), u.shape)
    if d.shape != (model.n,):
        raise DimensionMismatchError("disturbance", (model.n,), d.shape)
    return model.drift(x) + model.input_matrix(x) @ u + d


def step_rk4(model: SystemModel, x: np.ndarray, u: np.ndarray,
             d_fn: Callable[[np.ndarray], np.ndarray], dt: float) -> np.ndarray:
    """One classical RK4 step of xdot = f + g u + d_fn(x), u held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)

    def rhs(y, stage):
        dy = model.drift(y) + model.input_matrix(y) @ u + d_fn(y)
        if not np.all(np.isfinite(dy)):
            raise IntegrationBlowupError(stage, dy)
        return dy

    k1 = rhs(x, 1)
    k2 = rhs(x + 0.5 * dt * k1, 2)
    k3 = rhs(x + 0.5 * dt * k2, 3)
    k4 = rhs(x + dt * k3, 4)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowupError(4, out)
    return out


def sample_lipschitz_disturbance(seed: int, l_d: float, b_d: float,
                                 box: BoxSet, terms: int = 3) -> DisturbanceFn:
    """Random smooth disturbance with certified constants.

    Each output coordinate is a short sum of sinusoids, shifted so that the
    value at the origin is an explicit constant:

        d_j(x) = sum_k A_jk (sin(w_jk . x + p_jk) - sin(p_jk)) + c_j

    The per-row budgets are chosen so the analytic bounds satisfy
    ``sum_k |A_jk| ||w_jk|| <= l_d / sqrt(n)`` and ``|c_j| <= b_d / sqrt(n)``
    with strict random margins, which makes the declared Frobenius-style
    Lipschitz bound and the exact origin norm land strictly inside the
    requested constants.  Deterministic in ``seed``.
    """
    if l_d < 0 or b_d < 0:
        raise ValueError("constants must be nonnegative")
    n = box.dim
    rng = np.random.default_rng(seed)

    amps = np.zeros((n, terms))
    freqs = np.zeros((n, terms, n))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n, terms))
    if l_d > 0:
        row_budget = l_d / np.sqrt(n)
        raw = rng.uniform(0.2, 1.0, size=(n, terms))
        dirs = rng.normal(size=(n, terms, n))
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        mags = rng.uniform(0.8, 2.5, size=(n, terms))
        freqs = dirs * mags[:, :, None]
        margins = rng.uniform(0.35, 0.9, size=n)
        for j in range(n):
            weight = np.sum(raw[j] * mags[j])
            amps[j] = raw[j] * (margins[j] * row_budget / weight)

    const = np.zeros(n)
    if b_d > 0:
        row_budget = b_d / np.sqrt(n)
        const = rng.uniform(0.3, 0.9, size=n) * row_budget * rng.choice([-1.0, 1.0], size=n)

    sin_phase = np.sin(phases)
    freq_norms = np.linalg.norm(freqs, axis=2)
    declared_lip = float(np.linalg.norm(np.sum(amps * freq_norms, axis=1)))
    declared_origin = float(np.linalg.norm(const))
    amp_bound = float(np.linalg.norm(2.0 * np.sum(np.abs(amps), axis=1) + np.abs(const)))

    def evaluate(x: np.ndarray) -> np.ndarray:
        proj = freqs @ np.asarray(x, dtype=float) + phases
        return np.sum(amps * (np.sin(proj) - sin_phase), axis=1) + const

    return DisturbanceFn(eval=evaluate, declared_lipschitz=declared_lip,
                         declared_origin_bound=declared_origin,
                         amplitude_bound=amp_bound)


def wrap_angle(value: float) -> float:
    """Map an angle to (-pi, pi]."""
    out = (value + np.pi) % (2.0 * np.pi) - np.pi
    if out == -np.pi:
        out = np.pi
    return out
