"""High-order barrier constraints robustified by a disturbance estimate.

A barrier ``h`` of input relative degree ``m`` induces the recursion

    phi_0 = h,    phi_i = phi_{i-1}_dot + beta_i(phi_{i-1}),

whose final member yields an affine-in-u safety condition.  With a
disturbance estimate ``dhat`` whose error is bounded by ``delta``, the
runtime condition enforced by the filter is

    Lf^m h + Lg Lf^{m-1} h . u + O(h) + grad . dhat - ||grad|| delta
        + beta_m(phi_{m-1}) >= 0,

where ``grad`` is the state gradient of ``Lf^{m-1} h``.  Satisfying it for
the estimate guarantees the same inequality for every true disturbance
within ``delta`` of the estimate (worst case via Cauchy-Schwarz).

Lie derivatives are supplied as closed-form callbacks by each plant; a
finite-difference cross-check lives in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import BoxSet


@dataclass(frozen=True)
class ClassKappa:
    """Strictly increasing gain function with beta(0) = 0.

    ``linear`` is beta(s) = k s; ``cubic`` is beta(s) = k s^3.
    """

    kind: str
    gain: float

    def __post_init__(self):
        if self.kind not in ("linear", "cubic"):
            raise ValueError(f"unsupported class-K kind: {self.kind!r}")
        if self.gain <= 0:
            raise ValueError("class-K gain must be positive")

    def __call__(self, s: float) -> float:
        if self.kind == "linear":
            return self.gain * s
        return self.gain * s**3

    def derivative(self, s: float) -> float:
        if self.kind == "linear":
            return self.gain
        return 3.0 * self.gain * s**2


@dataclass(frozen=True)
class AffineConstraint:
    """Half-space constraint on the input: coeff . u >= rhs."""

    coeff: np.ndarray
    rhs: float

    def __post_init__(self):
        coeff = np.atleast_1d(np.asarray(self.coeff, dtype=float))
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "rhs", float(self.rhs))
        if not (np.all(np.isfinite(coeff)) and np.isfinite(self.rhs)):
            raise ValueError("constraint coefficients must be finite")

    def satisfied(self, u: np.ndarray, tol: float = 0.0) -> bool:
        return float(self.coeff @ np.asarray(u, dtype=float)) >= self.rhs - tol


@dataclass(frozen=True)
class ConstraintSpec:
    """Barrier of relative degree ``m`` with hand-derived Lie callbacks.

    lie_f[k-1]    is x -> Lf^k h(x) for k = 1..m
    lie_g_lie_f   is x -> the 1 x m_inputs row Lg Lf^{m-1} h(x)
    grad_row      is x -> the 1 x n state gradient of Lf^{m-1} h(x)
    o_term        is x -> sum_{i=1}^{m-1} Lf^i (beta_{m-i} o phi_{m-i-1})(x),
                  identically zero for m = 1
    betas         one class-K function per order
    phi_fns       closed forms for [phi_0 .. phi_{m-1}]; auto-derived for
                  m <= 2, must be supplied explicitly beyond that
    """

    m: int
    h: Callable[[np.ndarray], float]
    lie_f: tuple
    lie_g_lie_f: Callable[[np.ndarray], np.ndarray]
    grad_row: Callable[[np.ndarray], np.ndarray]
    o_term: Callable[[np.ndarray], float]
    betas: tuple
    phi_fns: tuple | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lie_f", tuple(self.lie_f))
        object.__setattr__(self, "betas", tuple(self.betas))
        if self.m < 1:
            raise ValueError("relative degree must be at least 1")
        if len(self.lie_f) != self.m:
            raise ValueError(f"lie_f must have {self.m} callbacks, got {len(self.lie_f)}")
        if len(self.betas) != self.m:
            raise ValueError(f"betas must have {self.m} entries, got {len(self.betas)}")
        if self.phi_fns is None:
            if self.m == 1:
                phis = (self.h,)
            elif self.m == 2:
                h, lf1, beta1 = self.h, self.lie_f[0], self.betas[0]
                phis = (h, lambda x: lf1(x) + beta1(h(x)))
            else:
                raise ValueError("phi_fns must be provided explicitly for m > 2")
            object.__setattr__(self, "phi_fns", phis)
        else:
            object.__setattr__(self, "phi_fns", tuple(self.phi_fns))
            if len(self.phi_fns) != self.m:
                raise ValueError(f"phi_fns must have {self.m} entries")


def phi_sequence(spec: ConstraintSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate [phi_0(x), ..., phi_{m-1}(x)]."""
    x = np.asarray(x, dtype=float)
    return np.array([fn(x) for fn in spec.phi_fns], dtype=float)


def _terms(spec: ConstraintSpec, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    coeff = np.atleast_1d(np.asarray(spec.lie_g_lie_f(x), dtype=float)).ravel()
    grad = np.atleast_1d(np.asarray(spec.grad_row(x), dtype=float)).ravel()
    lfm = float(spec.lie_f[-1](x))
    o_val = float(spec.o_term(x))
    beta_last = float(spec.betas[-1](spec.phi_fns[-1](x)))
    return coeff, grad, lfm, o_val, beta_last


def assemble_constraint(spec: ConstraintSpec, x: np.ndarray,
                        d_hat: np.ndarray, delta: float) -> AffineConstraint:
    """Affine condition on u enforcing the estimate-robust barrier inequality.

    ``delta`` is the current estimation error bound; increasing it tightens
    the constraint by ``||grad|| * delta`` exactly.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    coeff, grad, lfm, o_val, beta_last = _terms(spec, x)
    d_hat = np.asarray(d_hat, dtype=float)
    rest = lfm + o_val + float(grad @ d_hat) \
        - float(np.linalg.norm(grad)) * delta + beta_last
    return AffineConstraint(coeff=coeff, rhs=-rest)


def check_worst_case(spec: ConstraintSpec, x: np.ndarray, theta: float,
                     delta_max: float, input_box: BoxSet) -> bool:
    """Design-time validity check of the barrier at one state.

    True when some admissible input satisfies the inequality with the
    disturbance term replaced by its worst case
    ``-||grad|| (theta + 2 delta_max)``.  The left side is affine in u, so
    the supremum over the input box is attained at the vertex picked
    coordinate-wise by the sign of the coefficient.
    """
    coeff, grad, lfm, o_val, beta_last = _terms(spec, x)
    sup_u = float(np.sum(np.maximum(coeff * input_box.lower,
                                    coeff * input_box.upper)))
    worst = float(np.linalg.norm(grad)) * (theta + 2.0 * delta_max)
    return lfm + sup_u - worst + o_val + beta_last >= 0.0


def true_condition_value(spec: ConstraintSpec, x: np.ndarray, u: np.ndarray,
                         d_true: np.ndarray) -> float:
    """Left side of the barrier inequality with the actual disturbance."""
    coeff, grad, lfm, o_val, beta_last = _terms(spec, x)
    u = np.asarray(u, dtype=float)
    d_true = np.asarray(d_true, dtype=float)
    return lfm + float(coeff @ u) + float(grad @ d_true) + o_val + beta_last


def true_condition_holds(spec: ConstraintSpec, x: np.ndarray, u: np.ndarray,
                         d_true: np.ndarray, tol: float = 0.0) -> bool:
    return true_condition_value(spec, x, u, d_true) >= -tol
