"""Unicycle on slippery ground with circular obstacle keep-out barriers.

State (px, py, heading), inputs (v, omega):

    px_dot = cos(heading) (v + d_m)
    py_dot = sin(heading) (v + d_m)
    heading_dot = omega

The slip term d_m(px) is negative (a loss of drive efficiency), which keeps
v = 0 a safe fallback: with the drive off, the vehicle can only creep
backward along its heading, never into an obstacle it is facing.

Each obstacle contributes a degree-one barrier

    h_i(x) = 1/2 (||p - p_obs||^2 - r_obs^2)

whose gradient row is (p - p_obs, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..barriers import ClassKappa, ConstraintSpec
from ..dynamics import BoxSet, DisturbanceFn, SystemModel
from .base import Plant


@dataclass(frozen=True)
class UnicycleParams:
    start: tuple[float, float] = (-2.0, -2.0)
    start_heading: float = math.pi / 4
    goal: tuple[float, float] = (2.0, 2.0)
    # (cx, cy, radius); none may contain the start or the goal
    obstacles: tuple = ((-0.7, -0.8, 0.40), (0.5, 0.4, 0.50), (-0.3, 1.4, 0.30))
    v_max: float = 2.0
    omega_max: float = math.pi
    workspace_half: float = 4.0
    # slip d_m(px) = -amp (1 + mod sin(freq px)); amp(1+mod) must stay < v_max
    slip_amp: float = 0.25
    slip_mod: float = 0.4
    slip_freq: float = 1.0
    barrier_gain: float = 6.0
    beta_kind: str = "linear"
    heading_jitter: float = 0.3
    reward_pos_weight: float = 1.0
    reward_ctrl_weight: float = 0.01

    def __post_init__(self):
        for cx, cy, rad in self.obstacles:
            if rad <= 0:
                raise ValueError("obstacle radius must be positive")
            for px, py, what in ((*self.start, "start"), (*self.goal, "goal")):
                if math.hypot(px - cx, py - cy) <= rad:
                    raise ValueError(f"obstacle at ({cx},{cy}) contains the {what}")
        if self.slip_amp * (1.0 + self.slip_mod) >= self.v_max:
            raise ValueError("slip magnitude must stay below the top drive speed")


def slip_profile(params: UnicycleParams, scale: float = 1.0) -> DisturbanceFn:
    """Ground-slip disturbance with exact analytic constants.

    The lumped vector is d(x) = d_m(px) (cos heading, sin heading, 0).  Its
    Jacobian has orthogonal nonzero columns, so the operator norm is exactly
    max(|d_m'|, |d_m|) pointwise.
    """
    amp = params.slip_amp * scale
    mod, freq = params.slip_mod, params.slip_freq

    def evaluate(x: np.ndarray) -> np.ndarray:
        d_m = -amp * (1.0 + mod * math.sin(freq * x[0]))
        return np.array([math.cos(x[2]) * d_m, math.sin(x[2]) * d_m, 0.0])

    peak = amp * (1.0 + mod)
    lip = max(amp * mod * freq, peak)
    return DisturbanceFn(eval=evaluate, declared_lipschitz=lip,
                         declared_origin_bound=amp, amplitude_bound=peak)


def constant_slip(d_m: float) -> DisturbanceFn:
    """Heading-aligned slip of fixed magnitude (used by equivalence tests)."""

    def evaluate(x: np.ndarray) -> np.ndarray:
        return np.array([math.cos(x[2]) * d_m, math.sin(x[2]) * d_m, 0.0])

    return DisturbanceFn(eval=evaluate, declared_lipschitz=abs(d_m),
                         declared_origin_bound=abs(d_m), amplitude_bound=abs(d_m))


def _drift(x: np.ndarray) -> np.ndarray:
    return np.zeros(3)


def _input_matrix(x: np.ndarray) -> np.ndarray:
    c, s = math.cos(x[2]), math.sin(x[2])
    return np.array([[c, 0.0], [s, 0.0], [0.0, 1.0]])


def obstacle_spec(center, radius: float, beta: ClassKappa,
                  name: str = "") -> ConstraintSpec:
    cx, cy = float(center[0]), float(center[1])

    def h(x):
        return 0.5 * ((x[0] - cx) ** 2 + (x[1] - cy) ** 2 - radius**2)

    def grad(x):
        return np.array([x[0] - cx, x[1] - cy, 0.0])

    def lie_f(x):
        return 0.0    # drift-free plant

    def lie_g(x):
        return np.array([(x[0] - cx) * math.cos(x[2]) + (x[1] - cy) * math.sin(x[2]), 0.0])

    return ConstraintSpec(m=1, h=h, lie_f=(lie_f,), lie_g_lie_f=lie_g,
                          grad_row=grad, o_term=lambda x: 0.0, betas=(beta,),
                          name=name or f"obstacle({cx},{cy},r={radius})")


def unicycle_model(params: UnicycleParams, disturbance_scale: float = 1.0
                   ) -> tuple[SystemModel, list[ConstraintSpec]]:
    w = params.workspace_half
    slip = slip_profile(params, disturbance_scale)
    model = SystemModel(
        n=3, m=2,
        drift=_drift,
        input_matrix=_input_matrix,
        state_box=BoxSet(np.array([-w, -w, -math.pi]), np.array([w, w, math.pi])),
        input_box=BoxSet(np.array([0.0, -params.omega_max]),
                         np.array([params.v_max, params.omega_max])),
        lipschitz_const=slip.declared_lipschitz,
        origin_bound=slip.declared_origin_bound,
    )
    beta = ClassKappa(params.beta_kind, params.barrier_gain)
    specs = [obstacle_spec((cx, cy), rad, beta, name=f"obstacle{i}")
             for i, (cx, cy, rad) in enumerate(params.obstacles)]
    return model, specs


def make_unicycle_plant(params: UnicycleParams | None = None,
                        disturbance_scale: float = 1.0) -> Plant:
    params = params or UnicycleParams()
    model, specs = unicycle_model(params, disturbance_scale)
    disturbance = slip_profile(params, disturbance_scale)
    goal = np.asarray(params.goal, dtype=float)
    w_pos, w_ctrl = params.reward_pos_weight, params.reward_ctrl_weight

    def reward(x, u, t):
        err = (x[0] - goal[0]) ** 2 + (x[1] - goal[1]) ** 2
        return float(np.clip(-w_pos * err - w_ctrl * float(u @ u), -10.0, 0.0))

    def x0(seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        jitter = rng.uniform(-params.heading_jitter, params.heading_jitter)
        return np.array([params.start[0], params.start[1],
                         params.start_heading + jitter])

    return Plant(name="unicycle", model=model, specs=specs,
                 disturbance=disturbance, reward=reward, x0=x0,
                 angle_indices=(2,), equilibrium_input=np.zeros(2))
