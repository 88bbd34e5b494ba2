"""Planar quadrotor tracking a circle inside a circular flight boundary.

State (px, vx, pz, vz, pitch, pitch_rate), inputs are the two rotor thrusts
u1, u2 in [0, u_max]:

    vx_dot    = -sin(pitch) (u1 + u2 + d_u1 + d_u2) / mass + d_x
    vz_dot    =  cos(pitch) (u1 + u2 + d_u1 + d_u2) / mass - gravity + d_z
    pitch_acc = (u2 - u1 - d_u1 + d_u2) arm / inertia_yy

d_u1, d_u2 mimic rotor friction (small position-dependent thrust offsets) and
d_x, d_z are linear aerodynamic drag.  The flight boundary barrier

    h(x) = 1/2 (r_bound^2 - px^2 - pz^2)

has input relative degree two; the thrusts first appear in the second
derivative of h, alongside the lumped disturbance (which also enters through
the velocity rows).  All Lie derivatives below are hand-derived closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..barriers import ClassKappa, ConstraintSpec
from ..dynamics import BoxSet, DisturbanceFn, SystemModel
from .base import Plant


@dataclass(frozen=True)
class QuadrotorParams:
    mass: float = 0.032          # kg
    arm: float = 0.04            # m, effective moment arm
    inertia_yy: float = 2.4e-5   # kg m^2
    gravity: float = 9.81        # m/s^2
    u_max: float = 2.0           # N per rotor
    r_bound: float = 0.85        # m, flight boundary radius
    ref_radius: float = 0.7      # m, tracking circle (inside the boundary)
    ref_rate: float = 0.5        # rad/s along the tracking circle
    drag_x: float = 0.3          # 1/s, d_x = -drag_x * vx
    drag_z: float = 0.3
    rotor_amp: float = 0.002     # N, rotor friction offset amplitude
    rotor_freq: float = 1.0      # 1/m, spatial frequency of the offsets
    rotor_phase: float = 0.7
    beta_gains: tuple[float, float] = (10.0, 10.0)
    beta_kind: str = "linear"
    pos_half: float = 0.9        # state box extents
    vel_half: float = 2.5
    rate_half: float = 25.0
    reward_ctrl_weight: float = 1e-3

    def __post_init__(self):
        if min(self.mass, self.arm, self.inertia_yy) <= 0:
            raise ValueError("mass, arm and inertia must be positive")
        if self.ref_radius >= self.r_bound:
            raise ValueError("reference circle must lie inside the boundary")

    @property
    def hover_thrust(self) -> float:
        return 0.5 * self.mass * self.gravity


def disturbance_profile(params: QuadrotorParams, scale: float = 1.0) -> DisturbanceFn:
    """Lumped rotor-friction plus drag disturbance with analytic constants."""
    amp = params.rotor_amp * scale
    freq, phase = params.rotor_freq, params.rotor_phase
    cx = params.drag_x * scale
    cz = params.drag_z * scale
    mass, lever = params.mass, params.arm / params.inertia_yy

    def evaluate(x: np.ndarray) -> np.ndarray:
        du1 = amp * math.sin(freq * x[0] + phase)
        du2 = amp * math.cos(freq * x[2])
        thrust = (du1 + du2) / mass
        return np.array([
            0.0,
            -math.sin(x[4]) * thrust - cx * x[1],
            0.0,
            math.cos(x[4]) * thrust - cz * x[3],
            0.0,
            (-du1 + du2) * lever,
        ])

    # row-wise gradient bounds -> Frobenius bound on the Jacobian
    b_vx = math.sqrt(2 * (amp * freq / mass) ** 2 + (2 * amp / mass) ** 2 + cx**2)
    b_vz = math.sqrt(2 * (amp * freq / mass) ** 2 + (2 * amp / mass) ** 2 + cz**2)
    b_rot = math.sqrt(2.0) * amp * freq * lever
    lip = math.sqrt(b_vx**2 + b_vz**2 + b_rot**2)

    at0 = evaluate(np.zeros(6))
    origin = float(np.linalg.norm(at0))

    sup_v = math.sqrt(
        (2 * amp / mass + cx * params.vel_half) ** 2
        + (2 * amp / mass + cz * params.vel_half) ** 2
        + (2 * amp * lever) ** 2)
    return DisturbanceFn(eval=evaluate, declared_lipschitz=lip,
                         declared_origin_bound=origin, amplitude_bound=sup_v)


def _make_dynamics(params: QuadrotorParams):
    g0, mass = params.gravity, params.mass
    lever = params.arm / params.inertia_yy

    def drift(x: np.ndarray) -> np.ndarray:
        return np.array([x[1], 0.0, x[3], -g0, x[5], 0.0])

    def input_matrix(x: np.ndarray) -> np.ndarray:
        s, c = math.sin(x[4]) / mass, math.cos(x[4]) / mass
        return np.array([
            [0.0, 0.0],
            [-s, -s],
            [0.0, 0.0],
            [c, c],
            [0.0, 0.0],
            [-lever, lever],
        ])

    return drift, input_matrix


def boundary_spec(params: QuadrotorParams) -> ConstraintSpec:
    r2 = params.r_bound**2
    g0, mass = params.gravity, params.mass
    beta1 = ClassKappa(params.beta_kind, params.beta_gains[0])
    beta2 = ClassKappa(params.beta_kind, params.beta_gains[1])

    def h(x):
        return 0.5 * (r2 - x[0] ** 2 - x[2] ** 2)

    def lf1(x):
        return -(x[0] * x[1] + x[2] * x[3])

    def lf2(x):
        return -(x[1] ** 2 + x[3] ** 2) + g0 * x[2]

    def grad(x):
        return np.array([-x[1], -x[0], -x[3], -x[2], 0.0, 0.0])

    def lg_lf(x):
        coeff = (x[0] * math.sin(x[4]) - x[2] * math.cos(x[4])) / mass
        return np.array([coeff, coeff])

    def o_term(x):
        return beta1.derivative(h(x)) * lf1(x)

    return ConstraintSpec(m=2, h=h, lie_f=(lf1, lf2), lie_g_lie_f=lg_lf,
                          grad_row=grad, o_term=o_term, betas=(beta1, beta2),
                          name="flight-boundary")


def quadrotor_model(params: QuadrotorParams, disturbance_scale: float = 1.0
                    ) -> tuple[SystemModel, ConstraintSpec]:
    drift, input_matrix = _make_dynamics(params)
    dist = disturbance_profile(params, disturbance_scale)
    box_lo = np.array([-params.pos_half, -params.vel_half, -params.pos_half,
                       -params.vel_half, -math.pi, -params.rate_half])
    model = SystemModel(
        n=6, m=2,
        drift=drift,
        input_matrix=input_matrix,
        state_box=BoxSet(box_lo, -box_lo),
        input_box=BoxSet(np.zeros(2), np.full(2, params.u_max)),
        lipschitz_const=dist.declared_lipschitz,
        origin_bound=dist.declared_origin_bound,
    )
    return model, boundary_spec(params)


def circle_reference(params: QuadrotorParams, phase: float = 0.0):
    radius, rate = params.ref_radius, params.ref_rate

    def reference(t: float):
        ang = rate * t + phase
        c, s = math.cos(ang), math.sin(ang)
        pos = np.array([radius * c, radius * s])
        vel = np.array([-radius * rate * s, radius * rate * c])
        acc = np.array([-radius * rate**2 * c, -radius * rate**2 * s])
        return pos, vel, acc

    return reference


def make_quadrotor_plant(params: QuadrotorParams | None = None,
                         disturbance_scale: float = 1.0) -> Plant:
    params = params or QuadrotorParams()
    model, spec = quadrotor_model(params, disturbance_scale)
    disturbance = disturbance_profile(params, disturbance_scale)
    reference = circle_reference(params)
    w_ctrl = params.reward_ctrl_weight

    def reward(x, u, t):
        ref_p, _, _ = reference(t)
        err = (x[0] - ref_p[0]) ** 2 + (x[2] - ref_p[1]) ** 2
        return float(np.clip(-err - w_ctrl * float(u @ u), -10.0, 0.0))

    def x0(seed: int) -> np.ndarray:
        pos, vel, _ = reference(0.0)
        return np.array([pos[0], vel[0], pos[1], vel[1], 0.0, 0.0])

    hover = params.hover_thrust
    plant = Plant(name="quadrotor", model=model, specs=[spec],
                  disturbance=disturbance, reward=reward, x0=x0,
                  angle_indices=(4,),
                  equilibrium_input=np.array([hover, hover]))
    plant.params = params          # handy for policy construction
    plant.reference = reference
    return plant
