"""Closed-loop episode runner: policy, observer, filter, plant.

Per control period (one observer sampling period T): query the policy, read
the current disturbance estimate and its error bound, assemble one affine
constraint per barrier, project the action through the QP, then integrate the
plant and the predictor over the substeps and refresh the estimate at the
next sample instant.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..barriers import assemble_constraint
from ..dynamics import step_rk4, wrap_angle
from ..errors import EpisodeAbortError
from ..observer import (ErrorBound, ObserverConfig, init_observer, pc_update,
                        predictor_step, shift_state)
from ..policies import Policy
from ..qp import ActiveSetQp, QpProblem
from .base import Plant

FILTER_MODES = ("dob_cbf", "nominal_cbf", "off")


@dataclass
class Transition:
    t: float
    x: np.ndarray
    u_rl: np.ndarray
    u_safe: np.ndarray
    x_next: np.ndarray
    reward: float
    filter_active: bool
    slack_used: bool


@dataclass
class PhaseTimers:
    """Wall-clock accumulators per pipeline phase, in seconds."""

    observer: float = 0.0
    assembly: float = 0.0
    qp: float = 0.0
    plant: float = 0.0
    policy: float = 0.0

    def as_dict(self) -> dict:
        return {"observer": self.observer, "assembly": self.assembly,
                "qp": self.qp, "plant": self.plant, "policy": self.policy}


@dataclass
class EpisodeRecord:
    steps: int
    violation: bool
    min_h: float
    first_violation_t: float | None
    relaxation_count: int
    filter_active_count: int
    total_reward: float
    estimation_errors: np.ndarray | None          # ||dhat - d(x)|| per control step
    estimation_rel_errors: np.ndarray | None      # relative counterpart (nan if ||d||=0)
    transitions: list[Transition] | None

    @property
    def slack_used(self) -> bool:
        return self.relaxation_count > 0


def run_episode(plant: Plant, observer_cfg: ObserverConfig,
                bound: ErrorBound | None, policy: Policy, steps: int,
                dt: float | None = None, seed: int = 0,
                filter_mode: str = "dob_cbf",
                qp_weight: np.ndarray | None = None,
                keep_transitions: bool = False,
                collect_estimation: bool = False,
                timers: PhaseTimers | None = None) -> EpisodeRecord:
    """Run ``steps`` control periods and return the episode log.

    ``steps`` counts QP solves (one per sampling period T); the plant and the
    predictor advance with ``dt`` substeps inside each period.  A failed QP
    aborts the episode with diagnostics.
    """
    if filter_mode not in FILTER_MODES:
        raise ValueError(f"unknown filter mode {filter_mode!r}")
    model = plant.model
    T = observer_cfg.T
    dt = observer_cfg.dt if dt is None else dt
    substeps = int(round(T / dt))
    if abs(substeps * dt - T) > 1e-9 * T or substeps < 1:
        raise ValueError("T must be an integer multiple of dt")
    if filter_mode == "dob_cbf" and bound is None:
        raise ValueError("dob_cbf filtering needs an error bound")

    P = np.eye(model.m) if qp_weight is None else np.asarray(qp_weight, dtype=float)
    solver = ActiveSetQp()
    policy.reset(seed)
    x = np.asarray(plant.x0(seed), dtype=float).copy()
    obs = init_observer(observer_cfg, x)
    obs = pc_update(obs, x)

    clock = time.perf_counter
    min_h = plant.min_barrier(x)
    first_violation_t = 0.0 if min_h < 0 else None
    relaxations = 0
    active_count = 0
    total_reward = 0.0
    est_abs: list[float] = []
    est_rel: list[float] = []
    transitions: list[Transition] | None = [] if keep_transitions else None
    reward_last = 0.0

    for k in range(steps):
        t = k * T

        t0 = clock()
        u_rl = np.asarray(policy.act(x, t), dtype=float)
        if timers:
            timers.policy += clock() - t0

        slack_used = False
        if filter_mode == "off":
            u = model.input_box.clip(u_rl)
            filter_active = bool(np.linalg.norm(u - u_rl) > 1e-9)
        else:
            if filter_mode == "dob_cbf":
                delta = bound.delta(t)
                d_hat = obs.d_hat
            else:
                delta = 0.0
                d_hat = np.zeros(model.n)
            t0 = clock()
            cons = [assemble_constraint(s, x, d_hat, delta) for s in plant.specs]
            if timers:
                timers.assembly += clock() - t0
            t0 = clock()
            sol = solver.solve(QpProblem(P, u_rl, cons, model.input_box))
            if timers:
                timers.qp += clock() - t0
            if sol.status == "failed":
                raise EpisodeAbortError(
                    "QP solver failed", step=k,
                    diagnostics={"t": t, "x": x.tolist(), "u_rl": u_rl.tolist(),
                                 "iterations": sol.iterations})
            u = sol.u
            slack_used = sol.status == "relaxed"
            relaxations += int(slack_used)
            filter_active = bool(np.linalg.norm(u - u_rl) > 1e-9)
        active_count += int(filter_active)

        x_start = x.copy()
        for _ in range(substeps):
            t0 = clock()
            x_next = step_rk4(model, x, u, plant.disturbance, dt)
            if timers:
                timers.plant += clock() - t0
            t0 = clock()
            obs = predictor_step(obs, model, x, u, dt, x_next=x_next)
            if timers:
                timers.observer += clock() - t0
            x = x_next
            h_now = plant.min_barrier(x)
            if h_now < min_h:
                min_h = h_now
            if h_now < 0 and first_violation_t is None:
                first_violation_t = obs.t

        # re-wrap circular coordinates, relabeling the predictor identically
        for idx in plant.angle_indices:
            wrapped = wrap_angle(float(x[idx]))
            shift = wrapped - x[idx]
            if shift != 0.0:
                x[idx] = wrapped
                delta_vec = np.zeros(model.n)
                delta_vec[idx] = shift
                obs = shift_state(obs, delta_vec)

        t0 = clock()
        obs = pc_update(obs, x)
        if timers:
            timers.observer += clock() - t0

        if collect_estimation:
            d_true = plant.disturbance(x)
            err = float(np.linalg.norm(obs.d_hat - d_true))
            norm = float(np.linalg.norm(d_true))
            est_abs.append(err)
            est_rel.append(err / norm if norm > 1e-12 else float("nan"))

        reward_last = plant.reward(x, u, t + T)
        total_reward += reward_last
        policy.feedback(reward_last)
        if transitions is not None:
            transitions.append(Transition(
                t=t, x=x_start, u_rl=u_rl.copy(), u_safe=u.copy(),
                x_next=x.copy(), reward=reward_last,
                filter_active=filter_active, slack_used=slack_used))

    policy.finish(x, steps * T, reward_last)
    return EpisodeRecord(
        steps=steps,
        violation=bool(min_h < 0),
        min_h=float(min_h),
        first_violation_t=first_violation_t,
        relaxation_count=relaxations,
        filter_active_count=active_count,
        total_reward=float(total_reward),
        estimation_errors=np.array(est_abs) if collect_estimation else None,
        estimation_rel_errors=np.array(est_rel) if collect_estimation else None,
        transitions=transitions,
    )
