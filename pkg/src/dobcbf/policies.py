"""Action sources standing in for a learning agent.

Every policy is a small object with ``reset(seed)`` and ``act(x, t)``.  The
filter downstream owns final feasibility; policies only pre-clip their output
to twice the actuator box so a wild action source cannot hand the solver
absurd numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bridge import PolicyBridge
from .dynamics import BoxSet, wrap_angle
from .errors import DimensionMismatchError


def _pre_clip(u: np.ndarray, box: BoxSet) -> np.ndarray:
    lo = box.center - 2.0 * box.half_width
    hi = box.center + 2.0 * box.half_width
    return np.clip(u, lo, hi)


class Policy:
    """Base: deterministic given the reset seed."""

    def reset(self, seed: int) -> None:  # pragma: no cover - trivial default
        pass

    def act(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def feedback(self, reward: float) -> None:
        """Reward of the previous transition; only the bridge cares."""

    def finish(self, x: np.ndarray, t: float, last_reward: float) -> None:
        """Episode-end hook."""


class ConstantPolicy(Policy):
    def __init__(self, u0, box: BoxSet):
        self.u0 = np.asarray(u0, dtype=float)
        self.box = box

    def act(self, x, t):
        return _pre_clip(self.u0.copy(), self.box)


class UnicycleTracker(Policy):
    """Proportional goal seeking: steer toward the goal, speed with distance."""

    def __init__(self, goal, box: BoxSet, v_gain: float = 1.2,
                 heading_gain: float = 2.5, stop_radius: float = 1e-9):
        self.goal = np.asarray(goal, dtype=float)
        self.box = box
        self.v_gain = v_gain
        self.heading_gain = heading_gain
        self.stop_radius = stop_radius

    def act(self, x, t):
        dx, dy = self.goal[0] - x[0], self.goal[1] - x[1]
        dist = math.hypot(dx, dy)
        if dist < self.stop_radius:
            return np.zeros(2)
        bearing = math.atan2(dy, dx)
        err = wrap_angle(bearing - x[2])
        v = self.v_gain * dist * max(0.0, math.cos(err))
        omega = self.heading_gain * err
        u = np.array([min(v, self.box.upper[0]),
                      np.clip(omega, self.box.lower[1], self.box.upper[1])])
        return _pre_clip(u, self.box)


class QuadrotorTracker(Policy):
    """PD position tracking mapped to rotor thrusts with an attitude loop."""

    def __init__(self, reference, box: BoxSet, mass: float, gravity: float,
                 arm: float, inertia_yy: float, kp: float = 4.0,
                 kd: float = 3.5, k_pitch: float = 200.0, k_rate: float = 30.0):
        self.reference = reference          # t -> (pos, vel, acc), each length 2
        self.box = box
        self.mass = mass
        self.gravity = gravity
        self.arm = arm
        self.inertia_yy = inertia_yy
        self.kp, self.kd = kp, kd
        self.k_pitch, self.k_rate = k_pitch, k_rate

    def act(self, x, t):
        p = np.array([x[0], x[2]])
        v = np.array([x[1], x[3]])
        theta, theta_dot = x[4], x[5]
        ref_p, ref_v, ref_a = self.reference(t)
        a_des = ref_a + self.kp * (ref_p - p) + self.kd * (ref_v - v)
        want = a_des + np.array([0.0, self.gravity])   # net specific force
        force = self.mass * float(np.linalg.norm(want))
        theta_des = math.atan2(-want[0], want[1])
        pitch_acc = self.k_pitch * wrap_angle(theta_des - theta) - self.k_rate * theta_dot
        diff = self.inertia_yy * pitch_acc / self.arm
        u = np.array([0.5 * (force - diff), 0.5 * (force + diff)])
        return _pre_clip(u, self.box)


class NoisyExplorer(Policy):
    """Wrapped policy plus uniform noise, mimicking an untrained agent.

    ``amplitude`` is a fraction of the actuator half-range per input.  With
    ``decay_episodes`` set, the amplitude falls linearly to zero over that
    many episodes, approximating an exploration schedule.
    """

    def __init__(self, inner: Policy, box: BoxSet, amplitude: float,
                 decay_episodes: int = 0):
        self.inner = inner
        self.box = box
        self.amplitude = amplitude
        self.decay_episodes = decay_episodes
        self.episode = 0
        self._rng = np.random.default_rng(0)

    def set_episode(self, episode: int) -> None:
        self.episode = episode

    def current_amplitude(self) -> float:
        if self.decay_episodes > 0:
            frac = max(0.0, 1.0 - self.episode / self.decay_episodes)
            return self.amplitude * frac
        return self.amplitude

    def reset(self, seed: int) -> None:
        self.inner.reset(seed)
        self._rng = np.random.default_rng(seed)

    def act(self, x, t):
        u = self.inner.act(x, t)
        amp = self.current_amplitude() * self.box.half_width
        if np.any(amp > 0):
            u = u + self._rng.uniform(-amp, amp)
        return _pre_clip(u, self.box)


class ExternalPolicy(Policy):
    """Delegates each step to a peer over the line bridge."""

    def __init__(self, bridge: PolicyBridge, m: int, box: BoxSet):
        self.bridge = bridge
        self.m = m
        self.box = box
        self._last_reward: float | None = None

    def act(self, x, t):
        u = self.bridge.request(t, x, self._last_reward, done=False)
        if u.size != self.m:
            raise DimensionMismatchError("bridge action", self.m, u.size)
        return _pre_clip(u, self.box)

    def feedback(self, reward: float) -> None:
        self._last_reward = reward

    def finish(self, x, t, last_reward):
        try:
            self.bridge.request(t, x, last_reward, done=True)
        except Exception:
            pass  # the episode is over; a silent peer is tolerable here
