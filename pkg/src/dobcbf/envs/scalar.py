"""One-dimensional stable test plant used by bound-certification runs.

xdot = -decay x + u + d(x).  The self-stabilizing drift keeps certification
trajectories inside the state box for any bounded disturbance and input.
"""

from __future__ import annotations

import numpy as np

from ..dynamics import BoxSet, SystemModel


def make_scalar_model(l_d: float = 0.3, b_d: float = 0.3, x_max: float = 5.0,
                      u_max: float = 1.0, decay: float = 1.0) -> SystemModel:
    return SystemModel(
        n=1, m=1,
        drift=lambda x: -decay * x,
        input_matrix=lambda x: np.array([[1.0]]),
        state_box=BoxSet(np.array([-x_max]), np.array([x_max])),
        input_box=BoxSet(np.array([-u_max]), np.array([u_max])),
        lipschitz_const=l_d,
        origin_bound=b_d,
    )
