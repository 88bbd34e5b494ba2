"""Plant bundle consumed by the episode runner and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..barriers import ConstraintSpec
from ..dynamics import DisturbanceFn, SystemModel


@dataclass
class Plant:
    """Everything an episode needs: model, barriers, truth, task.

    ``x0`` maps an episode seed to the initial state.  ``angle_indices``
    lists state components that live on a circle; the runner re-wraps them at
    sample instants (relabeling both plant and predictor) so the state box
    stays compact over long runs.
    """

    name: str
    model: SystemModel
    specs: Sequence[ConstraintSpec]
    disturbance: DisturbanceFn
    reward: Callable[[np.ndarray, np.ndarray, float], float]
    x0: Callable[[int], np.ndarray]
    angle_indices: tuple[int, ...] = ()
    equilibrium_input: np.ndarray | None = None

    def min_barrier(self, x: np.ndarray) -> float:
        return min(float(s.h(x)) for s in self.specs)
