from .base import Plant
from .episode import EpisodeRecord, Transition, run_episode
from .quadrotor import QuadrotorParams, make_quadrotor_plant, quadrotor_model
from .scalar import make_scalar_model
from .unicycle import UnicycleParams, make_unicycle_plant, unicycle_model

__all__ = [
    "Plant", "EpisodeRecord", "Transition", "run_episode",
    "UnicycleParams", "unicycle_model", "make_unicycle_plant",
    "QuadrotorParams", "quadrotor_model", "make_quadrotor_plant",
    "make_scalar_model",
]
