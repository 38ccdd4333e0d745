"""The eight-satellite scenario used for the reference simulations.

The exact interaction graph of the original scenario is only available as a
picture; the path 1-2-...-8 stands in for it (any tree satisfies the
assumptions).
"""
from __future__ import annotations

import numpy as np

from .control import DYNAMIC_FLOCK, DYNAMIC_REST, KINEMATIC, Gains
from .measurements import build_vector_set
from .sim import NetworkState, SimConfig
from .so3 import rodrigues
from .topology import path

N_AGENTS = 8
INERTIA = np.diag([0.0159, 0.015, 0.0297])
ANGLE_TENTHS_OF_PI = (1, 9, 4, 3, 2, 8, 7, 6)
AXIS = np.array([1.0, 0.0, 0.0])
INITIAL_OMEGAS = np.array(
    [
        [0.1, 0.6, 0.6],
        [0.4, 0.95, 0.87],
        [0.73, 0.69, 0.58],
        [0.0, 0.87, 0.0],
        [0.45, 0.18, 0.48],
        [0.74, 0.0, 1.0],
        [0.5, 0.7, 0.94],
        [0.69, 0.73, 0.5],
    ]
)
VECTORS = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
WEIGHTS = np.array([1.0, 2.0])

PRESETS = {
    "paper-sec6-kinematic": (KINEMATIC, Gains(1.0, 0.0, 0.0), 30.0),
    "paper-sec6-rest": (DYNAMIC_REST, Gains(1.0, 1.0, 1.0), 120.0),
    "paper-sec6-flock": (DYNAMIC_FLOCK, Gains(1.0, 0.0, 1.0), 30.0),
}


def vector_set():
    return build_vector_set(VECTORS, WEIGHTS)


def initial_state():
    R = np.array([rodrigues(c * np.pi / 10, AXIS) for c in ANGLE_TENTHS_OF_PI])
    return NetworkState(0.0, R, INITIAL_OMEGAS.copy())


def preset(name, **overrides):
    """``(SimConfig, NetworkState)`` for one of :data:`PRESETS`; keyword overrides go to ``SimConfig``."""
    try:
        mode, gains, duration = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    kw = dict(
        topology=path(N_AGENTS),
        vector_set=vector_set(),
        gains=gains,
        inertias=np.broadcast_to(INERTIA, (N_AGENTS, 3, 3)).copy(),
        mode=mode,
        duration=duration,
    )
    kw.update(overrides)
    return SimConfig(**kw), initial_state()
