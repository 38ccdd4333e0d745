"""Leaderless attitude synchronization on SO(3) from inertial-vector measurements."""
from .control import DYNAMIC_FLOCK, DYNAMIC_REST, KINEMATIC, Gains
from .measurements import InertialVectorSet, build_vector_set, measure
from .sim import NetworkState, SimConfig, Trajectory, run_batch, simulate, step
from .topology import Topology, build_topology, path, star

__version__ = "0.1.0"
