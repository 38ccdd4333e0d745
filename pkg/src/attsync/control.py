"""Distributed feedback laws built from body-frame vector measurements only.

The per-agent functions (:func:`kinematic_control`, :func:`dynamic_torque`)
take exactly what one agent sees: its own measurements, its neighbours'
shared measurements, and angular velocities.  The ``network_*`` variants
evaluate the same laws for every agent at once from stacked attitudes, by
synthesising the measurements first; they never use neighbour rotations
directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurements import measure

KINEMATIC = "kinematic"
DYNAMIC_REST = "dynamic-rest"
DYNAMIC_FLOCK = "dynamic-flock"
MODES = (KINEMATIC, DYNAMIC_REST, DYNAMIC_FLOCK)


class GainModeError(ValueError):
    """Gains inconsistent with the requested closed-loop mode."""


@dataclass(frozen=True)
class Gains:
    k_R: float = 1.0
    k_omega: float = 0.0
    k_omega_bar: float = 0.0

    def check(self, mode=None):
        if not self.k_R > 0:
            raise GainModeError(f"k_R must be positive, got {self.k_R}")
        if self.k_omega < 0 or self.k_omega_bar < 0:
            raise GainModeError("k_omega and k_omega_bar must be nonnegative")
        if mode == DYNAMIC_REST and not self.k_omega > 0:
            raise GainModeError(f"mode {mode!r} needs k_omega > 0 (got {self.k_omega})")
        if mode == DYNAMIC_FLOCK and (self.k_omega != 0 or not self.k_omega_bar > 0):
            raise GainModeError(
                f"mode {mode!r} needs k_omega = 0 and k_omega_bar > 0 "
                f"(got {self.k_omega}, {self.k_omega_bar})"
            )
        if mode is not None and mode not in MODES:
            raise GainModeError(f"unknown mode {mode!r}; expected one of {MODES}")
        return self


def check_inertia(J):
    J = np.asarray(J, dtype=float)
    if J.shape != (3, 3):
        raise ValueError(f"inertia must be 3x3, got {J.shape}")
    if np.max(np.abs(J - J.T)) > 1e-12:
        raise ValueError("inertia must be symmetric")
    if np.min(np.linalg.eigvalsh(J)) <= 0:
        raise ValueError("inertia must be positive definite")
    return J


def _alignment(own, neighbor_meas, weights):
    own = np.asarray(own, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = np.zeros(3)
    for b_j in neighbor_meas:
        b_j = np.asarray(b_j, dtype=float)
        if b_j.shape != own.shape or len(weights) != own.shape[0]:
            raise ValueError(
                f"measurement count mismatch: own {own.shape}, neighbour {b_j.shape}, {len(weights)} weights"
            )
        total += weights @ np.cross(b_j, own)
    return 0.5 * total


def kinematic_control(gains, own, neighbor_meas, weights):
    """Angular velocity command ``(k_R/2) sum_j sum_l rho_l (b_l^j x b_l^i)``."""
    return gains.k_R * _alignment(own, neighbor_meas, weights)


def dynamic_torque(gains, inertia, own_omega, neighbor_omegas, own, neighbor_meas, weights):
    """Control torque: gyroscopic compensation + alignment - absolute and relative damping."""
    w = np.asarray(own_omega, dtype=float)
    J = np.asarray(inertia, dtype=float)
    rel = sum((w - np.asarray(wj, dtype=float) for wj in neighbor_omegas), np.zeros(3))
    return (
        np.cross(w, J @ w)
        + gains.k_R * _alignment(own, neighbor_meas, weights)
        - gains.k_omega * w
        - gains.k_omega_bar * rel
    )


def network_alignment(R, topology, vs):
    """``(1/2) sum_j sum_l rho_l (b_l^j x b_l^i)`` for every agent; shape ``(..., N, 3)``."""
    b = measure(vs, R)  # (..., N, n, 3)
    heads, tails = topology.heads, topology.tails
    # edge k = (i -> j): agent i gets b^j x b^i, agent j gets the negative
    c = np.einsum("l,...kld->...kd", vs.weights, np.cross(b[..., tails, :, :], b[..., heads, :, :]))
    return 0.5 * np.einsum("nk,...kd->...nd", topology.incidence, c)


def network_kinematic_control(R, topology, vs, gains):
    return gains.k_R * network_alignment(R, topology, vs)


def network_torque(R, w, topology, vs, gains, inertias):
    """Control torques for all agents; ``inertias`` has shape ``(N, 3, 3)``."""
    Jw = np.einsum("nij,...nj->...ni", inertias, w)
    lap_w = np.einsum("nm,...md->...nd", topology.laplacian, w)
    return (
        np.cross(w, Jw)
        + gains.k_R * network_alignment(R, topology, vs)
        - gains.k_omega * w
        - gains.k_omega_bar * lap_w
    )

