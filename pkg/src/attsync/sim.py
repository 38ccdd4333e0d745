"""Closed-loop integration of the networked rigid bodies.

Attitudes are advanced with a fourth-order Runge-Kutta-Munthe-Kaas scheme:
each agent's update is ``R <- R exp(theta)`` where ``theta`` solves the
body-frame equation ``dtheta/dt = J_r(theta)^{-1} w`` by classical RK4.
Angular velocities (dynamic modes) ride along in the same RK4 tableau.
Every update is an exact group element, so reprojection onto SO(3) is only
a safety net.

:func:`rk4_step_reference` is the readable numpy form of one step; the
compiled loop in ``_kernels`` performs the same arithmetic and is what
:func:`step`, :func:`simulate` and :func:`run_batch` call.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import analysis as an
from .control import DYNAMIC_FLOCK, DYNAMIC_REST, KINEMATIC, MODES, Gains, check_inertia
from .control import network_kinematic_control, network_torque
from .so3 import check_rotation, exp_so3, ortho_drift, right_jacobian_inv

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    """Non-finite state: the step size is too large for the closed loop."""


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkState:
    time: float
    attitudes: np.ndarray  # (N, 3, 3)
    velocities: np.ndarray  # (N, 3)

    def __post_init__(self):
        R = check_rotation(self.attitudes, tol=1e-6)
        w = np.asarray(self.velocities, dtype=float)
        if R.ndim != 3 or w.shape != (R.shape[0], 3):
            raise ValueError(f"attitudes {R.shape} and velocities {w.shape} disagree")
        object.__setattr__(self, "attitudes", R)
        object.__setattr__(self, "velocities", w)

    @property
    def n_agents(self):
        return self.attitudes.shape[0]


@dataclass(frozen=True)
class SimConfig:
    topology: object
    vector_set: object
    gains: Gains
    inertias: np.ndarray  # (N, 3, 3)
    mode: str = KINEMATIC
    dt: float = 1e-3
    duration: float = 30.0
    reprojection_threshold: float = 1e-9
    record_stride: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise SimConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        self.gains.check(self.mode)
        if not self.dt > 0:
            raise SimConfigError(f"dt must be positive, got {self.dt}")
        if not self.duration >= self.dt:
            raise SimConfigError(f"duration {self.duration} shorter than dt {self.dt}")
        if int(self.record_stride) < 1:
            raise SimConfigError("record_stride must be a positive integer")
        J = np.asarray(self.inertias, dtype=float)
        if J.shape == (3, 3):
            J = np.broadcast_to(J, (self.topology.n_agents, 3, 3)).copy()
        if J.shape != (self.topology.n_agents, 3, 3):
            raise SimConfigError(f"need one 3x3 inertia per agent, got {J.shape}")
        for Ji in J:
            check_inertia(Ji)
        object.__setattr__(self, "inertias", J)
        object.__setattr__(self, "record_stride", int(self.record_stride))

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    @property
    def inertia_inv(self):
        return np.linalg.inv(self.inertias)


@dataclass
class Trajectory:
    mode: str
    times: np.ndarray  # (S,)
    attitudes: np.ndarray  # (S, N, 3, 3)
    velocities: np.ndarray  # (S, N, 3)
    diagnostics: dict = field(default_factory=dict)
    omega_c: np.ndarray | None = None
    reprojections: int = 0

    DIAGNOSTIC_KEYS = ("V", "Vdot_analytic", "sync_error", "psi_norm", "omega_norm", "ortho_drift")

    def __len__(self):
        return len(self.times)

    def state(self, m):
        return NetworkState(float(self.times[m]), self.attitudes[m], self.velocities[m])

    @property
    def samples(self):
        return [self.state(m) for m in range(len(self))]

    @property
    def final(self):
        return self.state(-1)


# ---------------------------------------------------------------- right-hand sides


def kinematic_rhs(state, topology, vector_set, gains):
    """Body angular velocities commanded by the kinematic law, shape ``(N, 3)``."""
    return network_kinematic_control(state.attitudes, topology, vector_set, gains)


def dynamic_rhs(state, topology, vector_set, gains, inertias):
    """``(w, wdot)``: attitude direction ``R^T dR/dt`` and Euler-equation acceleration."""
    R, w = state.attitudes, state.velocities
    J = np.asarray(inertias, dtype=float)
    tau = network_torque(R, w, topology, vector_set, gains, J)
    Jw = np.einsum("nij,nj->ni", J, w)
    wdot = np.linalg.solve(J, (tau - np.cross(w, Jw))[..., None])[..., 0]
    return w, wdot


def _model(config):
    """Array-level vector field ``(R, w) -> (w_body, wdot)`` for the configured mode."""
    topo, vs, gains = config.topology, config.vector_set, config.gains
    J, Jinv = config.inertias, config.inertia_inv
    if config.mode == KINEMATIC:

        def f(R, w):
            return network_kinematic_control(R, topo, vs, gains), None

    else:

        def f(R, w):
            tau = network_torque(R, w, topo, vs, gains, J)
            Jw = np.einsum("nij,...nj->...ni", J, w)
            return w, np.einsum("nij,...nj->...ni", Jinv, tau - np.cross(w, Jw))

    return f


def rk4_step_reference(f, R0, w0, h):
    """One RKMK4 step with numpy; ``f`` comes from :func:`_model`."""
    def stage(theta, w):
        R = R0 if theta is None else R0 @ exp_so3(theta)
        om, wd = f(R, w)
        th_dot = om if theta is None else right_jacobian_inv(theta, om)
        return th_dot, wd

    t1, a1 = stage(None, w0)
    dyn = a1 is not None
    t2, a2 = stage(0.5 * h * t1, w0 + 0.5 * h * a1 if dyn else w0)
    t3, a3 = stage(0.5 * h * t2, w0 + 0.5 * h * a2 if dyn else w0)
    t4, a4 = stage(h * t3, w0 + h * a3 if dyn else w0)
    theta = (h / 6.0) * (t1 + 2.0 * t2 + 2.0 * t3 + t4)
    R1 = R0 @ exp_so3(theta)
    w1 = w0 + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4) if dyn else w0
    return R1, w1


class _Integrator:
    """Packs a config into the flat arrays the compiled loop expects."""

    def __init__(self, config):
        self.config = config
        self.args = (
            np.ascontiguousarray(config.topology.heads, dtype=np.int64),
            np.ascontiguousarray(config.topology.tails, dtype=np.int64),
            np.ascontiguousarray(config.vector_set.vectors, dtype=float),
            np.ascontiguousarray(config.vector_set.weights, dtype=float),
            np.array([config.gains.k_R, config.gains.k_omega, config.gains.k_omega_bar], dtype=float),
            np.ascontiguousarray(config.inertias, dtype=float),
            np.ascontiguousarray(config.inertia_inv, dtype=float),
            config.mode == KINEMATIC,
            float(config.reprojection_threshold),
        )
        self.reprojections = 0

    def advance(self, R, w, n_steps):
        """Advance batched ``R (B, N, 3, 3)``, ``w (B, N, 3)`` in place."""
        if n_steps <= 0:
            return
        c, ok = _kernels.rk4_steps(R, w, float(self.config.dt), int(n_steps), *self.args)
        self.reprojections += c
        if not ok:
            raise IntegrationError(f"state became non-finite or left SO(3) with dt = {self.config.dt}; reduce dt")


def step(state, config):
    """Advance one ``dt``. In kinematic mode the returned velocities are the law evaluated at the new attitudes."""
    R = state.attitudes[None].copy()
    w = state.velocities[None].copy()
    _Integrator(config).advance(R, w, 1)
    R1, w1 = R[0], w[0]
    if config.mode == KINEMATIC:
        w1 = _model(config)(R1, None)[0]
    return NetworkState(state.time + config.dt, R1, w1)


# ---------------------------------------------------------------- diagnostics


def conserved_omega(config, w):
    """Momentum-weighted mean ``(sum J_i)^{-1} sum J_i w_i``.

    Under the flocking law ``sum J_i w_i`` is invariant, so this is the
    common velocity the agents settle on.
    """
    J = config.inertias
    return np.linalg.solve(J.sum(axis=0), np.einsum("nij,...nj->...i", J, w))


def diagnostics(config, R, w, omega_c=None):
    """Diagnostic record for one state (or a batch); keys match :attr:`Trajectory.DIAGNOSTIC_KEYS`."""
    topo, vs, gains = config.topology, config.vector_set, config.gains
    rel = an.relative_state(R, w, topo)
    psi_k = an.psi_blocks(rel.rbars, vs.gram)
    if config.mode == KINEMATIC:
        V = an.lyapunov_kinematic(rel.rbars, vs.gram)
        vdot = an.vdot_kinematic(R, rel.rbars, psi_k, topo, gains)
    elif config.mode == DYNAMIC_REST:
        V = an.lyapunov_dynamic(rel.rbars, vs.gram, w, config.inertias, gains)
        vdot = an.vdot_dynamic(w, topo, gains)
    else:
        V = an.lyapunov_dynamic_flock(rel.rbars, vs.gram, w, config.inertias, gains, omega_c)
        vdot = an.vdot_dynamic(w, topo, gains)
    return {
        "V": V,
        "Vdot_analytic": vdot,
        "sync_error": an.sync_error(rel.rbars),
        "psi_norm": np.linalg.norm(psi_k, axis=(-2, -1)),
        "omega_norm": np.linalg.norm(w, axis=(-2, -1)),
        "ortho_drift": np.max(ortho_drift(R), axis=-1),
    }


def simulate(config, initial):
    """Integrate from ``initial`` for ``config.duration``, recording every ``record_stride`` steps."""
    if initial.n_agents != config.topology.n_agents:
        raise SimConfigError(
            f"initial state has {initial.n_agents} agents, topology has {config.topology.n_agents}"
        )
    f = _model(config)
    R, w = initial.attitudes.copy(), initial.velocities.copy()
    if config.mode == KINEMATIC:
        w = f(R, None)[0]
    omega_c = conserved_omega(config, w) if config.mode == DYNAMIC_FLOCK else None

    n_steps, stride = config.n_steps, config.record_stride
    rec = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    times = np.empty(len(rec))
    Rs = np.empty((len(rec),) + R.shape)
    ws = np.empty((len(rec),) + w.shape)
    times[0], Rs[0], ws[0] = initial.time, R, w
    t_wall = _time.perf_counter()
    integ = _Integrator(config)
    Rb, wb = R[None].copy(), w[None].copy()
    for m in range(1, len(rec)):
        integ.advance(Rb, wb, rec[m] - rec[m - 1])
        if config.mode == KINEMATIC:
            wb[0] = f(Rb[0], None)[0]
        times[m], Rs[m], ws[m] = initial.time + rec[m] * config.dt, Rb[0], wb[0]
    log.info("simulated %d steps (%s) in %.2fs", n_steps, config.mode, _time.perf_counter() - t_wall)
    diag = diagnostics(config, Rs, ws, omega_c)
    reproj = integ.reprojections
    diag = {k: np.asarray(v, dtype=float) for k, v in diag.items()}
    return Trajectory(config.mode, times, Rs, ws, diag, omega_c, reproj)


@dataclass
class BatchResult:
    attitudes: np.ndarray  # (B, N, 3, 3)
    velocities: np.ndarray  # (B, N, 3)
    converged: np.ndarray  # (B,) bool
    convergence_time: np.ndarray  # (B,) NaN where not converged
    final_time: float


def run_batch(config, R0, w0, sync_tol=1e-6, omega_tol=None, check_every=100, stop_early=True):
    """Integrate a batch of initial conditions until each is synchronized or time runs out.

    A trial counts as converged once ``sync_error < sync_tol`` and, when
    ``omega_tol`` is given, its velocities satisfy the mode's target:
    ``max ||w_i|| < omega_tol`` for dynamic-rest, ``max ||w_i - mean|| < omega_tol``
    for dynamic-flock.  Converged trials keep integrating (the batch moves
    together) but their first convergence time is frozen.
    """
    f = _model(config)
    R = np.array(R0, dtype=float)
    R = np.ascontiguousarray(R)
    w = np.array(w0, dtype=float) if config.mode != KINEMATIC else np.zeros(R.shape[:-1])
    B = R.shape[0]
    t_conv = np.full(B, np.nan)

    def is_converged(R, w):
        rb = an.relative_attitudes(R, config.topology)
        ok = an.sync_error(rb) < sync_tol
        if omega_tol is not None and config.mode == DYNAMIC_REST:
            ok &= np.max(np.linalg.norm(w, axis=-1), axis=-1) < omega_tol
        elif omega_tol is not None and config.mode == DYNAMIC_FLOCK:
            dev = w - w.mean(axis=-2, keepdims=True)
            ok &= np.max(np.linalg.norm(dev, axis=-1), axis=-1) < omega_tol
        return ok

    integ = _Integrator(config)
    n = 0
    while n < config.n_steps:
        chunk = min(check_every, config.n_steps - n)
        integ.advance(R, w, chunk)
        n += chunk
        ok = is_converged(R, w)
        newly = ok & np.isnan(t_conv)
        t_conv[newly] = n * config.dt
        if stop_early and not np.any(np.isnan(t_conv)):
            break
    if config.mode == KINEMATIC:
        w = f(R, None)[0]
    return BatchResult(R, w, ~np.isnan(t_conv), t_conv, n * config.dt)
