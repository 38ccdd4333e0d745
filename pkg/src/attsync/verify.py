"""Numerical property suite for the synchronization laws.

Each ``check_*`` function returns a :class:`CheckResult`; failures carry a
JSON-serialisable dict describing the offending state so it can be
replayed.  :func:`run_all` is what ``attsync verify`` executes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis as an
from .control import DYNAMIC_REST, KINEMATIC, Gains, network_kinematic_control
from .measurements import RepeatedEigenvalueError, build_vector_set
from .presets import PRESETS, preset
from .presets import vector_set as reference_vector_set
from .sim import SimConfig, run_batch, simulate
from .so3 import exp_so3, random_rotation
from .topology import build_topology, path


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    failure: dict | None = None
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def random_tree(n, rng):
    """Uniform random attachment tree with random edge orientations."""
    edges = []
    for j in range(2, n + 1):
        i = int(rng.integers(1, j))
        edges.append((i, j) if rng.random() < 0.5 else (j, i))
    order = rng.permutation(len(edges))
    return build_topology(n, [edges[k] for k in order])


def random_vector_set(rng, n_vectors=None):
    while True:
        n = n_vectors or int(rng.integers(2, 5))
        a = rng.standard_normal((n, 3))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        try:
            return build_vector_set(a, rng.uniform(0.5, 2.0, n), eig_gap_tol=1e-3)
        except (RepeatedEigenvalueError, ValueError):
            continue


# ---------------------------------------------------------------- algebra


def identity_errors(R, w, topology, vs, gains):
    """Residuals of the three aggregate identities for one state (dense oracles)."""
    rel = an.relative_state(R, w, topology)
    Psi = an.psi_vector(rel.rbars, vs.gram)
    BR = an.bold_r(R)
    BH = an.bold_h(rel.rbars, topology)
    agg = gains.k_R * BR.T @ BH @ Psi
    local = network_kinematic_control(R, topology, vs, gains).ravel()
    wbar = -BH.T @ BR @ w.ravel()
    ones = np.kron(np.ones((topology.n_agents, 1)), np.eye(3))
    zero_sum = ones.T @ BR.T @ BH @ Psi
    return (
        float(np.max(np.abs(local - agg))),
        float(np.max(np.abs(rel.omega_bars.ravel() - wbar))),
        float(np.linalg.norm(zero_sum)),
    )


def check_identities(rng, trials=1000, n_agents=8, tol=1e-12):
    t0 = time.perf_counter()
    worst = np.zeros(3)
    for trial in range(trials):
        topo = random_tree(n_agents, rng)
        vs = random_vector_set(rng)
        gains = Gains(float(rng.uniform(0.1, 3.0)))
        R = random_rotation(rng, n_agents)
        w = rng.uniform(-1, 1, (n_agents, 3))
        errs = np.array(identity_errors(R, w, topo, vs, gains))
        worst = np.maximum(worst, errs)
        if np.any(errs > tol):
            return CheckResult(
                "identities", False, f"trial {trial}: residuals {errs}",
                _jsonable({"edges": topo.edge_list(), "vectors": vs.vectors, "weights": vs.weights,
                           "k_R": gains.k_R, "attitudes": R, "velocities": w}),
                time.perf_counter() - t0,
            )
    return CheckResult(
        "identities", True,
        f"{trials} states: control {worst[0]:.1e}, wbar {worst[1]:.1e}, zero-sum {worst[2]:.1e} (tol {tol:g})",
        seconds=time.perf_counter() - t0,
    )


def gradient_error(rbars, A, zeta, t=1e-6):
    """Relative error between a central difference of ``V`` along ``zeta`` and ``2 zeta . Psi``."""
    vp = an.lyapunov_kinematic(an.perturb(rbars, zeta, t), A)
    vm = an.lyapunov_kinematic(an.perturb(rbars, zeta, -t), A)
    fd = (vp - vm) / (2 * t)
    exact = 2.0 * float(np.sum(zeta * an.psi_blocks(rbars, A)))
    return abs(fd - exact) / abs(exact)


def check_gradient(rng, trials=100, n_edges=7, tol=1e-4):
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(trials):
        vs = random_vector_set(rng)
        rbars = random_rotation(rng, n_edges)
        zeta = rng.standard_normal((n_edges, 3))
        err = gradient_error(rbars, vs.gram, zeta)
        worst = max(worst, err)
        if err >= tol:
            return CheckResult("gradient", False, f"trial {trial}: relative error {err:.2e}",
                               _jsonable({"rbars": rbars, "zeta": zeta, "gram": vs.gram}),
                               time.perf_counter() - t0)
    return CheckResult("gradient", True, f"{trials} directions, worst relative error {worst:.1e} (tol {tol:g})",
                       seconds=time.perf_counter() - t0)


# ---------------------------------------------------------------- equilibria


def check_hessian(vs=None, tol=1e-10, fd_tol=1e-4):
    t0 = time.perf_counter()
    vs = vs or reference_vector_set()
    rows = []
    for label in an.all_edge_labels():
        rbar = an.label_rotation(label, vs)[None]
        hb = an.hessian_blocks(rbar, vs.gram)
        expected = np.sort(an.closed_form_spectrum(label, vs))
        err = float(np.max(np.abs(hb.eigenvalues[0] - expected)))
        fd_err = float(np.max(np.abs(an.hessian_blocks_fd(rbar, vs.gram) - hb.blocks)))
        rows.append((label, hb.eigenvalues[0], hb.classification))
        if err > tol or fd_err > fd_tol:
            return CheckResult("hessian", False, f"{label}: eig error {err:.1e}, fd error {fd_err:.1e}",
                               _jsonable({"label": label, "gram": vs.gram}), time.perf_counter() - t0)
    desc = "; ".join(f"{l}: {np.round(e, 12).tolist()} {c}" for l, e, c in rows)
    return CheckResult("hessian", True, desc, seconds=time.perf_counter() - t0)


def check_equilibria(rng, vs=None, n_agents=3, random_states=20):
    t0 = time.perf_counter()
    vs = vs or reference_vector_set()
    topo = path(n_agents)
    count = 0
    for labels, R, rep in an.enumerate_equilibria(topo, vs):
        count += 1
        want = "desired" if all(l == an.IDENTITY for l in labels) else "undesired"
        eigs = np.ravel(rep.hessian_block_eigenvalues)
        ok = rep.kind == want and tuple(rep.labels) == tuple(labels)
        ok &= (np.all(eigs > 0) if want == "desired" else np.any(eigs < 0))
        if not ok:
            return CheckResult("equilibria", False, f"labels {labels} classified as {rep.kind}/{rep.classification}",
                               _jsonable({"labels": labels, "attitudes": R}), time.perf_counter() - t0)
    for _ in range(random_states):
        R = random_rotation(rng, n_agents)
        rep = an.classify_equilibrium(an.relative_attitudes(R, topo), vs)
        if rep.kind != "none":
            return CheckResult("equilibria", False, "random state classified as an equilibrium",
                               _jsonable({"attitudes": R}), time.perf_counter() - t0)
    return CheckResult("equilibria", True,
                       f"{count} label combinations on a {n_agents}-agent path classified; "
                       f"{random_states} random states rejected", seconds=time.perf_counter() - t0)


def escape_initials(vs, label, per_label, rng, radius=1e-3):
    """Two-agent attitudes at a single-edge equilibrium with a random tangent kick of norm ``radius``."""
    rbar = an.label_rotation(label, vs)
    zeta = rng.standard_normal((per_label, 3))
    zeta *= radius / np.linalg.norm(zeta, axis=1, keepdims=True)
    R0 = np.empty((per_label, 2, 3, 3))
    R0[:, 0] = np.eye(3)
    R0[:, 1] = rbar @ exp_so3(zeta)
    return R0


def check_escape(rng, per_label=20, t_max=60.0, dt=1e-3, sync_tol=1e-6, vs=None):
    t0 = time.perf_counter()
    vs = vs or reference_vector_set()
    topo = path(2)
    cfg = SimConfig(topo, vs, Gains(1.0), np.eye(3), KINEMATIC, dt=dt, duration=t_max)
    labels = [l for l in an.all_edge_labels() if l != an.IDENTITY]
    R0 = np.concatenate([escape_initials(vs, l, per_label, rng) for l in labels])
    res = run_batch(cfg, R0, np.zeros((len(R0), 2, 3)), sync_tol=sync_tol)
    if not np.all(res.converged):
        bad = int(np.flatnonzero(~res.converged)[0])
        return CheckResult("escape", False,
                           f"{int((~res.converged).sum())}/{len(R0)} runs still unsynchronized at t = {t_max:g}s",
                           _jsonable({"label": labels[bad // per_label], "attitudes": R0[bad]}),
                           time.perf_counter() - t0)
    return CheckResult("escape", True,
                       f"{len(R0)}/{len(R0)} perturbed undesired equilibria synchronized; "
                       f"latest at t = {np.max(res.convergence_time):.1f}s",
                       seconds=time.perf_counter() - t0, extra={"times": res.convergence_time})


def monte_carlo_initials(rng, trials, n_agents=8):
    R0 = random_rotation(rng, (trials, n_agents))
    w0 = rng.uniform(-1.0, 1.0, (trials, n_agents, 3))
    return R0, w0


def check_monte_carlo(seed, trials=100, t_max=400.0, dt=5e-3, tol=1e-6):
    """Haar-random attitudes and ``w ~ U[-1, 1]^3`` on the eight-agent path, dynamic-rest gains."""
    t0 = time.perf_counter()
    cfg, _ = preset("paper-sec6-rest", dt=dt, duration=t_max)
    seqs = np.random.SeedSequence(seed).spawn(trials)
    pairs = [monte_carlo_initials(np.random.default_rng(s), 1) for s in seqs]
    R0 = np.concatenate([p[0] for p in pairs])
    w0 = np.concatenate([p[1] for p in pairs])
    res = run_batch(cfg, R0, w0, sync_tol=tol, omega_tol=tol, check_every=200)
    n_ok = int(res.converged.sum())
    if n_ok != trials:
        bad = int(np.flatnonzero(~res.converged)[0])
        return CheckResult("monte-carlo", False, f"{n_ok}/{trials} converged by t = {t_max:g}s",
                           _jsonable({"trial": bad, "attitudes": R0[bad], "velocities": w0[bad]}),
                           time.perf_counter() - t0)
    return CheckResult("monte-carlo", True,
                       f"{trials}/{trials} converged (sync error and max |w_i| < {tol:g}); "
                       f"slowest at t = {np.max(res.convergence_time):.0f}s",
                       seconds=time.perf_counter() - t0, extra={"times": res.convergence_time})


# ---------------------------------------------------------------- scenario runs


def vdot_fd_errors(traj, floor=1e-6):
    """Relative errors of a central difference of recorded ``V`` against the analytic rate."""
    t, V = traj.times, traj.diagnostics["V"]
    vd = traj.diagnostics["Vdot_analytic"][1:-1]
    fd = (V[2:] - V[:-2]) / (t[2:] - t[:-2])
    mask = np.abs(vd) > floor
    return np.abs(fd[mask] - vd[mask]) / np.abs(vd[mask])


def check_presets(slack=1e-8, rate_tol=0.05, tol=1e-6):
    t0 = time.perf_counter()
    notes = []
    for name in PRESETS:
        # stride 1 resolves the millisecond velocity transient of the dynamic modes
        cfg, x0 = preset(name, record_stride=1)
        traj = simulate(cfg, x0)
        d = traj.diagnostics
        rise = float(np.max(np.diff(d["V"])))
        rate_err = float(np.max(vdot_fd_errors(traj)))
        w = traj.velocities[-1]
        problems = []
        if rise >= slack:
            problems.append(f"Lyapunov increase {rise:.1e}")
        if rate_err >= rate_tol:
            problems.append(f"dV/dt mismatch {rate_err:.1%}")
        if d["sync_error"][-1] >= tol:
            problems.append(f"sync error {d['sync_error'][-1]:.1e}")
        if cfg.mode == DYNAMIC_REST and np.linalg.norm(w, axis=1).max() >= tol:
            problems.append(f"max |w| {np.linalg.norm(w, axis=1).max():.1e}")
        if cfg.mode not in (KINEMATIC, DYNAMIC_REST) and np.linalg.norm(w - w.mean(0), axis=1).max() >= tol:
            problems.append("velocities not in consensus")
        if problems:
            return CheckResult("presets", False, f"{name}: " + ", ".join(problems),
                               _jsonable({"preset": name}), time.perf_counter() - t0)
        notes.append(f"{name} sync {d['sync_error'][-1]:.1e}")
    return CheckResult("presets", True, "; ".join(notes), seconds=time.perf_counter() - t0)


def run_all(seed=0, trials=10, escape_per_label=5):
    """Run every check; ``trials`` sizes the Monte Carlo convergence study."""
    rng = np.random.default_rng(seed)
    return [
        check_identities(rng),
        check_gradient(rng),
        check_hessian(),
        check_equilibria(rng),
        check_escape(rng, per_label=escape_per_label),
        check_presets(),
        check_monte_carlo(seed, trials=trials),
    ]
