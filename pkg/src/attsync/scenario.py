"""Scenario files and run outputs.

A scenario is an INI file with the sections below; every key is optional
unless marked, and unknown sections or keys are rejected::

    [topology]
    agents = 8                 ; required
    edges = 1-2 2-3 3-4        ; required, head-tail pairs (comma or space separated)

    [vectors]
    a1 = 1 0 0                 ; a1..an, unit vectors in the inertial frame
    a2 = 0 0 1
    weights = 1 2              ; one positive weight per vector
    eig_gap_tol = 1e-6

    [gains]
    k_R = 1
    k_omega = 1
    k_omega_bar = 1

    [agents]
    inertia = diag 0.0159 0.015 0.0297   ; default for all agents, or 9 row-major numbers
    inertia.3 = 0.02 0 0 0 0.02 0 0 0 0.03
    attitude.1 = 18 deg 1 0 0            ; angle, unit (deg|rad), axis
    attitude.2 = matrix 1 0 0 0 1 0 0 0 1
    velocity.1 = 0.1 0.6 0.6
    initial = random                     ; Haar attitudes and w ~ U[-1, 1]^3 from [sim] seed

    [sim]
    mode = kinematic                     ; kinematic | dynamic-rest | dynamic-flock
    dt = 1e-3
    duration = 30
    record_stride = 10
    reprojection_threshold = 1e-9
    seed = 0

    [output]
    dir = runs/example

Agents without an ``attitude.i`` start at the identity; without
``velocity.i`` at rest.
"""
from __future__ import annotations

import configparser
import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control import Gains
from .measurements import EIG_GAP_TOL, build_vector_set
from .sim import NetworkState, SimConfig
from .so3 import check_rotation, random_rotation, rodrigues
from .topology import build_topology


class ScenarioError(ValueError):
    pass


ALLOWED = {
    "topology": {"agents", "edges"},
    "vectors": {"weights", "eig_gap_tol"},
    "gains": {"k_r", "k_omega", "k_omega_bar"},
    "agents": {"inertia", "initial"},
    "sim": {"mode", "dt", "duration", "record_stride", "reprojection_threshold", "seed"},
    "output": {"dir"},
}
INDEXED = {"vectors": re.compile(r"a(\d+)$"), "agents": re.compile(r"(inertia|attitude|velocity)\.(\d+)$")}


@dataclass(frozen=True)
class Scenario:
    config: SimConfig
    initial: NetworkState
    out_dir: Path | None = None


def _floats(text, n=None, what="value"):
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ScenarioError(f"cannot parse numbers in {what}: {text!r}") from None
    if n is not None and len(vals) != n:
        raise ScenarioError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def _parse_edges(text):
    pairs = []
    for tok in text.replace(",", " ").split():
        m = re.fullmatch(r"(\d+)-(\d+)", tok)
        if not m:
            raise ScenarioError(f"edge {tok!r} is not of the form head-tail")
        pairs.append((int(m.group(1)), int(m.group(2))))
    return pairs


def _parse_inertia(text, what):
    parts = text.split()
    if parts and parts[0] == "diag":
        return np.diag(_floats(" ".join(parts[1:]), 3, what))
    return np.array(_floats(text, 9, what)).reshape(3, 3)


def _parse_attitude(text, what):
    parts = text.split()
    if parts and parts[0] == "matrix":
        R = np.array(_floats(" ".join(parts[1:]), 9, what)).reshape(3, 3)
        return check_rotation(R)
    if len(parts) != 5 or parts[1] not in ("deg", "rad"):
        raise ScenarioError(f"{what} must be '<angle> deg|rad <ax> <ay> <az>' or 'matrix <9 numbers>'")
    angle = float(parts[0])
    if parts[1] == "deg":
        angle = np.deg2rad(angle)
    return rodrigues(angle, np.array(_floats(" ".join(parts[2:]), 3, what)))


def _check_keys(cp):
    for section in cp.sections():
        if section not in ALLOWED:
            raise ScenarioError(f"unknown section [{section}]")
        for key in cp[section]:
            if key in ALLOWED[section]:
                continue
            pat = INDEXED.get(section)
            if pat is None or not pat.match(key):
                raise ScenarioError(f"unknown key {key!r} in [{section}]")


def parse_scenario(text, source="<string>", seed=None):
    """Parse scenario text; ``seed`` overrides ``[sim] seed``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from None
    _check_keys(cp)
    get = lambda sec, key, default=None: cp.get(sec, key, fallback=default) if cp.has_section(sec) else default

    if get("topology", "agents") is None or get("topology", "edges") is None:
        raise ScenarioError("[topology] needs 'agents' and 'edges'")
    n = int(get("topology", "agents"))
    topology = build_topology(n, _parse_edges(get("topology", "edges")))

    vec_keys = sorted(
        (int(INDEXED["vectors"].match(k).group(1)), k)
        for k in (cp["vectors"] if cp.has_section("vectors") else {})
        if INDEXED["vectors"].match(k)
    )
    if [i for i, _ in vec_keys] != list(range(1, len(vec_keys) + 1)):
        raise ScenarioError("[vectors] must define a1..an without gaps")
    vectors = [_floats(cp["vectors"][k], 3, k) for _, k in vec_keys]
    weights = _floats(get("vectors", "weights", ""), len(vectors), "weights")
    vs = build_vector_set(vectors, weights, float(get("vectors", "eig_gap_tol", EIG_GAP_TOL)))

    gains = Gains(
        float(get("gains", "k_r", 1.0)),
        float(get("gains", "k_omega", 0.0)),
        float(get("gains", "k_omega_bar", 0.0)),
    )

    default_J = _parse_inertia(get("agents", "inertia", "diag 1 1 1"), "inertia")
    J = np.broadcast_to(default_J, (n, 3, 3)).copy()
    R = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    w = np.zeros((n, 3))
    seed = int(get("sim", "seed", 0)) if seed is None else int(seed)
    initial_mode = get("agents", "initial", "explicit")
    if initial_mode == "random":
        rng = np.random.default_rng(seed)
        R = random_rotation(rng, n)
        w = rng.uniform(-1.0, 1.0, (n, 3))
    elif initial_mode != "explicit":
        raise ScenarioError(f"[agents] initial must be 'random' or 'explicit', got {initial_mode!r}")
    if cp.has_section("agents"):
        for key, val in cp["agents"].items():
            m = INDEXED["agents"].match(key)
            if not m:
                continue
            kind, i = m.group(1), int(m.group(2))
            if not 1 <= i <= n:
                raise ScenarioError(f"{key}: agent {i} outside 1..{n}")
            if kind == "inertia":
                J[i - 1] = _parse_inertia(val, key)
            elif kind == "attitude":
                R[i - 1] = _parse_attitude(val, key)
            else:
                w[i - 1] = _floats(val, 3, key)

    config = SimConfig(
        topology=topology,
        vector_set=vs,
        gains=gains,
        inertias=J,
        mode=get("sim", "mode", "kinematic"),
        dt=float(get("sim", "dt", 1e-3)),
        duration=float(get("sim", "duration", 30.0)),
        reprojection_threshold=float(get("sim", "reprojection_threshold", 1e-9)),
        record_stride=int(get("sim", "record_stride", 10)),
        seed=seed,
    )
    out = get("output", "dir")
    return Scenario(config, NetworkState(0.0, R, w), Path(out) if out else None)


def load_scenario(path, seed=None):
    path = Path(path)
    return parse_scenario(path.read_text(), source=path, seed=seed)


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def format_scenario(config, initial, out_dir=None):
    """Render a scenario file that parses back to ``config`` and ``initial``."""
    vs = config.vector_set
    lines = [
        "[topology]",
        f"agents = {config.topology.n_agents}",
        "edges = " + " ".join(f"{i}-{j}" for i, j in config.topology.edge_list()),
        "",
        "[vectors]",
    ]
    lines += [f"a{l + 1} = {_fmt(a)}" for l, a in enumerate(vs.vectors)]
    lines += [
        f"weights = {_fmt(vs.weights)}",
        "",
        "[gains]",
        f"k_R = {config.gains.k_R!r}",
        f"k_omega = {config.gains.k_omega!r}",
        f"k_omega_bar = {config.gains.k_omega_bar!r}",
        "",
        "[agents]",
    ]
    lines += [f"inertia.{i + 1} = {_fmt(J)}" for i, J in enumerate(config.inertias)]
    lines += [f"attitude.{i + 1} = matrix {_fmt(R)}" for i, R in enumerate(initial.attitudes)]
    lines += [f"velocity.{i + 1} = {_fmt(w)}" for i, w in enumerate(initial.velocities)]
    lines += [
        "",
        "[sim]",
        f"mode = {config.mode}",
        f"dt = {config.dt!r}",
        f"duration = {config.duration!r}",
        f"record_stride = {config.record_stride}",
        f"reprojection_threshold = {config.reprojection_threshold!r}",
        f"seed = {config.seed}",
    ]
    if out_dir is not None:
        lines += ["", "[output]", f"dir = {out_dir}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- run outputs

FLOAT_FMT = "%.17g"


def states_header(n):
    cols = ["t"]
    cols += [f"R{i}_{r}{c}" for i in range(1, n + 1) for r in range(1, 4) for c in range(1, 4)]
    cols += [f"w{i}_{a}" for i in range(1, n + 1) for a in "xyz"]
    return cols


def states_table(traj):
    S, n = traj.attitudes.shape[:2]
    return np.column_stack([traj.times, traj.attitudes.reshape(S, 9 * n), traj.velocities.reshape(S, 3 * n)])


def read_states_csv(path):
    """``(times, attitudes, velocities)`` from a ``states.csv`` file."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 1) // 12
    return data[:, 0], data[:, 1:1 + 9 * n].reshape(-1, n, 3, 3), data[:, 1 + 9 * n:].reshape(-1, n, 3)


def read_diagnostics_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return {k: data[:, c] for c, k in enumerate(header)}


def _write_csv(path, header, table):
    np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")


def write_outputs(out_dir, traj, summary):
    """Write ``states.csv``, ``diagnostics.csv`` and ``summary.json``.

    Everything is staged in a temporary directory beside ``out_dir`` and
    moved in only once all three files are complete.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir.parent, prefix=f".{out_dir.name}.") as tmp:
        tmp = Path(tmp)
        n = traj.attitudes.shape[1]
        _write_csv(tmp / "states.csv", states_header(n), states_table(traj))
        keys = ("t",) + traj.DIAGNOSTIC_KEYS
        diag = np.column_stack([traj.times] + [traj.diagnostics[k] for k in traj.DIAGNOSTIC_KEYS])
        _write_csv(tmp / "diagnostics.csv", keys, diag)
        (tmp / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        out_dir.mkdir(exist_ok=True)
        for name in ("states.csv", "diagnostics.csv", "summary.json"):
            os.replace(tmp / name, out_dir / name)


SUMMARY_KEYS = (
    "mode",
    "n_agents",
    "final_time",
    "samples",
    "terminal_sync_error",
    "terminal_max_omega_norm",
    "omega_c_estimate",
    "omega_c_max_deviation",
    "lyapunov_violations",
    "max_lyapunov_increase",
    "max_ortho_drift",
    "reprojections",
    "wall_time_s",
)


def summarize(traj, wall_time, lyapunov_slack=1e-8):
    w = traj.velocities[-1]
    mean = w.mean(axis=0)
    dV = np.diff(traj.diagnostics["V"])
    return {
        "mode": traj.mode,
        "n_agents": int(w.shape[0]),
        "final_time": float(traj.times[-1]),
        "samples": len(traj),
        "terminal_sync_error": float(traj.diagnostics["sync_error"][-1]),
        "terminal_max_omega_norm": float(np.linalg.norm(w, axis=1).max()),
        "omega_c_estimate": [float(x) for x in mean],
        "omega_c_max_deviation": float(np.linalg.norm(w - mean, axis=1).max()),
        "lyapunov_violations": int(np.sum(dV > lyapunov_slack)),
        "max_lyapunov_increase": float(dV.max()) if len(dV) else 0.0,
        "max_ortho_drift": float(traj.diagnostics["ortho_drift"].max()),
        "reprojections": int(traj.reprojections),
        "wall_time_s": float(wall_time),
    }
