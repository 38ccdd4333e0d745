"""Relative states, Lyapunov functions, and equilibrium structure.

All quantities are defined per oriented edge ``k = (i -> j)``:
``Rbar_k = R_j R_i^T`` and ``wbar_k = R_i (w_j - w_i)``.  The potential is
``V = sum_k tr(A (I - Rbar_k))`` and its gradient stack is
``Psi = [psi(A Rbar_1); ...; psi(A Rbar_M)]``.

Functions taking stacked arrays broadcast over leading batch axes unless
they say otherwise; the dense ``bold_*`` matrices are single-state only and
exist mostly as independent oracles for the block implementations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .so3 import attitude_error, exp_so3, psi, rodrigues

PSI_TOL = 1e-9
ROT_TOL = 1e-6

IDENTITY = "identity"
NEITHER = "neither"


class NotAnEquilibriumError(ValueError):
    pass


class UnclassifiableEquilibriumError(ValueError):
    """``Psi`` vanishes but some edge is neither ``I`` nor a pi-rotation about an eigenvector of ``A``."""


def pi_label(beta):
    return f"pi-{beta}"


@dataclass(frozen=True)
class RelativeState:
    rbars: np.ndarray
    omega_bars: np.ndarray


def relative_state(R, w, topology):
    R = np.asarray(R, dtype=float)
    w = np.asarray(w, dtype=float)
    h, t = topology.heads, topology.tails
    Ri = R[..., h, :, :]
    rbars = R[..., t, :, :] @ np.swapaxes(Ri, -1, -2)
    omega_bars = np.einsum("...kij,...kj->...ki", Ri, w[..., t, :] - w[..., h, :])
    return RelativeState(rbars, omega_bars)


def relative_attitudes(R, topology):
    R = np.asarray(R, dtype=float)
    return R[..., topology.tails, :, :] @ np.swapaxes(R[..., topology.heads, :, :], -1, -2)


def psi_blocks(rbars, A):
    """``psi(A Rbar_k)`` for each edge, shape ``(..., M, 3)``."""
    return psi(np.asarray(A) @ rbars)


def psi_vector(rbars, A):
    """Stacked ``Psi`` of length ``3M``."""
    blocks = psi_blocks(rbars, A)
    return blocks.reshape(blocks.shape[:-2] + (-1,))


def bold_r(R):
    """Block diagonal ``diag(R_1, ..., R_N)``; single state only."""
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    out = np.zeros((3 * n, 3 * n))
    for i in range(n):
        out[3 * i:3 * i + 3, 3 * i:3 * i + 3] = R[i]
    return out


def bold_h(rbars, topology):
    """``3N x 3M`` matrix with block ``(i, k)`` = ``I`` (head), ``-Rbar_k`` (tail), else 0."""
    n, m = topology.n_agents, topology.n_edges
    out = np.zeros((3 * n, 3 * m))
    for k, (i, j) in enumerate(topology.edges):
        out[3 * i:3 * i + 3, 3 * k:3 * k + 3] = np.eye(3)
        out[3 * j:3 * j + 3, 3 * k:3 * k + 3] = -rbars[k]
    return out


def h_psi(rbars, psi_k, topology):
    """Block evaluation of ``bold_h @ Psi``, shape ``(..., N, 3)``."""
    tail_part = -np.einsum("...kij,...kj->...ki", rbars, psi_k)
    out = np.zeros(psi_k.shape[:-2] + (topology.n_agents, 3))
    # heads/tails can repeat (a node on several edges), so accumulate by incidence
    head_sel = (topology.incidence > 0).astype(float)
    tail_sel = (topology.incidence < 0).astype(float)
    out += np.einsum("nk,...kd->...nd", head_sel, psi_k)
    out += np.einsum("nk,...kd->...nd", tail_sel, tail_part)
    return out


def rt_h_psi(R, rbars, psi_k, topology):
    """``bold_R^T bold_H Psi`` per agent, shape ``(..., N, 3)``."""
    return np.einsum("...nji,...nj->...ni", R, h_psi(rbars, psi_k, topology))


def aggregate_control(R, topology, vs, gains):
    """Kinematic law in aggregate form ``k_R bold_R^T bold_H Psi``."""
    rbars = relative_attitudes(R, topology)
    return gains.k_R * rt_h_psi(R, rbars, psi_blocks(rbars, vs.gram), topology)


def edge_potentials(rbars, A):
    """``tr(A (I - Rbar_k))`` for each edge."""
    A = np.asarray(A)
    return np.trace(A) - np.einsum("ij,...kji->...k", A, rbars)


def lyapunov_kinematic(rbars, A):
    return edge_potentials(rbars, A).sum(axis=-1)


def kinetic(w, inertias, omega_c=None):
    w = np.asarray(w, dtype=float)
    if omega_c is not None:
        w = w - np.asarray(omega_c, dtype=float)
    return np.einsum("...ni,nij,...nj->...", w, inertias, w)


def lyapunov_dynamic(rbars, A, w, inertias, gains):
    return gains.k_R * lyapunov_kinematic(rbars, A) + kinetic(w, inertias)


def lyapunov_dynamic_flock(rbars, A, w, inertias, gains, omega_c):
    return gains.k_R * lyapunov_kinematic(rbars, A) + kinetic(w, inertias, omega_c)


def vdot_kinematic(R, rbars, psi_k, topology, gains):
    """Analytic ``dV/dt = -2 k_R ||bold_R^T bold_H Psi||^2`` under the kinematic law."""
    v = rt_h_psi(R, rbars, psi_k, topology)
    return -2.0 * gains.k_R * np.sum(v * v, axis=(-2, -1))


def vdot_dynamic(w, topology, gains):
    """Analytic ``-2 k_w ||w||^2 - 2 kbar_w ||(H^T x I) w||^2``; covers both dynamic modes."""
    w = np.asarray(w, dtype=float)
    dw = np.einsum("nk,...nd->...kd", topology.incidence, w)
    return -2.0 * gains.k_omega * np.sum(w * w, axis=(-2, -1)) - 2.0 * gains.k_omega_bar * np.sum(
        dw * dw, axis=(-2, -1)
    )


def sync_error(rbars):
    return np.max(attitude_error(rbars), axis=-1, initial=0.0)


def zero_sum_check(R, topology, vs):
    """``||(1 x I)^T bold_R^T bold_H Psi||``: the body-frame sum of the aggregate controls."""
    rbars = relative_attitudes(R, topology)
    v = rt_h_psi(R, rbars, psi_blocks(rbars, vs.gram), topology)
    return np.linalg.norm(v.sum(axis=-2), axis=-1)


def perturb(rbars, zeta, t=1.0):
    """``Rbar_k exp(t [zeta_k]x)`` for every edge; ``zeta`` has shape ``(M, 3)``."""
    return rbars @ exp_so3(t * np.asarray(zeta))


# ---------------------------------------------------------------- equilibria


def pi_rotations(vs):
    """``R(pi, u_b)`` for the three ascending eigenvectors of the Gram matrix."""
    return [rodrigues(np.pi, vs.eigenvectors[:, b]) for b in range(3)]


def label_edge(rbar, vs, rot_tol=ROT_TOL):
    if np.linalg.norm(rbar - np.eye(3)) <= rot_tol:
        return IDENTITY
    for b, P in enumerate(pi_rotations(vs)):
        if np.linalg.norm(rbar - P) <= rot_tol:
            return pi_label(b + 1)
    return NEITHER


def label_rotation(label, vs):
    if label == IDENTITY:
        return np.eye(3)
    return pi_rotations(vs)[int(label.split("-")[1]) - 1]


@dataclass(frozen=True)
class HessianBlocks:
    blocks: np.ndarray  # (M, 3, 3)
    eigenvalues: np.ndarray  # (M, 3) ascending per block
    classification: str


def _classify_spectrum(eigs, tol=1e-12):
    eigs = np.ravel(eigs)
    if np.all(eigs > tol):
        return "minimum"
    if np.all(eigs < -tol):
        return "maximum"
    return "saddle"


def hessian_blocks(rbars, A, psi_tol=PSI_TOL):
    """Closed-form Hessian blocks ``tr(A Rbar) I - A Rbar`` at an equilibrium.

    Raises :class:`NotAnEquilibriumError` if ``||Psi|| > psi_tol``.
    """
    rbars = np.asarray(rbars, dtype=float)
    A = np.asarray(A, dtype=float)
    norm = np.linalg.norm(psi_vector(rbars, A))
    if norm > psi_tol:
        raise NotAnEquilibriumError(f"||Psi|| = {norm:.3e} > {psi_tol:g}; Hessian blocks need a critical point")
    AR = A @ rbars
    tr = np.trace(AR, axis1=-2, axis2=-1)
    blocks = tr[:, None, None] * np.eye(3) - AR
    # AR is symmetric at a critical point; symmetrize away roundoff before eigvalsh
    eigs = np.linalg.eigvalsh(0.5 * (blocks + np.swapaxes(blocks, -1, -2)))
    return HessianBlocks(blocks, eigs, _classify_spectrum(eigs))


def hessian_blocks_fd(rbars, A, t=1e-4):
    """Hessian blocks from second differences of ``V`` along ``Rbar_k exp(s [zeta]x)``.

    The quadratic form ``q(z) = d^2/ds^2 V`` is sampled with central
    differences and polarized into a symmetric matrix per edge.
    """
    rbars = np.asarray(rbars, dtype=float)
    E = np.eye(3)

    def q(R, z):
        vp = edge_potentials((R @ exp_so3(t * z))[None], A)[0]
        vm = edge_potentials((R @ exp_so3(-t * z))[None], A)[0]
        v0 = edge_potentials(R[None], A)[0]
        return (vp + vm - 2.0 * v0) / t**2

    out = np.zeros((len(rbars), 3, 3))
    for k, R in enumerate(rbars):
        diag = [q(R, E[a]) for a in range(3)]
        for a in range(3):
            out[k, a, a] = diag[a]
            for b in range(a + 1, 3):
                out[k, a, b] = out[k, b, a] = 0.5 * (q(R, E[a] + E[b]) - diag[a] - diag[b])
    return out


def closed_form_spectrum(label, vs):
    """Eigenvalues of a Hessian block paired with ``(u_1, u_2, u_3)``, from the eigenpair formulas.

    Indices follow the ascending eigenvalue order of ``vs``.
    """
    l1, l2, l3 = vs.eigenvalues
    if label == IDENTITY:
        return np.array([l2 + l3, l1 + l3, l1 + l2])
    return {
        pi_label(1): np.array([-l2 - l3, l1 - l3, l1 - l2]),
        pi_label(2): np.array([l2 - l3, -l1 - l3, l2 - l1]),
        pi_label(3): np.array([l3 - l2, l3 - l1, -l1 - l2]),
    }[label]


@dataclass(frozen=True)
class EquilibriumReport:
    kind: str  # desired | undesired | none
    labels: tuple
    psi_norm: float
    hessian_block_eigenvalues: np.ndarray | None
    classification: str  # minimum | saddle | maximum | n/a


def classify_equilibrium(rbars, vs, psi_tol=PSI_TOL, rot_tol=ROT_TOL):
    rbars = np.asarray(rbars, dtype=float)
    norm = float(np.linalg.norm(psi_vector(rbars, vs.gram)))
    labels = tuple(label_edge(R, vs, rot_tol) for R in rbars)
    if norm > psi_tol:
        return EquilibriumReport("none", labels, norm, None, "n/a")
    if NEITHER in labels:
        raise UnclassifiableEquilibriumError(
            f"||Psi|| = {norm:.3e} but edges {[k + 1 for k, l in enumerate(labels) if l == NEITHER]} "
            "match neither I nor R(pi, u_b); check tolerances or the eigenstructure of A"
        )
    hb = hessian_blocks(rbars, vs.gram, psi_tol)
    kind = "desired" if all(l == IDENTITY for l in labels) else "undesired"
    return EquilibriumReport(kind, labels, norm, hb.eigenvalues, hb.classification)


def all_edge_labels():
    return (IDENTITY, pi_label(1), pi_label(2), pi_label(3))


def attitudes_from_relative(rbars, topology, root=0):
    """Agent attitudes realising the given relative attitudes, with agent ``root`` at ``I``."""
    n = topology.n_agents
    R = [None] * n
    R[root] = np.eye(3)
    pending = list(enumerate(topology.edges))
    while pending:
        rest = []
        for k, (i, j) in pending:
            if R[i] is not None:
                R[j] = rbars[k] @ R[i]
            elif R[j] is not None:
                R[i] = rbars[k].T @ R[j]
            else:
                rest.append((k, (i, j)))
        pending = rest
    return np.array(R)


def enumerate_equilibria(topology, vs):
    """Yield ``(labels, attitudes, report)`` for every per-edge label combination."""
    for labels in itertools.product(all_edge_labels(), repeat=topology.n_edges):
        rbars = np.array([label_rotation(l, vs) for l in labels])
        R = attitudes_from_relative(rbars, topology)
        report = classify_equilibrium(relative_attitudes(R, topology), vs)
        yield labels, R, report
