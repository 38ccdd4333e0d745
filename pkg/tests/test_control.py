import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attsync import analysis as an
from attsync.control import (
    DYNAMIC_FLOCK,
    DYNAMIC_REST,
    KINEMATIC,
    GainModeError,
    Gains,
    check_inertia,
    dynamic_torque,
    kinematic_control,
    network_kinematic_control,
    network_torque,
)
from attsync.measurements import measure
from attsync.presets import INERTIA
from attsync.so3 import psi, random_rotation, rodrigues
from attsync.topology import neighbors, path
from attsync.verify import random_tree, random_vector_set
from conftest import E3


def local_controls(R, topo, vs, gains):
    """Per-agent evaluation from body measurements only."""
    b = measure(vs, R)
    return np.array([
        kinematic_control(gains, b[i - 1], [b[j - 1] for j in sorted(neighbors(topo, i))], vs.weights)
        for i in range(1, topo.n_agents + 1)
    ])


def two_agents():
    return np.array([np.eye(3), rodrigues(np.pi / 2, E3)])


def test_synchronized_gives_zero(vs, rng):
    R = np.broadcast_to(random_rotation(rng), (5, 3, 3))
    assert np.allclose(network_kinematic_control(R, path(5), vs, Gains()), 0, atol=1e-15)


def test_two_agent_example(vs):
    R = two_agents()
    b = measure(vs, R)
    w1 = kinematic_control(Gains(1.0), b[0], [b[1]], vs.weights)
    assert np.allclose(w1, [0, 0, 0.5], atol=1e-15)
    rbar = R[1] @ R[0].T
    assert np.allclose(w1, R[0].T @ psi(vs.gram @ rbar), atol=1e-12)
    w = network_kinematic_control(R, path(2), vs, Gains(1.0))
    assert np.allclose(w[0], w1, atol=1e-15)
    # tail block of bold H is -rbar, and R_2^T rbar = R_1^T
    assert np.allclose(w[1], -R[0].T @ psi(vs.gram @ rbar), atol=1e-12)


def test_measurement_count_mismatch(vs):
    b = measure(vs, np.eye(3))
    with pytest.raises(ValueError, match="mismatch"):
        kinematic_control(Gains(), b, [b[:1]], vs.weights)


def test_torque_examples(vs):
    J = INERTIA
    b = measure(vs, np.eye(3))
    g = Gains(1.0, 1.0, 1.0)
    assert np.array_equal(dynamic_torque(g, J, np.zeros(3), [np.zeros(3)], b, [b], vs.weights), np.zeros(3))
    wc = np.array([0.3, -0.2, 0.5])
    tau = dynamic_torque(Gains(1.0, 0.0, 1.0), J, wc, [wc, wc], b, [b, b], vs.weights)
    assert np.allclose(tau, np.cross(wc, J @ wc), atol=1e-15)
    R = two_agents()
    bb = measure(vs, R)
    tau = dynamic_torque(g, J, np.zeros(3), [np.zeros(3)], bb[0], [bb[1]], vs.weights)
    assert np.allclose(tau, [0, 0, 0.5], atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_network_matches_local_evaluation(seed):
    rng = np.random.default_rng(seed)
    topo = random_tree(int(rng.integers(2, 9)), rng)
    vs = random_vector_set(rng)
    g = Gains(float(rng.uniform(0.1, 3)), float(rng.uniform(0, 2)), float(rng.uniform(0, 2)))
    R = random_rotation(rng, topo.n_agents)
    w = rng.uniform(-1, 1, (topo.n_agents, 3))
    J = np.broadcast_to(INERTIA, (topo.n_agents, 3, 3))
    assert np.allclose(network_kinematic_control(R, topo, vs, g), local_controls(R, topo, vs, g), atol=1e-13)
    b = measure(vs, R)
    tau = np.array([
        dynamic_torque(g, J[i - 1], w[i - 1], [w[j - 1] for j in neighbors(topo, i)],
                       b[i - 1], [b[j - 1] for j in neighbors(topo, i)], vs.weights)
        for i in range(1, topo.n_agents + 1)
    ])
    assert np.allclose(network_torque(R, w, topo, vs, g, J), tau, atol=1e-13)


def test_aggregate_equivalence(rng):
    for _ in range(200):
        topo = random_tree(8, rng)
        vs = random_vector_set(rng)
        g = Gains(float(rng.uniform(0.1, 3)))
        R = random_rotation(rng, 8)
        agg = an.aggregate_control(R, topo, vs, g)
        assert np.max(np.abs(local_controls(R, topo, vs, g) - agg)) < 1e-12


def test_body_frame_sum_vanishes(rng):
    for _ in range(200):
        topo = random_tree(8, rng)
        vs = random_vector_set(rng)
        R = random_rotation(rng, 8)
        assert np.linalg.norm(network_kinematic_control(R, topo, vs, Gains(2.0)).sum(axis=0)) < 1e-12


def test_inertial_frame_sum_does_not_vanish(vs, rng):
    # the vanishing sum is over body-frame commands; mapped to the inertial frame it is not zero
    R = random_rotation(rng, 2)
    w = network_kinematic_control(R, path(2), vs, Gains())
    assert np.linalg.norm(np.einsum("nij,nj->i", R, w)) > 0.1


def test_frame_invariance(rng):
    topo = random_tree(6, rng)
    vs = random_vector_set(rng)
    R = random_rotation(rng, 6)
    Q = random_rotation(rng)
    rotated = type(vs)(vs.vectors @ Q.T, vs.weights, Q @ vs.gram @ Q.T, vs.eigenvalues, Q @ vs.eigenvectors)
    a = network_kinematic_control(R, topo, vs, Gains())
    b = network_kinematic_control(Q @ R, topo, rotated, Gains())
    assert np.allclose(a, b, atol=1e-14)


def test_control_depends_only_on_measurements(rng, vs):
    # two different attitude sets with the same body measurements produce the same command bit for bit
    topo = path(3)
    R = random_rotation(rng, 3)
    b = measure(vs, R)
    w = local_controls(R, topo, vs, Gains())
    w2 = np.array([kinematic_control(Gains(), b[i], [b[j - 1] for j in sorted(neighbors(topo, i + 1))], vs.weights)
                   for i in range(3)])
    assert np.array_equal(w, w2)


def test_gain_mode_rules():
    Gains(1.0).check(KINEMATIC)
    Gains(1.0, 1.0, 0.0).check(DYNAMIC_REST)
    Gains(1.0, 0.0, 1.0).check(DYNAMIC_FLOCK)
    with pytest.raises(GainModeError):
        Gains(0.0).check(KINEMATIC)
    with pytest.raises(GainModeError):
        Gains(1.0, 0.0, 1.0).check(DYNAMIC_REST)
    with pytest.raises(GainModeError):
        Gains(1.0, 1.0, 1.0).check(DYNAMIC_FLOCK)
    with pytest.raises(GainModeError):
        Gains(1.0, 0.0, 0.0).check(DYNAMIC_FLOCK)
    with pytest.raises(GainModeError):
        Gains(1.0, -1.0, 0.0).check(KINEMATIC)


def test_inertia_checks():
    check_inertia(INERTIA)
    with pytest.raises(ValueError):
        check_inertia(np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(ValueError):
        check_inertia(np.diag([1.0, 0.0, 1.0]))
