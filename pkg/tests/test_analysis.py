import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attsync import analysis as an
from attsync.control import DYNAMIC_FLOCK, DYNAMIC_REST, Gains
from attsync.presets import INERTIA
from attsync.sim import SimConfig, _model, rk4_step_reference
from attsync.so3 import exp_so3, random_rotation, rodrigues
from attsync.topology import build_topology, path, reoriented
from attsync.verify import gradient_error, identity_errors, random_tree, random_vector_set
from conftest import E1, E2, E3


def by_axis(vs, axis):
    """Label of the pi-rotation about the eigenvector along ``axis``."""
    b = int(np.argmax(np.abs(vs.eigenvectors.T @ axis)))
    return an.pi_label(b + 1)


def test_relative_state_examples(rng):
    t = path(2)
    R = np.array([np.eye(3), rodrigues(np.pi / 2, E3)])
    rel = an.relative_state(R, np.zeros((2, 3)), t)
    assert np.allclose(rel.rbars[0], rodrigues(np.pi / 2, E3))
    Rs = np.broadcast_to(random_rotation(rng), (4, 3, 3))
    wc = np.broadcast_to([0.2, -0.4, 1.0], (4, 3))
    rel = an.relative_state(Rs, wc, path(4))
    assert np.allclose(rel.rbars, np.eye(3), atol=1e-15)
    assert np.allclose(rel.omega_bars, 0)


def test_psi_vector_examples(vs):
    assert np.array_equal(an.psi_vector(np.broadcast_to(np.eye(3), (3, 3, 3)), vs.gram), np.zeros(9))
    P = np.array(an.pi_rotations(vs))
    assert np.linalg.norm(an.psi_vector(P, vs.gram)) < 1e-15
    assert np.allclose(an.psi_vector(rodrigues(np.pi / 2, E3)[None], vs.gram), [0, 0, 0.5], atol=1e-15)


def test_bold_h_at_identity(rng):
    t = random_tree(5, rng)
    H = an.bold_h(np.broadcast_to(np.eye(3), (4, 3, 3)), t)
    assert np.array_equal(H, np.kron(t.incidence, np.eye(3)))


@given(st.integers(0, 2**32 - 1))
def test_block_forms_match_dense(seed):
    rng = np.random.default_rng(seed)
    t = random_tree(int(rng.integers(2, 8)), rng)
    vs = random_vector_set(rng)
    R = random_rotation(rng, t.n_agents)
    rb = an.relative_attitudes(R, t)
    pk = an.psi_blocks(rb, vs.gram)
    dense = an.bold_r(R).T @ an.bold_h(rb, t) @ an.psi_vector(rb, vs.gram)
    assert np.allclose(an.rt_h_psi(R, rb, pk, t).ravel(), dense, atol=1e-13)


def test_identity_suite(rng):
    for _ in range(200):
        t = random_tree(8, rng)
        vs = random_vector_set(rng)
        R = random_rotation(rng, 8)
        w = rng.uniform(-1, 1, (8, 3))
        assert max(identity_errors(R, w, t, vs, Gains(1.5))) < 1e-12


def test_zero_sum_examples(vs, rng):
    R = np.broadcast_to(random_rotation(rng), (3, 3, 3))
    assert an.zero_sum_check(R, path(3), vs) < 1e-15
    R2 = np.array([np.eye(3), rodrigues(np.pi / 2, E3)])
    assert np.linalg.norm(an.psi_vector(an.relative_attitudes(R2, path(2)), vs.gram)) > 0.1
    assert an.zero_sum_check(R2, path(2), vs) <= 1e-15


def test_lyapunov_examples(vs):
    I = np.eye(3)[None]
    assert an.lyapunov_kinematic(I, vs.gram) == 0
    assert np.isclose(an.lyapunov_kinematic(rodrigues(np.pi, E1)[None], vs.gram), 4.0, atol=1e-15)
    J = np.broadcast_to(INERTIA, (2, 3, 3))
    g = Gains(1.0, 1.0, 1.0)
    assert an.lyapunov_dynamic(I, vs.gram, np.zeros((2, 3)), J, g) == 0
    wc = np.array([0.3, 0.1, -0.2])
    assert an.lyapunov_dynamic_flock(I, vs.gram, np.array([wc, wc]), J, g, wc) == 0


def test_lyapunov_offset_at_pi_equilibria(vs):
    # tr(A (I - R(pi, u))) = 2 (sum of the other two eigenvalues)
    lam = vs.eigenvalues
    for b, P in enumerate(an.pi_rotations(vs)):
        assert np.isclose(an.lyapunov_kinematic(P[None], vs.gram), 2 * (lam.sum() - lam[b]))


def test_sync_error_examples():
    assert an.sync_error(np.eye(3)[None]) == 0
    assert np.isclose(an.sync_error(np.array([np.eye(3), rodrigues(np.pi, E2)])), 1.0)
    assert np.isclose(an.sync_error(rodrigues(np.pi / 2, E3)[None]), 0.5)


def test_gradient_one_sided(rng):
    # (V(x exp(t z)) - V(x)) / t -> 2 z . Psi
    for _ in range(100):
        vs = random_vector_set(rng)
        rb = random_rotation(rng, 7)
        z = rng.standard_normal((7, 3))
        z /= np.linalg.norm(z)
        t = 1e-6
        fd = (an.lyapunov_kinematic(an.perturb(rb, z, t), vs.gram) - an.lyapunov_kinematic(rb, vs.gram)) / t
        assert abs(fd - 2 * np.sum(z * an.psi_blocks(rb, vs.gram))) < 1e-5


def test_gradient_central_relative(rng):
    errs = [gradient_error(random_rotation(rng, 7), random_vector_set(rng).gram, rng.standard_normal((7, 3)))
            for _ in range(100)]
    assert max(errs) < 1e-4


def test_vdot_kinematic_matches_flow(rng):
    t = random_tree(6, rng)
    vs = random_vector_set(rng)
    g = Gains(1.3)
    cfg = SimConfig(t, vs, g, np.eye(3))
    f = _model(cfg)
    for _ in range(20):
        R = random_rotation(rng, 6)
        h = 1e-5
        Rp, _ = rk4_step_reference(f, R, None, h)
        Rm, _ = rk4_step_reference(f, R, None, -h)
        V = lambda X: an.lyapunov_kinematic(an.relative_attitudes(X, t), vs.gram)
        fd = (V(Rp) - V(Rm)) / (2 * h)
        rb = an.relative_attitudes(R, t)
        exact = an.vdot_kinematic(R, rb, an.psi_blocks(rb, vs.gram), t, g)
        assert exact <= 0
        assert np.isclose(fd, exact, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("mode, gains", [(DYNAMIC_REST, Gains(1.0, 0.7, 1.2)), (DYNAMIC_FLOCK, Gains(0.8, 0.0, 1.5))])
def test_vdot_dynamic_matches_flow(rng, mode, gains):
    t = random_tree(5, rng)
    vs = random_vector_set(rng)
    J = np.broadcast_to(INERTIA, (5, 3, 3)).copy()
    cfg = SimConfig(t, vs, gains, J, mode)
    f = _model(cfg)
    for _ in range(10):
        R = random_rotation(rng, 5)
        w = rng.uniform(-1, 1, (5, 3))
        wc = rng.standard_normal(3) if mode == DYNAMIC_FLOCK else None

        def V(X, W):
            rb = an.relative_attitudes(X, t)
            if mode == DYNAMIC_REST:
                return an.lyapunov_dynamic(rb, vs.gram, W, J, gains)
            return an.lyapunov_dynamic_flock(rb, vs.gram, W, J, gains, wc)

        h = 1e-6
        fd = (V(*rk4_step_reference(f, R, w, h)) - V(*rk4_step_reference(f, R, w, -h))) / (2 * h)
        exact = an.vdot_dynamic(w, t, gains)
        assert np.isclose(fd, exact, rtol=1e-5)


def test_hessian_spectra(vs):
    expected = {
        an.IDENTITY: {1.0, 2.0, 3.0},
        by_axis(vs, E1): {-2.0, -1.0, 1.0},
        by_axis(vs, E2): {-3.0, -2.0, -1.0},
        by_axis(vs, E3): {-1.0, 1.0, 2.0},
    }
    for label, want in expected.items():
        hb = an.hessian_blocks(an.label_rotation(label, vs)[None], vs.gram)
        assert np.allclose(np.sort(hb.eigenvalues[0]), sorted(want), atol=1e-10)
        assert np.allclose(np.sort(an.closed_form_spectrum(label, vs)), sorted(want), atol=1e-10)
    assert an.hessian_blocks(np.eye(3)[None], vs.gram).classification == "minimum"
    assert an.hessian_blocks(an.label_rotation(by_axis(vs, E2), vs)[None], vs.gram).classification == "maximum"
    assert an.hessian_blocks(an.label_rotation(by_axis(vs, E1), vs)[None], vs.gram).classification == "saddle"


@given(st.integers(0, 2**32 - 1))
def test_closed_form_eigenpairs(seed):
    vs = random_vector_set(np.random.default_rng(seed))
    for label in an.all_edge_labels():
        hb = an.hessian_blocks(an.label_rotation(label, vs)[None], vs.gram)
        lam = an.closed_form_spectrum(label, vs)
        # each u_b is an eigenvector with the paired closed-form eigenvalue
        for b in range(3):
            u = vs.eigenvectors[:, b]
            assert np.allclose(hb.blocks[0] @ u, lam[b] * u, atol=1e-10)
        fd = an.hessian_blocks_fd(an.label_rotation(label, vs)[None], vs.gram)
        assert np.allclose(fd, hb.blocks, atol=1e-4 * max(1.0, np.abs(lam).max()))


def test_undesired_always_have_a_descent_direction(rng):
    for _ in range(50):
        vs = random_vector_set(rng)
        for label in an.all_edge_labels()[1:]:
            e = an.hessian_blocks(an.label_rotation(label, vs)[None], vs.gram).eigenvalues
            assert e.min() < 0


def test_hessian_requires_equilibrium(vs):
    with pytest.raises(an.NotAnEquilibriumError):
        an.hessian_blocks(rodrigues(0.3, E3)[None], vs.gram)


def test_classify_examples(vs, rng):
    assert an.classify_equilibrium(np.broadcast_to(np.eye(3), (2, 3, 3)), vs).kind == "desired"
    lab = by_axis(vs, E2)
    rb = np.array([np.eye(3), rodrigues(np.pi, E2)])
    rep = an.classify_equilibrium(rb, vs)
    assert rep.kind == "undesired"
    assert rep.labels == (an.IDENTITY, lab)
    assert rep.psi_norm < 1e-12
    rep = an.classify_equilibrium(random_rotation(rng, 3), vs)
    assert rep.kind == "none" and rep.psi_norm > an.PSI_TOL


def test_classify_rejects_unlabelled_critical_point(vs):
    # pi rotation about a non-eigen axis is not critical; loose psi tolerance forces the check
    rb = rodrigues(np.pi, np.array([1.0, 1.0, 0.0]) / np.sqrt(2))[None]
    with pytest.raises(an.UnclassifiableEquilibriumError):
        an.classify_equilibrium(rb, vs, psi_tol=10.0)


def test_enumeration_two_edges(vs):
    rows = list(an.enumerate_equilibria(path(3), vs))
    assert len(rows) == 16
    kinds = [r.kind for _, _, r in rows]
    assert kinds.count("desired") == 1 and kinds.count("undesired") == 15
    for labels, R, rep in rows:
        assert rep.labels == labels
        assert np.allclose(R[0], np.eye(3))


def test_attitudes_from_relative_roundtrip(rng):
    t = build_topology(5, [(2, 1), (2, 3), (4, 3), (3, 5)])
    rb = random_rotation(rng, 4)
    R = an.attitudes_from_relative(rb, t)
    assert np.allclose(an.relative_attitudes(R, t), rb, atol=1e-13)


def test_reorientation_invariance(rng):
    t = random_tree(6, rng)
    vs = random_vector_set(rng)
    R = random_rotation(rng, 6)
    V = an.lyapunov_kinematic(an.relative_attitudes(R, t), vs.gram)
    u = reoriented(t, 3)
    assert np.isclose(an.lyapunov_kinematic(an.relative_attitudes(R, u), vs.gram), V, rtol=1e-13)
    assert np.allclose(an.aggregate_control(R, t, vs, Gains()), an.aggregate_control(R, u, vs, Gains()), atol=1e-13)


def test_perturb(rng):
    rb = random_rotation(rng, 3)
    z = rng.standard_normal((3, 3))
    assert np.allclose(an.perturb(rb, z, 0.5), rb @ exp_so3(0.5 * z))
