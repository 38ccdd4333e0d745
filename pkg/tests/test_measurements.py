import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attsync.measurements import (
    CollinearVectorsError,
    MeasurementAssumptionError,
    RepeatedEigenvalueError,
    build_vector_set,
    measure,
)
from attsync.so3 import random_rotation, rodrigues
from attsync.verify import random_vector_set
from conftest import E1, E3


def test_reference_set(vs):
    assert np.array_equal(vs.gram, np.diag([1.0, 0, 2]))
    assert np.allclose(vs.eigenvalues, [0, 1, 2], atol=1e-15)
    # ascending order puts e2, e1, e3 in the columns, all with a positive dominant entry
    assert np.allclose(vs.eigenvectors, np.eye(3)[:, [1, 0, 2]], atol=1e-15)


def test_collinear_rejected():
    with pytest.raises(CollinearVectorsError):
        build_vector_set([E1, E1], [1, 1])
    with pytest.raises(CollinearVectorsError):
        build_vector_set([E1, -E1], [1, 2])


def test_repeated_eigenvalue_rejected():
    with pytest.raises(RepeatedEigenvalueError, match="distinct"):
        build_vector_set([[1, 0, 0], [0, 1, 0]], [1, 1])


@pytest.mark.parametrize(
    "vectors, weights",
    [([E1], [1.0]), ([E1, [0, 2.0, 0]], [1, 1]), ([E1, E3], [1, -1]), ([E1, E3], [1])],
)
def test_malformed_sets(vectors, weights):
    with pytest.raises((MeasurementAssumptionError, ValueError)):
        build_vector_set(vectors, weights)


def test_measure_examples(vs):
    assert np.allclose(measure(vs, np.eye(3)), vs.vectors)
    b = measure(build_vector_set([E1, E3], [1, 2]), rodrigues(np.pi / 2, E3))
    assert np.allclose(b[0], [0, -1, 0], atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_gram_from_eigenpairs(seed):
    vs = random_vector_set(np.random.default_rng(seed))
    rebuilt = sum(lam * np.outer(u, u) for lam, u in vs.eigenpairs())
    assert np.allclose(rebuilt, vs.gram, atol=1e-12)
    assert np.allclose(vs.eigenvectors.T @ vs.eigenvectors, np.eye(3), atol=1e-12)
    dom = vs.eigenvectors[np.argmax(np.abs(vs.eigenvectors), axis=0), range(3)]
    assert np.all(dom > 0)


@given(st.integers(0, 2**32 - 1))
def test_measurement_roundtrip(seed):
    rng = np.random.default_rng(seed)
    vs = random_vector_set(rng)
    R = random_rotation(rng, 5)
    b = measure(vs, R)
    assert np.allclose(np.linalg.norm(b, axis=-1), 1.0, atol=1e-12)
    assert np.allclose(np.einsum("nij,nlj->nli", R, b), vs.vectors, atol=1e-12)
