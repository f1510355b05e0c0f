from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ancillaqpd import qcore
from ancillaqpd.qmodel import CNOT, X, Z, random_unitary


def test_shape_errors():
    with pytest.raises(qcore.DimensionError):
        qcore.as_matrix(np.zeros(3))
    with pytest.raises(qcore.DimensionError):
        qcore.trace(np.zeros((2, 3)))
    with pytest.raises(qcore.DimensionError):
        qcore.compose(np.eye(2), np.eye(3))


def test_size_cap_leaves_room_for_superoperators():
    qcore.as_matrix(np.eye(qcore.MAX_DIM**2))
    with pytest.raises(qcore.DimensionError):
        qcore.as_matrix(np.eye(qcore.MAX_DIM**2 + 1))


def test_tensor_is_system_major():
    # first factor is the most significant index
    ket = qcore.tensor(np.array([[0], [1]]), np.array([[1], [0]]))
    assert ket[2, 0] == 1


def test_predicates():
    assert qcore.is_hermitian(Z)
    assert not qcore.is_hermitian(np.array([[0, 1], [0, 0]]))
    assert qcore.is_unitary(CNOT)
    assert qcore.is_psd(np.diag([1.0, 0.0]))
    assert not qcore.is_psd(np.diag([1.0, -1e-6]))


def test_phase_aligned_distance_ignores_global_phase(rng):
    u = random_unitary(3, rng)
    assert qcore.phase_aligned_distance(u, np.exp(0.7j) * u) < 1e-12
    assert qcore.phase_aligned_distance(X, Z) > 0.5


def test_partial_trace_of_product():
    a = np.diag([0.25, 0.75]).astype(complex)
    b = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    assert qcore.allclose(qcore.partial_trace_last(qcore.tensor(a, b), 2, 2), a, 1e-14)


def test_matrix_units_span():
    units = qcore.matrix_units(3)
    assert len(units) == 9
    assert qcore.allclose(sum(e for i, j, e in units if i == j), np.eye(3))


@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_adjoint_of_compose(d, seed):
    g = np.random.default_rng(seed)
    a, b = random_unitary(d, g), random_unitary(d, g)
    lhs = qcore.adjoint(qcore.compose(a, b))
    rhs = qcore.compose(qcore.adjoint(b), qcore.adjoint(a))
    assert qcore.allclose(lhs, rhs, 1e-12)
