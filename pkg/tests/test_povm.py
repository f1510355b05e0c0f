from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ancillaqpd import qcore
from ancillaqpd.povm import (
    MeasurementSet,
    MeasurementSetError,
    are_mutually_unbiased,
    build_povm,
    builtin_set,
    is_informationally_complete,
    sampling_decomposition,
)
from ancillaqpd.qmodel import csum_matrix, random_density_matrix

ALL_SETS = ("z", "zy", "zyx", "mub-d3", "mub-d4")


@pytest.mark.parametrize("name,alpha,size", [("z", 1, 2), ("zy", 2, 4), ("zyx", 3, 6),
                                             ("mub-d3", 4, 12), ("mub-d4", 5, 20)])
def test_builtin_alpha(name, alpha, size):
    ms = builtin_set(name)
    assert ms.alpha == alpha
    assert ms.size == size


def test_unknown_set():
    with pytest.raises(MeasurementSetError):
        builtin_set("zz")


def test_frame_condition_checked():
    with pytest.raises(MeasurementSetError):
        MeasurementSet((np.array([1, 0]), np.array([1, 0])), 1.0)


def test_from_kets_infers_alpha():
    s = 1 / np.sqrt(2)
    ms = MeasurementSet.from_kets([[1, 0], [0, 1], [s, s], [s, -s]])
    assert ms.alpha == pytest.approx(2.0)


def test_zy_plus_y_element():
    m = build_povm(builtin_set("zy")).elements[2]
    assert qcore.allclose(m, np.diag([1, -1j]) / 2, 1e-12)


def test_z_elements_are_projectors():
    els = build_povm(builtin_set("z")).elements
    assert qcore.allclose(els[0], np.diag([1, 0]))
    assert qcore.allclose(els[1], np.diag([0, 1]))


@pytest.mark.parametrize("name", ALL_SETS)
def test_completeness_and_diagonal(name, rng):
    povm = builtin_set(name).povm
    total = sum(m.conj().T @ m for m in povm.elements)
    assert qcore.max_abs(total - np.eye(povm.elements[0].shape[0])) < 1e-12
    for m in povm.elements:
        assert np.count_nonzero(m - np.diag(np.diag(m))) == 0
    for _ in range(100):
        rho = random_density_matrix(builtin_set(name).dim, rng).mat
        assert abs(povm.probabilities(rho).sum() - 1) < 1e-12


@pytest.mark.parametrize("name,expected", [("z", False), ("zy", False), ("zyx", True),
                                           ("mub-d3", True), ("mub-d4", True)])
def test_informational_completeness(name, expected):
    assert is_informationally_complete(builtin_set(name)) is expected


@given(st.permutations(range(6)), st.lists(st.floats(0.2, 5.0), min_size=6, max_size=6))
def test_ic_invariant_under_rescaling_and_permutation(perm, scales):
    kets = builtin_set("zyx").kets
    rows = np.array([qcore.outer(kets[p] * s).ravel() for p, s in zip(perm, scales)])
    # scaled kets no longer form a tight frame, so test the rank criterion directly
    assert np.linalg.matrix_rank(rows, tol=1e-9) == 4


def test_sampling_decomposition_bases():
    assert sampling_decomposition(builtin_set("zyx")) == [[0, 1], [2, 3], [4, 5]]
    assert len(sampling_decomposition(builtin_set("zy"))) == 2


def test_plus_y_on_ground_state():
    p = builtin_set("zy").povm.probabilities(np.diag([1, 0]))
    assert p[2] == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("name", ALL_SETS)
def test_sampling_decomposition_reproduces_povm(name, rng):
    ms = builtin_set(name)
    bases = sampling_decomposition(ms)
    for _ in range(20):
        rho = random_density_matrix(ms.dim, rng).mat
        direct = ms.povm.probabilities(rho)
        # couple to a fresh ancilla, pick a basis uniformly, project the ancilla
        u = csum_matrix(ms.dim)
        anc0 = np.zeros((ms.dim, ms.dim))
        anc0[0, 0] = 1
        joint = u @ np.kron(rho, anc0) @ u.conj().T
        via = np.zeros(ms.size)
        for basis in bases:
            for m in basis:
                proj = np.kron(np.eye(ms.dim), qcore.outer(ms.kets[m]))
                via[m] = np.real(np.trace(proj @ joint)) / len(bases)
        assert np.max(np.abs(direct - via)) < 1e-12


@pytest.mark.parametrize("name", ["zy", "zyx", "mub-d3", "mub-d4"])
def test_mutually_unbiased(name):
    assert are_mutually_unbiased(builtin_set(name))
