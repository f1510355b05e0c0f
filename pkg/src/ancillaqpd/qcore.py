"""Dense complex linear algebra helpers for small operators (d <= 16).

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Tensor products
use the big-endian convention: the left factor is the most significant index,
so ``tensor(system_op, ancilla_op)`` acts on ``|s, a> = |s> (x) |a>`` with
flat index ``s * d_anc + a``.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
from numpy.typing import ArrayLike, NDArray

MAX_DIM = 16
DEFAULT_TOL = 1e-10

CMatrix = NDArray[np.complex128]
CVector = NDArray[np.complex128]


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(a: ArrayLike) -> CMatrix:
    """Coerce ``a`` to a 2-D complex matrix and enforce the size cap."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if max(m.shape) > MAX_DIM * MAX_DIM:
        raise DimensionError(f"matrix shape {m.shape} exceeds the supported size")
    return m


def as_vector(v: ArrayLike) -> CVector:
    x = np.asarray(v, dtype=np.complex128)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def frozen(a: ArrayLike) -> NDArray:
    """Return a read-only copy of ``a``."""
    out = np.array(a, dtype=np.complex128, copy=True)
    out.flags.writeable = False
    return out


def compose(a: ArrayLike, b: ArrayLike) -> CMatrix:
    """Matrix product ``a @ b``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot compose {a.shape} with {b.shape}")
    return a @ b


def adjoint(a: ArrayLike) -> CMatrix:
    return as_matrix(a).conj().T


def trace(a: ArrayLike) -> complex:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"trace of non-square matrix {a.shape}")
    return complex(np.trace(a))


def tensor(*ops: ArrayLike) -> CMatrix:
    """Kronecker product, left factor most significant."""
    if not ops:
        raise ValueError("tensor() needs at least one operand")
    return reduce(np.kron, (as_matrix(o) for o in ops))


def outer(ket: ArrayLike, bra: ArrayLike | None = None) -> CMatrix:
    """``|ket><bra|``; ``bra`` defaults to ``ket``."""
    k = as_vector(ket)
    b = k if bra is None else as_vector(bra)
    return np.outer(k, b.conj())


def max_abs(a: ArrayLike) -> float:
    """Entrywise max-norm."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_square(a: ArrayLike) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1]


def is_hermitian(a: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    return is_square(a) and max_abs(a - a.conj().T) <= tol


def is_unitary(a: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    a = as_matrix(a)
    if not is_square(a):
        return False
    return max_abs(a.conj().T @ a - np.eye(a.shape[0])) <= tol


def is_psd(a: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    """Hermitian with smallest eigenvalue >= -tol."""
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        return False
    herm = 0.5 * (a + a.conj().T)
    return bool(np.linalg.eigvalsh(herm).min() >= -tol)


def allclose(a: ArrayLike, b: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and max_abs(a - b) <= tol


def phase_aligned_distance(u: ArrayLike, v: ArrayLike) -> float:
    """Max-norm distance between ``u`` and ``v`` after removing a global phase.

    The phase is taken from ``Tr[v^dagger u]``, which is optimal in the
    Frobenius sense.
    """
    u, v = as_matrix(u), as_matrix(v)
    if u.shape != v.shape:
        raise DimensionError(f"shape mismatch {u.shape} vs {v.shape}")
    overlap = np.trace(v.conj().T @ u)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return max_abs(u - phase * v)


def partial_trace_last(rho: ArrayLike, d_first: int, d_last: int) -> CMatrix:
    """Trace out the second (least significant) tensor factor."""
    r = as_matrix(rho).reshape(d_first, d_last, d_first, d_last)
    return np.einsum("ikjk->ij", r)


def matrix_units(d: int) -> list[tuple[int, int, CMatrix]]:
    """All ``|i><j|`` for ``i, j < d``."""
    units = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = 1.0
            units.append((i, j, e))
    return units
