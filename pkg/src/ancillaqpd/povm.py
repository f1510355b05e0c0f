"""Ancilla measurement sets and the diagonal POVMs they induce.

A measurement set is a list of ancilla kets ``|phi_m>`` with
``sum_m |phi_m><phi_m| = alpha * I``. Coupling the system to a fresh ancilla
through CSUM and projecting the ancilla onto ``|phi_m>`` realizes

    M_m = sum_i <phi_m|i> / sqrt(alpha) |i><i|

on the system. Outcome index ``m`` is the position of the ket in the set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from . import qcore
from .qcore import CMatrix, DEFAULT_TOL
from .qmodel import PAULIS

RANK_TOL = 1e-9

BUILTIN_SETS = ("z", "zy", "zyx", "mub-d3", "mub-d4")


class MeasurementSetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    kets: tuple[np.ndarray, ...]
    alpha: float
    name: str = ""

    def __post_init__(self):
        kets = tuple(qcore.frozen(qcore.as_vector(k)) for k in self.kets)
        if not kets:
            raise MeasurementSetError("measurement set is empty")
        d = kets[0].shape[0]
        if any(k.shape != (d,) for k in kets):
            raise MeasurementSetError("kets have different dimensions")
        if len(kets) < d:
            raise MeasurementSetError(f"need at least {d} kets, got {len(kets)}")
        frame = sum(qcore.outer(k) for k in kets)
        if self.alpha <= 0 or qcore.max_abs(frame - self.alpha * np.eye(d)) > DEFAULT_TOL:
            raise MeasurementSetError("sum of |phi><phi| is not alpha times the identity")
        object.__setattr__(self, "kets", kets)
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def from_kets(cls, kets, name: str = "") -> MeasurementSet:
        """Infer ``alpha`` from the frame operator."""
        ks = [qcore.as_vector(k) for k in kets]
        if not ks:
            raise MeasurementSetError("measurement set is empty")
        alpha = float(np.trace(sum(qcore.outer(k) for k in ks)).real / ks[0].shape[0])
        return cls(tuple(ks), alpha, name)

    @property
    def dim(self) -> int:
        return self.kets[0].shape[0]

    @property
    def size(self) -> int:
        return len(self.kets)

    @property
    def is_projective(self) -> bool:
        """A single orthonormal basis (a plain projective measurement)."""
        return self.size == self.dim and abs(self.alpha - 1.0) <= DEFAULT_TOL

    @cached_property
    def povm(self) -> Povm:
        return build_povm(self)


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple[CMatrix, ...]
    set: MeasurementSet

    def __len__(self):
        return len(self.elements)

    def probabilities(self, rho: ArrayLike) -> np.ndarray:
        r = qcore.as_matrix(rho)
        return np.array([np.trace(m.conj().T @ m @ r).real for m in self.elements])


def _ket(*amps) -> np.ndarray:
    return np.asarray(amps, dtype=np.complex128)


def _mub_d3() -> list[np.ndarray]:
    d = 3
    w = np.exp(2j * np.pi / d)
    kets = list(np.eye(d, dtype=np.complex128))
    for b in range(d):
        for k in range(d):
            kets.append(np.array([w ** (b * j * j + k * j) for j in range(d)]) / np.sqrt(d))
    return kets


def _mub_d4() -> list[np.ndarray]:
    # Five classes of three commuting two-qubit Paulis; each class has a unique
    # common eigenbasis and the five bases are mutually unbiased.
    classes = [
        ("IZ", "ZI"),
        ("IX", "XI"),
        ("IY", "YI"),
        ("XY", "YZ"),
        ("XZ", "YX"),
    ]
    kets = []
    for a, b in classes:
        pa = np.kron(PAULIS[a[0]], PAULIS[a[1]])
        pb = np.kron(PAULIS[b[0]], PAULIS[b[1]])
        _, vecs = np.linalg.eigh(pa + 2.0 * pb)
        for v in vecs.T:
            # Fix the global phase so the first sizeable amplitude is real positive.
            lead = v[np.argmax(np.abs(v) > 1e-8)]
            kets.append(v * abs(lead) / lead)
    return kets


def builtin_set(name: str) -> MeasurementSet:
    s = 1 / np.sqrt(2)
    zero, one = _ket(1, 0), _ket(0, 1)
    plus_y, minus_y = _ket(s, 1j * s), _ket(s, -1j * s)
    plus_x, minus_x = _ket(s, s), _ket(s, -s)
    if name == "z":
        return MeasurementSet((zero, one), 1.0, name)
    if name == "zy":
        return MeasurementSet((zero, one, plus_y, minus_y), 2.0, name)
    if name == "zyx":
        return MeasurementSet((zero, one, plus_y, minus_y, plus_x, minus_x), 3.0, name)
    if name == "mub-d3":
        return MeasurementSet(tuple(_mub_d3()), 4.0, name)
    if name == "mub-d4":
        return MeasurementSet(tuple(_mub_d4()), 5.0, name)
    if name.startswith("z-d") and name[3:].isdigit():
        d = int(name[3:])
        return MeasurementSet(tuple(np.eye(d, dtype=np.complex128)), 1.0, name)
    raise MeasurementSetError(f"unknown measurement set {name!r}")


def build_povm(ms: MeasurementSet) -> Povm:
    """``M_m = diag(<phi_m|i> / sqrt(alpha))``."""
    scale = 1.0 / np.sqrt(ms.alpha)
    elements = tuple(np.diag(k.conj() * scale) for k in ms.kets)
    total = sum(m.conj().T @ m for m in elements)
    if qcore.max_abs(total - np.eye(ms.dim)) > DEFAULT_TOL:
        raise MeasurementSetError("POVM completeness violated")
    return Povm(elements, ms)


def is_informationally_complete(ms: MeasurementSet) -> bool:
    """Whether the outer products ``|phi_m><phi_m|`` span all d x d operators."""
    rows = np.array([qcore.outer(k).ravel() for k in ms.kets])
    if rows.shape[0] < ms.dim**2:
        return False
    sv = np.linalg.svd(rows, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * max(1.0, sv[0])))
    return rank == ms.dim**2


def sampling_decomposition(ms: MeasurementSet) -> list[list[int]]:
    """Partition the kets into orthonormal bases, returned as lists of outcome indices.

    Choosing one basis uniformly (probability ``1/alpha``) and projecting onto it
    reproduces the POVM statistics.
    """
    d = ms.dim
    if any(abs(np.linalg.norm(k) - 1.0) > DEFAULT_TOL for k in ms.kets):
        raise MeasurementSetError("kets are not normalized; sample the POVM directly")
    unassigned = list(range(ms.size))
    bases: list[list[int]] = []
    while unassigned:
        basis = [unassigned.pop(0)]
        for m in list(unassigned):
            if len(basis) == d:
                break
            if all(abs(np.vdot(ms.kets[b], ms.kets[m])) <= DEFAULT_TOL for b in basis):
                basis.append(m)
                unassigned.remove(m)
        if len(basis) != d:
            raise MeasurementSetError("kets do not partition into orthonormal bases")
        bases.append(basis)
    if abs(len(bases) - ms.alpha) > DEFAULT_TOL:
        raise MeasurementSetError("basis count does not match alpha")
    return bases


def are_mutually_unbiased(ms: MeasurementSet, tol: float = 1e-9) -> bool:
    bases = sampling_decomposition(ms)
    target = 1.0 / ms.dim
    for ba, bb in itertools.combinations(bases, 2):
        for i, j in itertools.product(ba, bb):
            if abs(abs(np.vdot(ms.kets[i], ms.kets[j])) ** 2 - target) > tol:
                return False
    return True
