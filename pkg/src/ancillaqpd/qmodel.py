"""Quantum objects: states, observables, channels and named gates.

Rotation convention::

    R(theta, phi) = [[cos(theta/2),               -i e^{-i phi} sin(theta/2)],
                     [-i e^{i phi} sin(theta/2),   cos(theta/2)             ]]

so ``R(theta, 0) = exp(-i theta X / 2)`` and ``R(theta, pi/2) = exp(-i theta Y / 2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike

from . import qcore
from .qcore import CMatrix, DEFAULT_TOL, DimensionError

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

DEGENERACY_TOL = 1e-9


class InvariantError(ValueError):
    """A quantum object failed one of its defining invariants."""


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityMatrix:
    mat: CMatrix

    def __post_init__(self):
        m = qcore.as_matrix(self.mat)
        if not qcore.is_square(m):
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        if not qcore.is_hermitian(m, DEFAULT_TOL):
            raise InvariantError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > DEFAULT_TOL:
            raise InvariantError(f"density matrix trace is {np.trace(m).real:.3g}, not 1")
        if not qcore.is_psd(m, DEFAULT_TOL):
            raise InvariantError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "mat", qcore.frozen(m))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_ket(cls, ket: ArrayLike) -> DensityMatrix:
        k = qcore.as_vector(ket)
        k = k / np.linalg.norm(k)
        return cls(qcore.outer(k))

    @classmethod
    def named(cls, name: str, dim: int = 2) -> DensityMatrix:
        """``plus``, ``zero`` or ``maximally_mixed``."""
        if name == "zero":
            ket = np.zeros(dim)
            ket[0] = 1.0
            return cls.from_ket(ket)
        if name == "plus":
            # built entrywise so that |+><+| is exactly 1/d everywhere
            return cls(np.full((dim, dim), 1.0 / dim))
        if name == "maximally_mixed":
            return cls(np.eye(dim) / dim)
        raise ValueError(f"unknown state name {name!r}")


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed random state (full rank unless ``rank`` is given)."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def random_unitary(dim: int, rng: np.random.Generator) -> CMatrix:
    """Haar-random unitary via QR with phase fix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """Hermitian operator with its spectral decomposition ``sum_i a_i P_i``.

    Projector order is meaningful: QPD indices refer to it.
    """

    mat: CMatrix
    eigenvalues: tuple[float, ...]
    projectors: tuple[CMatrix, ...]
    name: str = ""

    def __post_init__(self):
        m = qcore.as_matrix(self.mat)
        if not qcore.is_hermitian(m, DEFAULT_TOL):
            raise InvariantError("observable is not Hermitian")
        if len(self.eigenvalues) != len(self.projectors):
            raise InvariantError("eigenvalue and projector counts differ")
        projs = tuple(qcore.frozen(p) for p in self.projectors)
        d = m.shape[0]
        recon = sum(a * p for a, p in zip(self.eigenvalues, projs))
        if qcore.max_abs(recon - m) > DEFAULT_TOL:
            raise InvariantError("spectral data does not reproduce the matrix")
        if qcore.max_abs(sum(projs) - np.eye(d)) > DEFAULT_TOL:
            raise InvariantError("projectors do not resolve the identity")
        for (i, p), (j, q) in itertools.product(enumerate(projs), repeat=2):
            target = p if i == j else np.zeros_like(p)
            if qcore.max_abs(p @ q - target) > DEFAULT_TOL:
                raise InvariantError("projectors are not mutually orthogonal")
        object.__setattr__(self, "mat", qcore.frozen(m))
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "eigenvalues", tuple(float(a) for a in self.eigenvalues))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return qcore.max_abs(self.mat - np.diag(np.diag(self.mat))) <= DEFAULT_TOL

    def diagonal_values(self) -> np.ndarray:
        """Real diagonal of the matrix (the spectrum, for diagonal observables)."""
        return np.diag(self.mat).real.copy()

    @classmethod
    def diagonal(cls, values: Sequence[float], name: str = "") -> Observable:
        """Diagonal observable with one projector ``|i><i|`` per basis state.

        Equal values are *not* merged, so the QPD index equals the basis index.
        """
        d = len(values)
        projs = []
        for i in range(d):
            p = np.zeros((d, d), dtype=np.complex128)
            p[i, i] = 1.0
            projs.append(p)
        return cls(np.diag(np.asarray(values, dtype=np.complex128)), tuple(values), tuple(projs), name)

    @classmethod
    def from_matrix(cls, mat: ArrayLike, name: str = "") -> Observable:
        """Spectral decomposition with eigenvalues merged within 1e-9."""
        m = qcore.as_matrix(mat)
        if not qcore.is_hermitian(m, DEFAULT_TOL):
            raise InvariantError("observable is not Hermitian")
        herm = 0.5 * (m + m.conj().T)
        vals, vecs = np.linalg.eigh(herm)
        groups: list[list[int]] = []
        for k in range(len(vals)):
            if groups and abs(vals[k] - vals[groups[-1][0]]) <= DEGENERACY_TOL:
                groups[-1].append(k)
            else:
                groups.append([k])
        spectrum = []
        for g in groups:
            v = vecs[:, g]
            p = v @ v.conj().T
            diag = np.abs(np.diag(p))
            first = int(np.argmax(diag > 1e-9))
            spectrum.append((first, -float(np.mean(vals[g])), float(np.mean(vals[g])), p))
        spectrum.sort(key=lambda s: (s[0], s[1]))
        return cls(herm, tuple(s[2] for s in spectrum), tuple(s[3] for s in spectrum), name)

    def heisenberg(self, u: ArrayLike) -> Observable:
        return heisenberg(self, u)


def named_observable(name: str, dim: int = 2) -> Observable:
    """``I``, ``X``, ``Y``, ``Z`` (qubits) or ``P<k>`` (basis projector)."""
    if name.startswith("P") and name[1:].isdigit():
        k = int(name[1:])
        if k >= dim:
            raise ValueError(f"projector index {k} out of range for dim {dim}")
        vals = [0.0] * dim
        vals[k] = 1.0
        return Observable.diagonal(vals, name)
    if name == "I":
        return Observable(np.eye(dim), (1.0,), (np.eye(dim),), "I")
    if name == "Z" and dim == 2:
        return Observable.diagonal([1.0, -1.0], "Z")
    if name in PAULIS and dim == 2:
        return Observable.from_matrix(PAULIS[name], name)
    raise ValueError(f"unknown observable {name!r} for dim {dim}")


def basis_projectors(dim: int) -> tuple[CMatrix, ...]:
    return Observable.diagonal(list(range(dim))).projectors


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Channel:
    kind: Literal["unitary", "kraus"]
    operators: tuple[CMatrix, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        ops = tuple(qcore.frozen(qcore.as_matrix(k)) for k in self.operators)
        if not ops:
            raise InvariantError("channel needs at least one operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops) or shape[0] != shape[1]:
            raise DimensionError("channel operators must be square and equally sized")
        if self.kind == "unitary":
            if len(ops) != 1 or not qcore.is_unitary(ops[0], DEFAULT_TOL):
                raise InvariantError("unitary channel needs exactly one unitary operator")
        elif self.kind == "kraus":
            total = sum(k.conj().T @ k for k in ops)
            if qcore.max_abs(total - np.eye(shape[0])) > DEFAULT_TOL:
                raise InvariantError("Kraus operators are not trace preserving")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def unitary(self) -> CMatrix:
        if self.kind != "unitary":
            raise InvariantError("channel is not unitary")
        return self.operators[0]

    @classmethod
    def from_unitary(cls, u: ArrayLike, name: str = "") -> Channel:
        return cls("unitary", (u,), name)

    @classmethod
    def identity(cls, dim: int) -> Channel:
        return cls("unitary", (np.eye(dim),), "identity")

    def then(self, other: Channel) -> Channel:
        """Sequential composition: ``self`` first, then ``other``."""
        if self.kind == other.kind == "unitary":
            return Channel.from_unitary(other.unitary @ self.unitary)
        ops = [b @ a for a, b in itertools.product(self.operators, other.operators)]
        return Channel("kraus", tuple(ops))

    def apply(self, rho: ArrayLike) -> CMatrix:
        """Apply to an arbitrary (not necessarily normalized) operator."""
        r = qcore.as_matrix(rho)
        if r.shape[0] != self.dim:
            raise DimensionError(f"channel of dim {self.dim} applied to {r.shape}")
        return sum(k @ r @ k.conj().T for k in self.operators)


def apply_channel(rho: DensityMatrix, c: Channel) -> DensityMatrix:
    try:
        return DensityMatrix(c.apply(rho.mat))
    except InvariantError as exc:
        raise InvariantError(f"channel output is not a valid state: {exc}") from exc


def heisenberg(a: Observable, u: Channel | ArrayLike) -> Observable:
    """``U^dagger A U`` with projectors transformed identically."""
    umat = u.unitary if isinstance(u, Channel) else qcore.as_matrix(u)
    if not qcore.is_unitary(umat, DEFAULT_TOL):
        raise InvariantError("heisenberg() needs a unitary")
    if umat.shape[0] != a.dim:
        raise DimensionError("observable and unitary dimensions differ")
    ud = umat.conj().T
    return Observable(
        ud @ a.mat @ umat,
        a.eigenvalues,
        tuple(ud @ p @ umat for p in a.projectors),
        a.name,
    )


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


def rotation_matrix(theta: float, phi: float) -> CMatrix:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]],
        dtype=np.complex128,
    )


def rotation_gate(theta: float, phi: float) -> Channel:
    return Channel.from_unitary(rotation_matrix(theta, phi), f"R({theta:g},{phi:g})")


def csum_matrix(d: int) -> CMatrix:
    if d < 2:
        raise ValueError(f"CSUM needs d >= 2, got {d}")
    u = np.zeros((d * d, d * d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            u[i * d + (i + j) % d, i * d + j] = 1.0
    return u


def csum_gate(d: int) -> Channel:
    """Controlled shift ``|i, j> -> |i, i+j mod d>``; control is the first factor."""
    return Channel.from_unitary(csum_matrix(d), f"CSUM{d}")


CNOT = csum_matrix(2)


def ms_matrix() -> CMatrix:
    """``exp(i pi/4 X (x) X)`` in closed form."""
    return np.cos(np.pi / 4) * np.eye(4) + 1j * np.sin(np.pi / 4) * np.kron(X, X)


def ms_gate() -> Channel:
    return Channel.from_unitary(ms_matrix(), "MS")


@dataclass(frozen=True)
class GateOp:
    """One gate of a two-qubit circuit; ``qubits`` are 0 (system) and/or 1 (ancilla)."""

    name: str
    qubits: tuple[int, ...]
    matrix: CMatrix

    def full(self) -> CMatrix:
        if self.qubits == (0, 1):
            return self.matrix
        if self.qubits == (0,):
            return np.kron(self.matrix, I2)
        if self.qubits == (1,):
            return np.kron(I2, self.matrix)
        raise ValueError(f"unsupported qubit tuple {self.qubits}")


def cnot_from_ms() -> list[GateOp]:
    """CNOT (system controls ancilla) from one MS gate and four rotations.

    Equal to ``CNOT`` up to a global phase; see ``compose_ops``.
    """
    h = np.pi / 2
    return [
        GateOp("R(pi/2,pi/2)", (0,), rotation_matrix(h, h)),
        GateOp("MS", (0, 1), ms_matrix()),
        GateOp("R(pi/2,0)", (1,), rotation_matrix(h, 0.0)),
        GateOp("R(pi/2,0)", (0,), rotation_matrix(h, 0.0)),
        GateOp("R(pi/2,-pi/2)", (0,), rotation_matrix(h, -h)),
    ]


def compose_ops(ops: Sequence[GateOp]) -> CMatrix:
    """Circuit unitary, first list element applied first."""
    u = np.eye(4, dtype=np.complex128)
    for op in ops:
        u = op.full() @ u
    return u


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


def weyl_operators(d: int) -> list[CMatrix]:
    """Generalized Pauli group ``X^a Z^b`` for one qudit (Paulis up to phase for d=2)."""
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(d)
        for b in range(d)
    ]


def depolarizing_channel(p: float, n_qubits: int = 1, dim: int | None = None) -> Channel:
    """``(1-p) rho + p I/D`` as a Kraus set over the Pauli (or Weyl) group.

    ``dim`` overrides ``2**n_qubits`` for a single qudit of that dimension.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    if dim is None:
        D = 2**n_qubits
        group = [qcore.tensor(*ps) for ps in itertools.product(PAULIS.values(), repeat=n_qubits)]
    else:
        D = dim
        group = weyl_operators(dim)
    # Twirl over the full group is the completely depolarizing map.
    w_id = np.sqrt(1.0 - p + p / D**2)
    w = np.sqrt(p / D**2)
    ops = [w_id * group[0]] + [w * g for g in group[1:]]
    ops = [k for k in ops if qcore.max_abs(k) > 0.0] or [np.eye(D)]
    return Channel("kraus", tuple(ops), f"depolarizing({p:g})")


def dephasing_channel(p: float, dim: int = 2) -> Channel:
    """Mix with the fully dephased state: ``(1-p) rho + p diag(rho)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"dephasing probability {p} outside [0, 1]")
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    ops = [np.sqrt(1.0 - p + p / dim) * np.eye(dim)]
    ops += [np.sqrt(p / dim) * np.linalg.matrix_power(clock, b) for b in range(1, dim)]
    ops = [k for k in ops if qcore.max_abs(k) > 0.0]
    return Channel("kraus", tuple(ops), f"dephasing({p:g})")


def depolarizing_p_from_bell_fidelity(fidelity: float, n_qubits: int = 2) -> float:
    """Invert ``F = 1 - p (1 - 1/D)`` for a pure target state under depolarizing noise.

    A Bell-state fidelity of 0.94 maps to ``p = 0.08``.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError("fidelity must lie in [0, 1]")
    D = 2**n_qubits
    return min(1.0, (1.0 - fidelity) / (1.0 - 1.0 / D))
