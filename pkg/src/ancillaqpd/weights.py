"""Weights gamma_m realizing ``B rho A = sum_m gamma_m M_m rho M_m^dagger``.

For ``A = diag(a)``, ``B = diag(b)`` and the diagonal POVM of a measurement
set, the operator identity reduces to the linear system ``T gamma = alpha y``
with ``T[i + j d, m] = <phi_m|j><i|phi_m>`` and ``y[i + j d] = a_i b_j``.

Two reductions are supported:

``full``
    every matrix unit ``|i><j|`` is reproduced, so the weighted instrument may
    be followed by further evolution and measurements;
``final``
    only the diagonal rows ``i == j`` are kept. This reproduces ``Tr[B rho A]``
    and is all that is needed at the last time of a protocol, where a plain
    projective measurement suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linprog, minimize

from . import qcore
from .povm import MeasurementSet
from .qmodel import Observable, named_observable

Mode = Literal["full", "final"]
Objective = Literal["any_feasible", "min_inf_norm"]

FEASIBILITY_TOL = 1e-8
NULL_TOL = 1e-10
INITIAL_CUTS = 16


class InfeasibleSystemError(ValueError):
    """The measurement set cannot realize the requested operator pair."""

    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (least-squares residual {residual:.3e})")
        self.residual = residual


class ObservableNotDiagonalError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WeightSystem:
    T: np.ndarray
    y: np.ndarray
    alpha: float
    mode: Mode
    set: MeasurementSet
    left: Observable
    right: Observable

    def residual(self, gammas: np.ndarray) -> float:
        return qcore.max_abs(self.T @ gammas - self.alpha * self.y)


@dataclass(frozen=True, eq=False)
class WeightVector:
    gammas: np.ndarray
    left: Observable
    right: Observable
    set: MeasurementSet
    mode: Mode = "full"

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=np.complex128).copy()
        if g.shape != (self.set.size,):
            raise ValueError(f"expected {self.set.size} weights, got shape {g.shape}")
        g.flags.writeable = False
        object.__setattr__(self, "gammas", g)

    @property
    def gamma_max(self) -> float:
        return float(np.max(np.abs(self.gammas)))

    def __len__(self):
        return len(self.gammas)

    def to_dict(self) -> dict:
        return {
            "set": self.set.name,
            "B": self.left.name,
            "A": self.right.name,
            "mode": self.mode,
            "gammas": [[float(g.real), float(g.imag)] for g in self.gammas],
            "gamma_max": self.gamma_max,
        }

    @classmethod
    def from_dict(cls, data: dict, ms: MeasurementSet) -> WeightVector:
        gammas = np.array([complex(re, im) for re, im in data["gammas"]])
        return cls(
            gammas,
            named_observable(data["B"], ms.dim),
            named_observable(data["A"], ms.dim),
            ms,
            data.get("mode", "full"),
        )


def build_system(ms: MeasurementSet, B: Observable, A: Observable, mode: Mode = "full") -> WeightSystem:
    d = ms.dim
    if B.dim != d or A.dim != d:
        raise qcore.DimensionError("observable and measurement-set dimensions differ")
    for label, op in (("B", B), ("A", A)):
        if not op.is_diagonal:
            raise ObservableNotDiagonalError(
                f"{label} is not diagonal in the computational basis; rotate the frame first"
            )
    a, b = A.diagonal_values(), B.diagonal_values()
    kets = np.array(ms.kets)  # (m, d)
    if mode == "full":
        # T[i + j d, m] = conj(phi_m[j]) * phi_m[i]
        T = np.einsum("mj,mi->jim", kets.conj(), kets).reshape(d * d, ms.size)
        y = np.outer(b, a).reshape(d * d)  # index j*d + i -> a_i b_j
    elif mode == "final":
        T = (np.abs(kets) ** 2).T
        y = a * b
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return WeightSystem(T.astype(np.complex128), y.astype(np.complex128), ms.alpha, mode, ms, B, A)


def _least_squares(system: WeightSystem) -> tuple[np.ndarray, float]:
    rhs = system.alpha * system.y
    gamma, *_ = np.linalg.lstsq(system.T, rhs, rcond=None)
    return gamma, system.residual(gamma)


def _null_space(T: np.ndarray) -> np.ndarray:
    _, s, vh = np.linalg.svd(T)
    rank = int(np.sum(s > NULL_TOL * max(1.0, s[0] if s.size else 1.0)))
    return vh[rank:].conj().T  # orthonormal columns


def _cut_row(n_row: np.ndarray, g0: complex, psi: float) -> tuple[np.ndarray, float]:
    """Linear cut ``Re(e^{-i psi} gamma_m) <= t`` in variables ``(u, v, t)``, z = u + i v."""
    rot = np.exp(-1j * psi)
    rn = rot * n_row
    row = np.concatenate([rn.real, -rn.imag, [-1.0]])
    return row, -(rot * g0).real


def _minimax(gamma0: np.ndarray, N: np.ndarray, max_iter: int = 400) -> np.ndarray:
    """Minimize ``max_m |gamma0 + N z|`` over complex ``z`` by Kelley cutting planes.

    Each modulus constraint is outer-approximated by supporting half-planes;
    cuts are added at the phase of every violating entry until the LP bound
    and the attained maximum agree.
    """
    k = N.shape[1]
    rows, rhs = [], []
    for m in range(len(gamma0)):
        for c in range(INITIAL_CUTS):
            r, b = _cut_row(N[m], gamma0[m], 2 * np.pi * c / INITIAL_CUTS)
            rows.append(r)
            rhs.append(b)
    cost = np.zeros(2 * k + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * (2 * k) + [(0, None)]
    best_z, best_val = np.zeros(k, dtype=np.complex128), float(np.max(np.abs(gamma0)))
    for _ in range(max_iter):
        res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
        if res.status != 0:
            break
        z = res.x[:k] + 1j * res.x[k : 2 * k]
        lower = res.x[-1]
        gamma = gamma0 + N @ z
        mods = np.abs(gamma)
        if mods.max() < best_val:
            best_z, best_val = z, float(mods.max())
        if best_val - lower <= 1e-12 * max(1.0, best_val):
            break
        for m in np.flatnonzero(mods > lower + 1e-14):
            r, b = _cut_row(N[m], gamma0[m], float(np.angle(gamma[m])))
            rows.append(r)
            rhs.append(b)
    return best_z


def _smallest_among_optima(gamma0: np.ndarray, N: np.ndarray, z0: np.ndarray, bound: float) -> np.ndarray:
    """Among ``z`` with ``max|gamma0 + N z| <= bound``, the one of least 2-norm."""
    k = N.shape[1]

    def split(x):
        return x[:k] + 1j * x[k:]

    cons = {"type": "ineq", "fun": lambda x: bound**2 - np.abs(gamma0 + N @ split(x)) ** 2}
    x0 = np.concatenate([z0.real, z0.imag])
    res = minimize(lambda x: float(x @ x), x0, jac=lambda x: 2 * x, constraints=[cons],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
    if res.success and np.max(np.abs(gamma0 + N @ split(res.x))) <= bound * (1 + 1e-9):
        return split(res.x)
    return z0


def solve_weights(system: WeightSystem, objective: Objective = "min_inf_norm") -> WeightVector:
    gamma0, residual = _least_squares(system)
    if residual > FEASIBILITY_TOL:
        raise InfeasibleSystemError(
            f"measurement set {system.set.name or '<explicit>'} cannot realize "
            f"(B={system.left.name}, A={system.right.name}) in {system.mode} mode",
            residual,
        )
    gamma = gamma0
    if objective == "min_inf_norm":
        N = _null_space(system.T)
        if N.shape[1]:
            z = _minimax(gamma0, N)
            bound = float(np.max(np.abs(gamma0 + N @ z)))
            z = _smallest_among_optima(gamma0, N, z, bound * (1 + 1e-10))
            gamma = gamma0 + N @ z
    elif objective != "any_feasible":
        raise ValueError(f"unknown objective {objective!r}")
    # Snap round-off so outputs are stable across runs.
    gamma = np.where(np.abs(gamma.real) < 1e-13, 0.0, gamma.real) + 1j * np.where(
        np.abs(gamma.imag) < 1e-13, 0.0, gamma.imag
    )
    return WeightVector(gamma, system.left, system.right, system.set, system.mode)


def weights_for(ms: MeasurementSet, A: Observable | str, B: Observable | str = "I",
                mode: Mode = "full", objective: Objective = "min_inf_norm") -> WeightVector:
    """Convenience wrapper: build and solve in one call."""
    if isinstance(A, str):
        A = named_observable(A, ms.dim)
    if isinstance(B, str):
        B = named_observable(B, ms.dim)
    return solve_weights(build_system(ms, B, A, mode), objective)


def default_mode(ms: MeasurementSet) -> Mode:
    """Projective sets can only serve as the final measurement."""
    return "final" if ms.is_projective else "full"


def verify_weights(ms: MeasurementSet, w: WeightVector) -> float:
    """Worst entrywise error of the operator identity over all matrix units.

    In ``final`` mode only the traced identity ``Tr[B E A]`` is checked.
    """
    B, A = w.left.mat, w.right.mat
    elements = ms.povm.elements
    worst = 0.0
    for _, _, e in qcore.matrix_units(ms.dim):
        target = B @ e @ A
        recon = sum(g * (m @ e @ m.conj().T) for g, m in zip(w.gammas, elements))
        if w.mode == "final":
            err = abs(np.trace(target) - np.trace(recon))
        else:
            err = qcore.max_abs(target - recon)
        worst = max(worst, float(err))
    return worst


def hoeffding_n(gamma_max_product: float, epsilon: float, delta: float) -> int:
    """Trajectories needed so real and imaginary parts are each within ``epsilon``.

    ``n >= g^2 ln(4/delta) / (2 eps^2)``, the 4 coming from a union bound over
    the two components.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if gamma_max_product <= 0:
        raise ValueError("gamma_max_product must be positive")
    n = gamma_max_product**2 * math.log(4.0 / delta) / (2.0 * epsilon**2)
    return max(1, math.ceil(n - 1e-9))
