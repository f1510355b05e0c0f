"""Exact multi-time statistics and their trajectory estimators.

Exact values use the Heisenberg picture,

    C = Tr[rho A1(t1) A2(t2) ... AN(tN)],     Q_i = Tr[rho P_i1(t1) ... P_iN(tN)],

and the estimators average ``prod_n gamma_{m_n}`` over sampled trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import qcore
from .protocol import TrajectoryDistribution, TrajectorySet
from .qmodel import Channel, DensityMatrix, Observable
from .weights import WeightVector

PAPER_E_CHOICES = ((1, -1), (1, 1), (1, -1))


@dataclass(frozen=True)
class Estimate:
    value: complex
    sem_re: float
    sem_im: float
    n: int

    def within(self, target: complex, k: float = 4.0, floor: float = 1e-12) -> bool:
        """Both components within ``k`` standard errors of ``target``.

        ``floor`` absorbs rounding when a component has (near) zero variance.
        """
        d = self.value - target
        return abs(d.real) <= k * self.sem_re + floor and abs(d.imag) <= k * self.sem_im + floor

    def to_dict(self) -> dict:
        return {"value": [self.value.real, self.value.imag], "sem_re": self.sem_re,
                "sem_im": self.sem_im, "n": self.n}


def _mean_and_sem(terms: np.ndarray) -> Estimate:
    n = terms.shape[0]
    mean = complex(terms.mean())
    if n > 1:
        sem_re = float(terms.real.std(ddof=1) / np.sqrt(n))
        sem_im = float(terms.imag.std(ddof=1) / np.sqrt(n))
    else:
        sem_re = sem_im = 0.0
    return Estimate(mean, sem_re, sem_im, n)


@dataclass(frozen=True, eq=False)
class QpdTable:
    """Complex table indexed by ``(i_1, ..., i_N)``.

    Sampled tables keep their per-trajectory terms so that any linear
    functional (sums, marginals, LGI correlators) gets a proper standard error.
    """

    values: np.ndarray
    terms: np.ndarray | None = None

    @property
    def index_shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def n_times(self) -> int:
        return self.values.ndim

    @property
    def is_exact(self) -> bool:
        return self.terms is None

    @property
    def n(self) -> int:
        return 0 if self.terms is None else self.terms.shape[0]

    @property
    def entries(self) -> dict[tuple[int, ...], complex]:
        return {idx: complex(self.values[idx]) for idx in np.ndindex(*self.index_shape)}

    def sem(self) -> tuple[np.ndarray, np.ndarray]:
        if self.terms is None:
            z = np.zeros(self.index_shape)
            return z, z
        n = self.terms.shape[0]
        return (self.terms.real.std(axis=0, ddof=1) / np.sqrt(n),
                self.terms.imag.std(axis=0, ddof=1) / np.sqrt(n))

    def functional(self, coeffs: np.ndarray) -> Estimate:
        """``sum_i c_i Q_i`` with its standard error."""
        coeffs = np.broadcast_to(coeffs, self.index_shape)
        if self.terms is None:
            return Estimate(complex(np.sum(coeffs * self.values)), 0.0, 0.0, 0)
        axes = tuple(range(1, self.terms.ndim))
        return _mean_and_sem(np.sum(self.terms * coeffs, axis=axes))

    def total(self) -> Estimate:
        return self.functional(np.ones(self.index_shape))

    def to_dict(self) -> dict:
        sem_re, sem_im = self.sem()
        return {
            "index_shape": list(self.index_shape),
            "n": self.n,
            "entries": {
                ",".join(map(str, idx)): {
                    "value": [float(self.values[idx].real), float(self.values[idx].imag)],
                    "sem_re": float(sem_re[idx]),
                    "sem_im": float(sem_im[idx]),
                }
                for idx in np.ndindex(*self.index_shape)
            },
        }


class LgiResult(NamedTuple):
    k: float
    terms: tuple[float, float, float]
    classical_bound: float = 1.0
    sem: float = 0.0

    @property
    def violates(self) -> bool:
        return self.k > self.classical_bound


class Marginal(NamedTuple):
    probs: np.ndarray
    imag_residue: float
    sem: np.ndarray


# ---------------------------------------------------------------------------
# Exact values
# ---------------------------------------------------------------------------


def _rho(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else qcore.as_matrix(rho)


def _op(a) -> np.ndarray:
    return a.mat if isinstance(a, Observable) else qcore.as_matrix(a)


def _check_lengths(n_ops: int, channels: Sequence[Channel]) -> None:
    if n_ops < 1 or len(channels) != n_ops - 1:
        raise qcore.DimensionError(f"{n_ops} observables need {max(n_ops - 1, 0)} channels, got {len(channels)}")


def _ordered_product_trace(rho: np.ndarray, ops: Sequence[np.ndarray], channels: Sequence[Channel]) -> complex:
    """``Tr[rho O1(t1) ... ON(tN)]``.

    Unitary evolutions use the Heisenberg picture; if any channel is a general
    CPTP map the equivalent forward propagation ``X -> E(X) O_n`` is used.
    """
    d = rho.shape[0]
    if any(o.shape != (d, d) for o in ops) or any(c.dim != d for c in channels):
        raise qcore.DimensionError("operator dimensions do not match the state")
    if all(c.kind == "unitary" for c in channels):
        u = np.eye(d, dtype=np.complex128)
        prod = ops[0]
        for o, c in zip(ops[1:], channels):
            u = c.unitary @ u
            prod = prod @ (u.conj().T @ o @ u)
        return complex(np.trace(rho @ prod))
    x = rho @ ops[0]
    for o, c in zip(ops[1:], channels):
        x = c.apply(x) @ o
    return complex(np.trace(x))


def exact_correlation(rho, observables: Sequence, channels: Sequence[Channel]) -> complex:
    _check_lengths(len(observables), channels)
    return _ordered_product_trace(_rho(rho), [_op(a) for a in observables], channels)


def exact_qpd(rho, projector_lists: Sequence[Sequence], channels: Sequence[Channel]) -> QpdTable:
    _check_lengths(len(projector_lists), channels)
    r = _rho(rho)
    projs = [[_op(p) for p in plist] for plist in projector_lists]
    shape = tuple(len(pl) for pl in projs)
    values = np.zeros(shape, dtype=np.complex128)
    if all(c.kind == "unitary" for c in channels):
        # Evolve each projector once, then take all ordered products.
        d = r.shape[0]
        u = np.eye(d, dtype=np.complex128)
        evolved = [projs[0]]
        for plist, c in zip(projs[1:], channels):
            u = c.unitary @ u
            evolved.append([u.conj().T @ p @ u for p in plist])
        for idx in np.ndindex(*shape):
            prod = r
            for n, i in enumerate(idx):
                prod = prod @ evolved[n][i]
            values[idx] = np.trace(prod)
    else:
        for idx in np.ndindex(*shape):
            values[idx] = _ordered_product_trace(r, [projs[n][i] for n, i in enumerate(idx)], channels)
    return QpdTable(values)


def populations(rho, projectors: Sequence, channels_before: Sequence[Channel]) -> np.ndarray:
    """No-measurement populations ``Tr[rho P_i(t)]`` after the given evolutions."""
    r = _rho(rho)
    for c in channels_before:
        r = c.apply(r)
    return np.array([np.trace(r @ _op(p)).real for p in projectors])


def correlation_from_qpd(q: QpdTable, eigenvalue_lists: Sequence[Sequence[float]]) -> complex:
    if tuple(len(e) for e in eigenvalue_lists) != q.index_shape:
        raise qcore.DimensionError(f"eigenvalue shape does not match QPD shape {q.index_shape}")
    coeffs = np.ones(q.index_shape)
    for n, ev in enumerate(eigenvalue_lists):
        shape = [1] * q.n_times
        shape[n] = len(ev)
        coeffs = coeffs * np.asarray(ev, dtype=float).reshape(shape)
    return complex(np.sum(coeffs * q.values))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _check_records(records: TrajectorySet, n_weights: int) -> None:
    if records.n_steps != n_weights:
        raise ValueError(f"trajectories have {records.n_steps} steps but {n_weights} weight entries were given")


def trajectory_terms(records: TrajectorySet, weight_vectors: Sequence[WeightVector]) -> np.ndarray:
    """Per-trajectory weight product ``prod_n gamma_{m_n}(A^(n))``."""
    _check_records(records, len(weight_vectors))
    terms = np.ones(len(records), dtype=np.complex128)
    for n, w in enumerate(weight_vectors):
        if len(w) != records.shape[n]:
            raise ValueError(f"step {n + 1}: {len(w)} weights for {records.shape[n]} outcomes")
        terms = terms * w.gammas[records.outcomes[:, n]]
    return terms


def estimate_correlation(records: TrajectorySet, weight_vectors: Sequence[WeightVector]) -> Estimate:
    if len(records) == 0:
        raise ValueError("no trajectories")
    return _mean_and_sem(trajectory_terms(records, weight_vectors))


def weight_matrix(weight_list: Sequence[WeightVector]) -> np.ndarray:
    """``G[m, i] = gamma_m(P_i)`` for one time."""
    if not weight_list:
        raise ValueError("missing weight vectors")
    return np.stack([w.gammas for w in weight_list], axis=1)


def estimate_qpd(records: TrajectorySet, weight_tables: Sequence[Sequence[WeightVector]]) -> QpdTable:
    """One pass over the trajectories fills every index tuple."""
    _check_records(records, len(weight_tables))
    if len(records) == 0:
        raise ValueError("no trajectories")
    mats = [weight_matrix(t) for t in weight_tables]
    for n, g in enumerate(mats):
        if g.shape[0] != records.shape[n]:
            raise ValueError(f"step {n + 1}: weights cover {g.shape[0]} outcomes, trajectories have {records.shape[n]}")
    terms = mats[0][records.outcomes[:, 0]]
    for n in range(1, len(mats)):
        terms = terms[..., None] * mats[n][records.outcomes[:, n]].reshape(
            (len(records),) + (1,) * n + (mats[n].shape[1],))
    return QpdTable(terms.mean(axis=0), terms)


def correlation_from_distribution(dist: TrajectoryDistribution, weight_vectors: Sequence[WeightVector]) -> complex:
    """Exact expectation of the correlation estimator under ``dist``."""
    total = dist.probs.astype(np.complex128)
    for n, w in enumerate(weight_vectors):
        shape = [1] * total.ndim
        shape[n] = len(w)
        total = total * w.gammas.reshape(shape)
    return complex(total.sum())


def qpd_from_distribution(dist: TrajectoryDistribution, weight_tables: Sequence[Sequence[WeightVector]]) -> QpdTable:
    """Exact expectation of the QPD estimator under ``dist``."""
    mats = [weight_matrix(t) for t in weight_tables]
    letters = "abcdefgh"
    if len(mats) > len(letters):
        raise ValueError("too many times")
    n = len(mats)
    outs = letters[:n].upper()
    spec = letters[:n] + "," + ",".join(f"{letters[k]}{outs[k]}" for k in range(n)) + "->" + outs
    return QpdTable(np.einsum(spec, dist.probs, *mats))


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------


def marginal(q: QpdTable, keep_time: int, tol: float | None = None) -> Marginal:
    """Single-time marginal; with ``tol`` an imaginary residue above it is an error."""
    if not 0 <= keep_time < q.n_times:
        raise IndexError(f"time index {keep_time} out of range")
    axes = tuple(a for a in range(q.n_times) if a != keep_time)
    vals = q.values.sum(axis=axes)
    residue = float(np.max(np.abs(vals.imag)))
    if tol is not None and residue > tol:
        raise ValueError(f"marginal has imaginary residue {residue:.3e}")
    sems = np.zeros(len(vals))
    if q.terms is not None:
        for i in range(len(vals)):
            coeffs = np.zeros(q.index_shape)
            idx = [slice(None)] * q.n_times
            idx[keep_time] = i
            coeffs[tuple(idx)] = 1.0
            sems[i] = q.functional(coeffs).sem_re
    return Marginal(vals.real, residue, sems)


def lgi_k(q: QpdTable, e_choices: Sequence[Sequence[int]] = PAPER_E_CHOICES) -> LgiResult:
    """``K = <E1E2> + <E2E3> - <E1E3>`` from the real part of a three-time QPD."""
    if q.n_times != 3 or any(s != 2 for s in q.index_shape):
        raise ValueError(f"LGI needs a binary three-time QPD, got shape {q.index_shape}")
    e = [np.asarray(c, dtype=float) for c in e_choices]
    if any(c.shape != (2,) or np.any(np.abs(c) != 1) for c in e):
        raise ValueError("E choices must be +-1 valued on binary outcomes")
    e1, e2, e3 = (c.reshape(s) for c, s in zip(e, [(2, 1, 1), (1, 2, 1), (1, 1, 2)]))
    pairs = [e1 * e2, e2 * e3, e1 * e3]
    terms = tuple(float(np.sum(np.broadcast_to(c, (2, 2, 2)) * q.values.real)) for c in pairs)
    k = terms[0] + terms[1] - terms[2]
    sem = 0.0
    if q.terms is not None:
        sem = q.functional(pairs[0] + pairs[1] - pairs[2]).sem_re
    return LgiResult(k, terms, 1.0, sem)


@dataclass(frozen=True)
class SweepRow:
    theta: float
    exact: complex
    estimate: Estimate | None = None

    def csv_fields(self) -> list[float]:
        est = self.estimate
        nan = float("nan")
        return [self.theta, self.exact.real, self.exact.imag,
                est.value.real if est else nan, est.value.imag if est else nan,
                est.sem_re if est else nan, est.sem_im if est else nan]


SWEEP_COLUMNS = ("theta", "re_exact", "im_exact", "re_est", "im_est", "sem_re", "sem_im")


def sweep(thetas: Sequence[float], exact_fn: Callable[[float], complex],
          sample_fn: Callable[[int, float], Estimate] | None = None) -> list[SweepRow]:
    """One row per grid point; ``sample_fn`` receives ``(grid_index, theta)``."""
    if len(thetas) == 0:
        raise ValueError("empty theta grid")
    rows = []
    for k, th in enumerate(thetas):
        est = sample_fn(k, float(th)) if sample_fn is not None else None
        rows.append(SweepRow(float(th), complex(exact_fn(float(th))), est))
    return rows


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 64-bit seed for a sub-run (e.g. one grid point)."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *keys])
    return int(ss.generate_state(1, np.uint64)[0])


def classical_lgi_bound_holds(p_joint: np.ndarray, e_choices=PAPER_E_CHOICES, tol: float = 1e-9) -> bool:
    """Check ``K <= 1`` for a genuine (non-negative) joint distribution."""
    return lgi_k(QpdTable(np.asarray(p_joint, dtype=np.complex128)), e_choices).k <= 1.0 + tol

