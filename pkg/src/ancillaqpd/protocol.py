"""Sequential ancilla-assisted measurement protocols.

A protocol is an initial state followed by ``N`` steps; step ``n`` applies a
channel to the system and then measures it with the POVM of a measurement
set. Outcome trajectories ``m = (m_1, ..., m_N)`` are distributed as

    P_m = Tr[ M_{m_N} o ... o U_{2->3} o M_{m_2} o U_{1->2} o M_{m_1}(rho) ].

Two independent routes produce this distribution:

* the Kraus route applies the diagonal POVM elements to the system alone;
* the explicit route simulates system (x) ancilla: ancilla reset to ``|0>``,
  CSUM/CNOT (optionally built from an MS gate, optionally noisy), a uniformly
  chosen orthonormal basis of the measurement set, and projection.

Sampling uses a counter-based generator per fixed-size chunk, so the output
depends only on ``(seed, chunk_size)`` and not on the number of workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import qcore
from .povm import MeasurementSet, builtin_set, sampling_decomposition
from .qmodel import (
    Channel,
    DensityMatrix,
    compose_ops,
    cnot_from_ms,
    csum_matrix,
    dephasing_channel,
    depolarizing_channel,
    depolarizing_p_from_bell_fidelity,
)

log = logging.getLogger(__name__)

MAX_OUTCOME_TUPLES = 10**6
DEFAULT_CHUNK = 4096

MS_BELL_FIDELITY = 0.94
ANCILLA_DETECTION_FIDELITY = 0.989
SYSTEM_DETECTION_FIDELITY = 0.984


class OutcomeSpaceError(ValueError):
    pass


class ConfusionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Step:
    set: MeasurementSet
    pre_channel: Channel | None = None

    def channel(self, dim: int) -> Channel:
        return self.pre_channel if self.pre_channel is not None else Channel.identity(dim)


@dataclass(frozen=True, eq=False)
class Protocol:
    initial: DensityMatrix
    steps: tuple[Step, ...]
    final_projective: bool = False

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps:
            raise ValueError("a protocol needs at least one step")
        d = self.initial.dim
        for n, s in enumerate(steps):
            if s.set.dim != d or s.channel(d).dim != d:
                raise qcore.DimensionError(f"step {n + 1} does not match system dimension {d}")
        object.__setattr__(self, "steps", steps)

    @property
    def dim(self) -> int:
        return self.initial.dim

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def sets(self) -> list[MeasurementSet]:
        """Measurement set actually used at each step."""
        out = [s.set for s in self.steps]
        if self.final_projective:
            out[-1] = z_set(self.dim)
        return out

    @property
    def channels(self) -> list[Channel]:
        return [s.channel(self.dim) for s in self.steps]

    @property
    def outcome_shape(self) -> tuple[int, ...]:
        return tuple(s.size for s in self.sets)

    def with_initial(self, rho: DensityMatrix) -> Protocol:
        return Protocol(rho, self.steps, self.final_projective)


def z_set(dim: int) -> MeasurementSet:
    return builtin_set("z") if dim == 2 else builtin_set(f"z-d{dim}")


class TrajectoryRecord(NamedTuple):
    outcomes: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """``n`` trajectories stored as an ``(n, N)`` integer array."""

    outcomes: np.ndarray
    shape: tuple[int, ...]

    def __post_init__(self):
        o = np.asarray(self.outcomes, dtype=np.int64)
        if o.ndim != 2 or o.shape[1] != len(self.shape):
            raise ValueError(f"outcomes must have shape (n, {len(self.shape)})")
        if o.size and (o.min() < 0 or np.any(o >= np.asarray(self.shape))):
            raise ValueError("outcome index out of range for its step")
        o.flags.writeable = False
        object.__setattr__(self, "outcomes", o)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    def __len__(self):
        return self.outcomes.shape[0]

    def __iter__(self) -> Iterator[TrajectoryRecord]:
        for row in self.outcomes:
            yield TrajectoryRecord(tuple(int(v) for v in row))

    @property
    def n_steps(self) -> int:
        return len(self.shape)


@dataclass(frozen=True, eq=False)
class TrajectoryDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    @property
    def table(self) -> dict[tuple[int, ...], float]:
        return {idx: float(self.probs[idx]) for idx in np.ndindex(*self.shape)}

    def tv_distance(self, other: TrajectoryDistribution) -> float:
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return 0.5 * float(np.abs(self.probs - other.probs).sum())

    def marginal(self, step: int) -> np.ndarray:
        axes = tuple(a for a in range(len(self.shape)) if a != step)
        return self.probs.sum(axis=axes)

    def to_dict(self) -> dict[str, float]:
        return {",".join(map(str, idx)): p for idx, p in self.table.items()}


@dataclass(frozen=True)
class NoiseModel:
    """Gate and readout imperfections for the explicit route.

    ``readout_confusion`` holds one column-stochastic matrix per step,
    ``C[observed, true]``, either ``d x d`` (flips within the measured basis)
    or full size over the step's outcomes; ``None`` entries mean perfect
    readout. ``dephasing_p`` is an optional extra system channel applied at
    each ancilla interaction; it has no calibrated default.
    """

    entangling_depolarizing_p: float = 0.0
    readout_confusion: tuple[np.ndarray | None, ...] | None = None
    dephasing_p: float = 0.0

    def __post_init__(self):
        for label, v in (("entangling_depolarizing_p", self.entangling_depolarizing_p),
                         ("dephasing_p", self.dephasing_p)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{label}={v} outside [0, 1]")
        if self.readout_confusion is not None:
            conf = tuple(None if c is None else _check_stochastic(c) for c in self.readout_confusion)
            object.__setattr__(self, "readout_confusion", conf)

    @classmethod
    def paper_preset(cls, n_steps: int, final_projective: bool = True) -> NoiseModel:
        """Bell-state fidelity 0.94 for the entangling gate, detection fidelities
        0.989 (ancilla) and 0.984 (system, used for a final projective step)."""
        p = depolarizing_p_from_bell_fidelity(MS_BELL_FIDELITY)
        conf = [symmetric_confusion(ANCILLA_DETECTION_FIDELITY) for _ in range(n_steps)]
        if final_projective:
            conf[-1] = symmetric_confusion(SYSTEM_DETECTION_FIDELITY)
        return cls(p, tuple(conf))

    def to_dict(self) -> dict:
        conf = None
        if self.readout_confusion is not None:
            conf = [None if c is None else c.tolist() for c in self.readout_confusion]
        return {
            "entangling_depolarizing_p": self.entangling_depolarizing_p,
            "readout_confusion": conf,
            "dephasing_p": self.dephasing_p,
        }

    @classmethod
    def from_dict(cls, data: dict) -> NoiseModel:
        unknown = set(data) - {"entangling_depolarizing_p", "readout_confusion", "dephasing_p"}
        if unknown:
            raise ValueError(f"unknown noise keys: {sorted(unknown)}")
        conf = data.get("readout_confusion")
        if conf is not None:
            conf = tuple(None if c is None else np.asarray(c, dtype=float) for c in conf)
        return cls(float(data.get("entangling_depolarizing_p", 0.0)), conf,
                   float(data.get("dephasing_p", 0.0)))


# ---------------------------------------------------------------------------
# Kraus route
# ---------------------------------------------------------------------------


def _check_size(p: Protocol) -> None:
    if math.prod(p.outcome_shape) > MAX_OUTCOME_TUPLES:
        raise OutcomeSpaceError(f"outcome space {p.outcome_shape} exceeds {MAX_OUTCOME_TUPLES} tuples")


def exact_distribution(p: Protocol) -> TrajectoryDistribution:
    """Exhaustive enumeration with the diagonal POVM elements."""
    _check_size(p)
    d = p.dim
    branches = p.initial.mat[None, :, :]  # unnormalized branch states
    for step, ms in zip(p.steps, p.sets):
        chan = step.channel(d)
        branches = np.array([chan.apply(r) for r in branches])
        diag = np.array([np.diag(m) for m in ms.povm.elements])  # (m, d)
        # M rho M^dagger for diagonal M
        branches = np.einsum("mi,bij,mj->bmij", diag, branches, diag.conj()).reshape(-1, d, d)
    probs = np.einsum("bii->b", branches).real.reshape(p.outcome_shape)
    return TrajectoryDistribution(np.clip(probs, 0.0, None))


def kraus_superoperators(p: Protocol) -> list[np.ndarray]:
    """Per step, an array ``(m, d^2, d^2)`` mapping ``vec(rho)`` to the branch
    ``M_m U(rho) M_m^dagger`` (row-major vectorization)."""
    d = p.dim
    out = []
    for step, ms in zip(p.steps, p.sets):
        pre = sum(np.kron(k, k.conj()) for k in step.channel(d).operators)
        out.append(np.array([np.kron(m, m.conj()) @ pre for m in ms.povm.elements]))
    return out


# ---------------------------------------------------------------------------
# Explicit system (x) ancilla route
# ---------------------------------------------------------------------------


def _entangler(d: int, use_ms_decomposition: bool) -> np.ndarray:
    if use_ms_decomposition:
        if d != 2:
            raise ValueError("the MS decomposition only exists for qubits")
        return compose_ops(cnot_from_ms())
    return csum_matrix(d)


def _ancilla_measurement(rho_s: np.ndarray, ms: MeasurementSet, bases: list[list[int]],
                         u: np.ndarray, joint_noise: Channel | None,
                         sys_noise: Channel | None) -> list[np.ndarray]:
    """Unnormalized system state for each outcome of one ancilla-assisted measurement."""
    d = ms.dim
    anc0 = np.zeros((d, d), dtype=np.complex128)
    anc0[0, 0] = 1.0
    joint = u @ np.kron(rho_s, anc0) @ u.conj().T
    if joint_noise is not None:
        joint = joint_noise.apply(joint)
    out: list[np.ndarray] = [None] * ms.size  # type: ignore[list-item]
    for basis in bases:
        for m in basis:
            phi = ms.kets[m]
            proj = np.kron(np.eye(d), qcore.outer(phi))
            post = qcore.partial_trace_last(proj @ joint @ proj, d, d) / len(bases)
            if sys_noise is not None:
                post = sys_noise.apply(post)
            out[m] = post
    return out


def _direct_projection(rho_s: np.ndarray) -> list[np.ndarray]:
    d = rho_s.shape[0]
    out = []
    for i in range(d):
        e = np.zeros((d, d), dtype=np.complex128)
        e[i, i] = rho_s[i, i]
        out.append(e)
    return out


def _explicit_step_maps(p: Protocol, use_ms_decomposition: bool, noise: NoiseModel | None):
    """Per step, a function from an unnormalized system state to its outcome branches."""
    d = p.dim
    u = _entangler(d, use_ms_decomposition)
    joint_noise = None
    sys_noise = None
    if noise is not None and noise.entangling_depolarizing_p > 0:
        if d == 2:
            joint_noise = depolarizing_channel(noise.entangling_depolarizing_p, n_qubits=2)
        else:
            joint_noise = depolarizing_channel(noise.entangling_depolarizing_p, dim=d * d)
    if noise is not None and noise.dephasing_p > 0:
        sys_noise = dephasing_channel(noise.dephasing_p, d)
    maps = []
    for n, (step, ms) in enumerate(zip(p.steps, p.sets)):
        chan = step.channel(d)
        if p.final_projective and n == p.n_steps - 1:
            maps.append(lambda r, chan=chan: _direct_projection(chan.apply(r)))
            continue
        try:
            bases = sampling_decomposition(ms)
        except ValueError as exc:
            raise ValueError(f"step {n + 1}: {exc}") from exc
        maps.append(lambda r, chan=chan, ms=ms, bases=bases: _ancilla_measurement(
            chan.apply(r), ms, bases, u, joint_noise, sys_noise))
    return maps


def explicit_circuit_distribution(p: Protocol, use_ms_decomposition: bool = False,
                                  noise: NoiseModel | None = None) -> TrajectoryDistribution:
    """Enumerate every branch of the system (x) ancilla circuit.

    With ``noise``, gate noise is applied inside the circuit and readout
    confusion (if any) is convolved into the result.
    """
    _check_size(p)
    maps = _explicit_step_maps(p, use_ms_decomposition, noise)
    branches = [p.initial.mat]
    for step_map in maps:
        branches = [post for r in branches for post in step_map(r)]
    probs = np.array([np.trace(r).real for r in branches]).reshape(p.outcome_shape)
    dist = TrajectoryDistribution(np.clip(probs, 0.0, None))
    if noise is not None and noise.readout_confusion is not None:
        dist = apply_readout_error(dist, lift_confusions(p, noise.readout_confusion))
    return dist


def explicit_superoperators(p: Protocol, use_ms_decomposition: bool = False,
                            noise: NoiseModel | None = None) -> list[np.ndarray]:
    """Superoperator form of each explicit-route step (linear in the input state)."""
    d = p.dim
    maps = _explicit_step_maps(p, use_ms_decomposition, noise)
    out = []
    for step_map, ms in zip(maps, p.sets):
        sup = np.zeros((ms.size, d * d, d * d), dtype=np.complex128)
        for i, j, e in qcore.matrix_units(d):
            for m, post in enumerate(step_map(e)):
                sup[m, :, i * d + j] = post.reshape(-1)
        out.append(sup)
    return out


def reduced_state_after(p: Protocol, k: int, explicit: bool = False) -> np.ndarray:
    """System state after ``k`` steps, summed over all outcomes."""
    d = p.dim
    sups = explicit_superoperators(p) if explicit else kraus_superoperators(p)
    vec = p.initial.mat.reshape(-1)
    for sup in sups[:k]:
        vec = sup.sum(axis=0) @ vec
    return vec.reshape(d, d)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based substream for chunk ``chunk`` of a run seeded with ``seed``."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, chunk], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sample_chunk(sups: list[np.ndarray], rho: np.ndarray, shape: tuple[int, ...], size: int,
                  rng: np.random.Generator, confusions: list[np.ndarray | None] | None) -> np.ndarray:
    N = len(sups)
    u = rng.random((size, N))
    out = np.zeros((size, N), dtype=np.int64)
    codes = np.zeros(size, dtype=np.int64)
    states = {0: rho.reshape(-1)}  # prefix code -> normalized vec(state)
    for n, sup in enumerate(sups):
        new_states = {}
        new_codes = codes * shape[n]
        for code in np.unique(codes):
            mask = codes == code
            branch = sup @ states[int(code)]  # (m, d^2)
            d = int(math.isqrt(branch.shape[1]))
            probs = np.clip(np.einsum("mii->m", branch.reshape(-1, d, d)).real, 0.0, None)
            cdf = np.cumsum(probs / probs.sum())
            cdf[-1] = 1.0
            draws = np.searchsorted(cdf, u[mask, n], side="right")
            draws = np.minimum(draws, len(probs) - 1)
            out[mask, n] = draws
            for m in np.unique(draws):
                new_states[int(code) * shape[n] + int(m)] = branch[m] / max(probs[m], 1e-300)
        codes = new_codes + out[:, n]
        states = new_states
    if confusions is not None:
        out = _resample_labels(out, confusions, rng)
    return out


def sample(p: Protocol, n: int, seed: int, noise: NoiseModel | None = None,
           use_ms_decomposition: bool = False, chunk_size: int = DEFAULT_CHUNK,
           workers: int = 1) -> TrajectorySet:
    """Draw ``n`` i.i.d. trajectories by sequential conditional sampling.

    Without ``noise`` the Kraus route drives the updates; with ``noise`` the
    explicit-route instrument is used and readout errors are drawn from the
    same chunk stream after the outcomes.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise is None:
        sups = kraus_superoperators(p)
        confusions = None
    else:
        sups = explicit_superoperators(p, use_ms_decomposition, noise)
        confusions = lift_confusions(p, noise.readout_confusion) if noise.readout_confusion else None
    shape = p.outcome_shape
    n_chunks = -(-n // chunk_size)
    sizes = [min(chunk_size, n - c * chunk_size) for c in range(n_chunks)]

    def run(c: int) -> np.ndarray:
        return _sample_chunk(sups, p.initial.mat, shape, sizes[c], chunk_generator(seed, c), confusions)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    return TrajectorySet(np.concatenate(parts, axis=0), shape)


def empirical_distribution(records: TrajectorySet) -> TrajectoryDistribution:
    flat = np.ravel_multi_index(records.outcomes.T, records.shape)
    counts = np.bincount(flat, minlength=math.prod(records.shape))
    return TrajectoryDistribution((counts / len(records)).reshape(records.shape))


# ---------------------------------------------------------------------------
# Readout errors
# ---------------------------------------------------------------------------


def symmetric_confusion(fidelity: float, d: int = 2) -> np.ndarray:
    """Correct label with probability ``fidelity``, otherwise uniform over the rest."""
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError("fidelity must lie in [0, 1]")
    off = (1.0 - fidelity) / (d - 1)
    return np.full((d, d), off) + np.eye(d) * (fidelity - off)


def _check_stochastic(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ConfusionError(f"confusion matrix must be square, got {c.shape}")
    if np.any(c < -1e-15) or np.max(np.abs(c.sum(axis=0) - 1.0)) > 1e-12:
        raise ConfusionError("confusion matrix is not column-stochastic")
    return c


def lift_confusion(ms: MeasurementSet, c: np.ndarray) -> np.ndarray:
    """Expand a ``d x d`` confusion to the set's outcomes, flipping within each basis."""
    c = _check_stochastic(c)
    if c.shape[0] == ms.size:
        return c
    if c.shape[0] != ms.dim:
        raise ConfusionError(f"confusion of size {c.shape[0]} fits neither d={ms.dim} nor m={ms.size}")
    full = np.zeros((ms.size, ms.size))
    bases = [list(range(ms.size))] if ms.is_projective else sampling_decomposition(ms)
    for basis in bases:
        full[np.ix_(basis, basis)] = c
    return full


def lift_confusions(p: Protocol, confusions: Sequence[np.ndarray | None]) -> list[np.ndarray | None]:
    if len(confusions) != p.n_steps:
        raise ConfusionError(f"expected {p.n_steps} confusion matrices, got {len(confusions)}")
    return [None if c is None else lift_confusion(ms, c) for ms, c in zip(p.sets, confusions)]


def _apply_axis(probs: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    moved = np.tensordot(mat, probs, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


def _resample_labels(outcomes: np.ndarray, confusions: Sequence[np.ndarray | None],
                     rng: np.random.Generator) -> np.ndarray:
    out = outcomes.copy()
    u = rng.random(outcomes.shape)
    for n, c in enumerate(confusions):
        if c is None:
            continue
        cdf = np.cumsum(c, axis=0)  # column m: cdf over observed labels
        cdf[-1, :] = 1.0
        for m in range(c.shape[1]):
            mask = outcomes[:, n] == m
            if mask.any():
                out[mask, n] = np.searchsorted(cdf[:, m], u[mask, n], side="right")
    return out


def apply_readout_error(target, confusions: Sequence[np.ndarray | None],
                        rng: np.random.Generator | int | None = None):
    """Flip outcome labels with per-step confusion probabilities.

    Distributions are convolved exactly; trajectory sets are resampled entry by
    entry (``rng`` required).
    """
    mats = [None if c is None else _check_stochastic(c) for c in confusions]
    if isinstance(target, TrajectoryDistribution):
        if len(mats) != len(target.shape):
            raise ConfusionError("one confusion matrix per step is required")
        probs = target.probs
        for axis, c in enumerate(mats):
            if c is not None:
                if c.shape[0] != probs.shape[axis]:
                    raise ConfusionError(f"step {axis + 1}: confusion size {c.shape[0]} "
                                         f"does not match {probs.shape[axis]} outcomes")
                probs = _apply_axis(probs, c, axis)
        return TrajectoryDistribution(probs)
    if isinstance(target, TrajectorySet):
        if rng is None:
            raise ValueError("resampling trajectories needs an rng or seed")
        gen = rng if isinstance(rng, np.random.Generator) else chunk_generator(int(rng), 0)
        return TrajectorySet(_resample_labels(target.outcomes, mats, gen), target.shape)
    raise TypeError(f"cannot apply readout error to {type(target).__name__}")


class ReadoutCorrection(NamedTuple):
    distribution: TrajectoryDistribution
    clipped_mass: float


def correct_readout(dist: TrajectoryDistribution, confusions: Sequence[np.ndarray | None]) -> ReadoutCorrection:
    """Invert the confusion per step; negative entries are clipped and reported."""
    probs = dist.probs
    for axis, c in enumerate(confusions):
        if c is None:
            continue
        c = _check_stochastic(c)
        if np.linalg.cond(c) > 1e12:
            raise ConfusionError(f"confusion matrix at step {axis + 1} is singular")
        probs = _apply_axis(probs, np.linalg.inv(c), axis)
    negative = probs < 0
    clipped = float(-probs[negative].sum())
    if clipped > 0:
        log.warning("readout correction clipped %.3g probability mass", clipped)
        probs = np.where(negative, 0.0, probs)
        probs = probs / probs.sum()
    return ReadoutCorrection(TrajectoryDistribution(probs), clipped)
