"""The trapped-ion demonstration: |+> evolved by R_x(theta) then R_y(theta^2).

Two readings of ``R_y(beta)`` are possible with the ``R(theta, phi)`` matrix:
``R(beta, -pi/2)`` (as printed next to the dynamics) or ``R(beta, +pi/2)``
(the usual ``exp(-i beta Y / 2)``). They differ in the sign of the rotation and
give different Leggett-Garg values. :func:`select_ry_convention` evaluates both
with the exact oracle and keeps the one whose K at theta = 0.74 pi violates the
classical bound, matching the reported K of about 1.17.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Literal

import numpy as np

from .estimate import (
    Estimate,
    QpdTable,
    derive_seed,
    estimate_correlation,
    estimate_qpd,
    exact_correlation,
    exact_qpd,
    lgi_k,
    qpd_from_distribution,
)
from .povm import builtin_set
from .protocol import NoiseModel, Protocol, Step, explicit_circuit_distribution, sample
from .qmodel import Channel, DensityMatrix, basis_projectors, named_observable, rotation_gate
from .weights import WeightVector, weights_for

Convention = Literal["literal", "mirrored"]
Kind = Literal["correlation", "qpd", "projective"]

RY_PHI = {"literal": -np.pi / 2, "mirrored": np.pi / 2}
THETA_STAR_2 = 0.3 * np.pi
THETA_STAR_3 = 0.74 * np.pi
REPORTED_K = 1.17
PAPER_TRAJECTORIES = 100

_SETS = {"correlation": "zy", "qpd": "zyx", "projective": "z"}


def rx(theta: float) -> Channel:
    return rotation_gate(theta, 0.0)


def ry(beta: float, convention: Convention) -> Channel:
    return rotation_gate(beta, RY_PHI[convention])


def default_grid(count: int = 41) -> np.ndarray:
    return np.linspace(0.0, np.pi, count)


@lru_cache(maxsize=None)
def convention_scores(theta: float = THETA_STAR_3) -> dict[str, float]:
    """Oracle K(theta) under each candidate R_y convention."""
    return {name: lgi_exact(theta, name).k for name in RY_PHI}


@lru_cache(maxsize=None)
def select_ry_convention(theta: float = THETA_STAR_3) -> Convention:
    scores = convention_scores(theta)
    violating = [name for name, k in scores.items() if k > 1.0]
    if len(violating) != 1:
        raise RuntimeError(f"cannot pick an R_y convention from K values {scores}")
    return violating[0]  # type: ignore[return-value]


def _resolve(convention: Convention | None) -> Convention:
    return select_ry_convention() if convention is None else convention


def channels(theta: float, n_times: int, convention: Convention | None = None) -> list[Channel]:
    """Evolutions between consecutive measurement times."""
    chans = [rx(theta), ry(theta**2, _resolve(convention))]
    if n_times not in (1, 2, 3):
        raise ValueError("the scenario has one, two or three times")
    return chans[: n_times - 1]


def initial_state() -> DensityMatrix:
    return DensityMatrix.named("plus")


def protocol(theta: float, n_times: int, kind: Kind = "correlation",
             convention: Convention | None = None) -> Protocol:
    """Measurement sets on every time but the last, then a projective z measurement."""
    ms = builtin_set(_SETS[kind])
    chans = channels(theta, n_times, convention)
    steps = [Step(ms)] + [Step(ms, c) for c in chans]
    return Protocol(initial_state(), tuple(steps), final_projective=True)


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def correlation_weights(n_times: int) -> tuple[WeightVector, ...]:
    """gamma(Z) for the zy set, then the projective gamma(Z) = (1, -1)."""
    mid = weights_for(builtin_set("zy"), "Z")
    last = weights_for(builtin_set("z"), "Z", mode="final")
    return (mid,) * (n_times - 1) + (last,)


@lru_cache(maxsize=None)
def qpd_weights(n_times: int, kind: Kind = "qpd") -> tuple[tuple[WeightVector, ...], ...]:
    """Per time, gamma(P_0) and gamma(P_1)."""
    last_set = builtin_set("z")
    last = tuple(weights_for(last_set, f"P{i}", mode="final") for i in range(2))
    if kind == "projective":
        return (last,) * n_times
    ms = builtin_set(_SETS[kind])
    mid = tuple(weights_for(ms, f"P{i}") for i in range(2))
    return (mid,) * (n_times - 1) + (last,)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def correlation_exact(theta: float, n_times: int, convention: Convention | None = None) -> complex:
    z = named_observable("Z")
    return exact_correlation(initial_state(), [z] * n_times, channels(theta, n_times, convention))


def qpd_exact(theta: float, n_times: int, convention: Convention | None = None) -> QpdTable:
    projs = [basis_projectors(2)] * n_times
    return exact_qpd(initial_state(), projs, channels(theta, n_times, convention))


def lgi_exact(theta: float, convention: Convention | None = None):
    return lgi_k(qpd_exact(theta, 3, convention))


def lgi_closed_form(theta: float) -> float:
    """K for the selected convention: -sin(theta^2) - cos(theta) cos(theta^2)."""
    return -np.sin(theta**2) - np.cos(theta) * np.cos(theta**2)


def noisy_qpd(theta: float, n_times: int, noise: NoiseModel, use_ms_decomposition: bool = True,
              convention: Convention | None = None) -> QpdTable:
    """Exact expectation of the QPD estimator under a noisy explicit circuit."""
    dist = explicit_circuit_distribution(protocol(theta, n_times, "qpd", convention),
                                         use_ms_decomposition, noise)
    return qpd_from_distribution(dist, qpd_weights(n_times))


def lgi_noisy(theta: float, noise: NoiseModel, convention: Convention | None = None):
    return lgi_k(noisy_qpd(theta, 3, noise, convention=convention))


def projective_qpd(theta: float, n_times: int, convention: Convention | None = None) -> QpdTable:
    """Joint distribution of plain projective z measurements at every time."""
    from .protocol import exact_distribution

    dist = exact_distribution(protocol(theta, n_times, "projective", convention))
    return QpdTable(dist.probs.astype(np.complex128))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def sampled_correlation(theta: float, n_times: int, n: int, seed: int,
                        noise: NoiseModel | None = None, convention: Convention | None = None) -> Estimate:
    records = sample(protocol(theta, n_times, "correlation", convention), n, seed, noise=noise)
    return estimate_correlation(records, correlation_weights(n_times))


def sampled_qpd(theta: float, n_times: int, n: int, seed: int,
                noise: NoiseModel | None = None, convention: Convention | None = None) -> QpdTable:
    records = sample(protocol(theta, n_times, "qpd", convention), n, seed, noise=noise)
    return estimate_qpd(records, qpd_weights(n_times))


def grid_seed(seed: int, index: int, tag: int = 0) -> int:
    return derive_seed(seed, tag, index)
