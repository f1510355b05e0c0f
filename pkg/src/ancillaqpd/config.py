"""Strict JSON run configuration.

Example::

    {
      "dim": 2,
      "initial": "plus",
      "steps": [
        {"set": "zy"},
        {"set": "z", "channel": {"kind": "rotation", "theta": 0.9424777960769379, "phi": 0.0}}
      ],
      "final_projective": true,
      "estimator": {"kind": "correlation", "observables": ["Z", "Z"]},
      "n_trajectories": 1000,
      "seed": 7
    }

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .io import complex_matrix
from .povm import MeasurementSet, builtin_set
from .protocol import NoiseModel, Protocol, Step
from .qmodel import Channel, DensityMatrix, depolarizing_channel, named_observable, rotation_gate
from .weights import WeightVector, weights_for


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Complex = tuple[float, float]
MatrixSpec = list[list[Complex]]


class ChannelSpec(_Strict):
    kind: Literal["identity", "rotation", "unitary", "kraus", "depolarizing"]
    theta: Optional[float] = None
    phi: Optional[float] = None
    matrix: Optional[MatrixSpec] = None
    operators: Optional[list[MatrixSpec]] = None
    p: Optional[float] = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        needed = {"rotation": ["theta"], "unitary": ["matrix"], "kraus": ["operators"], "depolarizing": ["p"]}
        allowed = {"identity": set(), "rotation": {"theta", "phi"}, "unitary": {"matrix"},
                   "kraus": {"operators"}, "depolarizing": {"p"}}
        for f in needed.get(self.kind, []):
            if getattr(self, f) is None:
                raise ValueError(f"channel kind {self.kind!r} requires {f!r}")
        for f in ("theta", "phi", "matrix", "operators", "p"):
            if getattr(self, f) is not None and f not in allowed[self.kind]:
                raise ValueError(f"channel kind {self.kind!r} does not take {f!r}")
        return self

    def build(self, dim: int) -> Channel:
        if self.kind == "identity":
            return Channel.identity(dim)
        if self.kind == "rotation":
            if dim != 2:
                raise ValueError("rotations are single-qubit gates")
            return rotation_gate(self.theta, self.phi or 0.0)
        if self.kind == "unitary":
            return Channel.from_unitary(complex_matrix(self.matrix))
        if self.kind == "kraus":
            return Channel("kraus", tuple(complex_matrix(k) for k in self.operators))
        if dim == 2:
            return depolarizing_channel(self.p, n_qubits=1)
        return depolarizing_channel(self.p, dim=dim)


class StepSpec(_Strict):
    set: Union[str, list[list[Complex]]]
    channel: Optional[ChannelSpec] = None

    def build_set(self) -> MeasurementSet:
        if isinstance(self.set, str):
            return builtin_set(self.set)
        kets = [np.array([complex(*a) for a in ket]) for ket in self.set]
        return MeasurementSet.from_kets(kets, "explicit")


class EstimatorSpec(_Strict):
    kind: Literal["correlation", "qpd"]
    observables: Optional[list[str]] = None

    @model_validator(mode="after")
    def _observables(self):
        if self.kind == "correlation" and not self.observables:
            raise ValueError("a correlation estimator needs 'observables'")
        if self.kind == "qpd" and self.observables is not None:
            raise ValueError("a qpd estimator takes no 'observables'")
        return self


class NoiseSpec(_Strict):
    entangling_depolarizing_p: float = Field(0.0, ge=0.0, le=1.0)
    readout_confusion: Optional[list[Optional[list[list[float]]]]] = None
    dephasing_p: float = Field(0.0, ge=0.0, le=1.0)

    def build(self) -> NoiseModel:
        return NoiseModel.from_dict(self.model_dump())


class OutputSpec(_Strict):
    trajectories: Optional[str] = None
    estimate: Optional[str] = None
    oracle: Optional[str] = None


class RunConfig(_Strict):
    dim: int = Field(2, ge=2, le=4)
    initial: Union[Literal["plus", "zero", "maximally_mixed"], MatrixSpec] = "plus"
    steps: list[StepSpec] = Field(min_length=1)
    final_projective: bool = False
    estimator: EstimatorSpec
    n_trajectories: int = Field(1000, ge=1)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    noise: Optional[NoiseSpec] = None
    use_ms_decomposition: bool = False
    outputs: Optional[OutputSpec] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.estimator.observables is not None and len(self.estimator.observables) != len(self.steps):
            raise ValueError("one observable per step is required")
        return self

    # -- construction -------------------------------------------------------

    def initial_state(self) -> DensityMatrix:
        if isinstance(self.initial, str):
            return DensityMatrix.named(self.initial, self.dim)
        return DensityMatrix(complex_matrix(self.initial))

    def to_protocol(self) -> Protocol:
        steps = []
        for s in self.steps:
            chan = s.channel.build(self.dim) if s.channel is not None else None
            steps.append(Step(s.build_set(), chan))
        return Protocol(self.initial_state(), tuple(steps), self.final_projective)

    def noise_model(self) -> NoiseModel | None:
        return self.noise.build() if self.noise is not None else None

    def correlation_weights(self) -> list[WeightVector]:
        p = self.to_protocol()
        out = []
        for n, (ms, name) in enumerate(zip(p.sets, self.estimator.observables)):
            mode = "final" if n == p.n_steps - 1 else "full"
            out.append(weights_for(ms, named_observable(name, self.dim), mode=mode))
        return out

    def qpd_weights(self) -> list[list[WeightVector]]:
        p = self.to_protocol()
        out = []
        for n, ms in enumerate(p.sets):
            mode = "final" if n == p.n_steps - 1 else "full"
            out.append([weights_for(ms, f"P{i}", mode=mode) for i in range(self.dim)])
        return out

    # -- serialization ------------------------------------------------------

    def dumps(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True)


def parse_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def fig3_config(theta: float, n_times: int, kind: str = "correlation", n: int = 100, seed: int | None = None,
                convention: str | None = None) -> RunConfig:
    """Config for the trapped-ion scenario at one theta."""
    from . import scenario

    conv = convention or scenario.select_ry_convention()
    set_name = {"correlation": "zy", "qpd": "zyx"}[kind]
    steps = [{"set": set_name}, {"set": set_name, "channel": {"kind": "rotation", "theta": theta, "phi": 0.0}}]
    if n_times == 3:
        steps.append({"set": set_name, "channel": {"kind": "rotation", "theta": theta**2,
                                                   "phi": float(scenario.RY_PHI[conv])}})
    est = {"kind": "correlation", "observables": ["Z"] * n_times} if kind == "correlation" else {"kind": "qpd"}
    return RunConfig.model_validate({
        "dim": 2, "initial": "plus", "steps": steps[:n_times], "final_projective": True,
        "estimator": est, "n_trajectories": n, "seed": seed,
    })


__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "fig3_config"]
