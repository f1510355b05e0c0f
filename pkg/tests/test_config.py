from __future__ import annotations

import json

import numpy as np
import pytest

from ancillaqpd.config import ConfigError, fig3_config, parse_config
from ancillaqpd.protocol import exact_distribution

BASE = {
    "dim": 2,
    "initial": "plus",
    "steps": [{"set": "zy"}, {"set": "z", "channel": {"kind": "rotation", "theta": 0.5}}],
    "estimator": {"kind": "correlation", "observables": ["Z", "Z"]},
}


def _parse(**changes):
    doc = json.loads(json.dumps(BASE))
    doc.update(changes)
    return parse_config(json.dumps(doc))


def test_minimal_config():
    cfg = _parse()
    p = cfg.to_protocol()
    assert p.outcome_shape == (4, 2)
    assert cfg.seed is None


@pytest.mark.parametrize("bad", [
    {"thetaa": 1},
    {"steps": [{"set": "zy", "chanel": {"kind": "identity"}}]},
    {"steps": [{"set": "zy", "channel": {"kind": "rotation"}}]},
    {"steps": [{"set": "zy", "channel": {"kind": "identity", "theta": 1.0}}]},
    {"estimator": {"kind": "qpd", "observables": ["Z"]}},
    {"estimator": {"kind": "correlation", "observables": ["Z"]}},
    {"seed": -1},
])
def test_strict_schema(bad):
    with pytest.raises(ConfigError):
        _parse(**bad)


def test_invalid_json():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_explicit_matrices_and_kets():
    s = 1 / np.sqrt(2)
    cfg = _parse(
        initial=[[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]],
        steps=[
            {"set": [[[1, 0], [0, 0]], [[0, 0], [1, 0]], [[s, 0], [0, s]], [[s, 0], [0, -s]]]},
            {"set": "z", "channel": {"kind": "unitary", "matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}},
        ],
    )
    p = cfg.to_protocol()
    assert p.steps[0].set.alpha == pytest.approx(2)


def test_round_trip_gives_equivalent_protocol():
    cfg = fig3_config(0.74 * np.pi, 3, kind="qpd", n=500, seed=9)
    again = parse_config(cfg.dumps())
    assert again == cfg
    d1 = exact_distribution(cfg.to_protocol())
    d2 = exact_distribution(again.to_protocol())
    assert np.array_equal(d1.probs, d2.probs)


def test_weights_from_config():
    cfg = fig3_config(0.3 * np.pi, 2)
    w = cfg.correlation_weights()
    assert np.allclose(w[0].gammas, [2, -2, 2j, -2j], atol=1e-6)
    assert np.allclose(w[1].gammas, [1, -1])
    q = fig3_config(0.3 * np.pi, 2, kind="qpd").qpd_weights()
    assert len(q) == 2 and len(q[0]) == 2


def test_noise_spec():
    cfg = _parse(noise={"entangling_depolarizing_p": 0.08, "readout_confusion": [None, [[0.98, 0.02], [0.02, 0.98]]]})
    noise = cfg.noise_model()
    assert noise.entangling_depolarizing_p == 0.08
    assert noise.readout_confusion[0] is None
