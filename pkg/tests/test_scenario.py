from __future__ import annotations

import numpy as np
import pytest

from ancillaqpd import scenario
from ancillaqpd.estimate import marginal
from ancillaqpd.protocol import NoiseModel
from ancillaqpd.report import fig3_report, negative_entries

# exact oracle values under each reading of R_y at theta = 0.74 pi
K_MIRRORED = 1.2067431868942
K_LITERAL = -0.3329361927314


def test_convention_scores():
    scores = scenario.convention_scores()
    assert scores["mirrored"] == pytest.approx(K_MIRRORED, abs=1e-12)
    assert scores["literal"] == pytest.approx(K_LITERAL, abs=1e-12)
    assert scenario.select_ry_convention() == "mirrored"


def test_closed_form_over_grid():
    for th in scenario.default_grid():
        assert scenario.lgi_exact(th).k == pytest.approx(scenario.lgi_closed_form(th), abs=1e-12)


def test_negativity_location_by_convention():
    q_m = scenario.qpd_exact(scenario.THETA_STAR_3, 3, "mirrored")
    q_l = scenario.qpd_exact(scenario.THETA_STAR_3, 3, "literal")
    assert negative_entries(q_m) == [(0, 0, 1), (1, 0, 1)]
    assert negative_entries(q_l) == [(0, 1, 0), (1, 1, 0)]


def test_projective_baseline_is_balanced():
    for th in np.linspace(0, np.pi, 9):
        m = marginal(scenario.projective_qpd(th, 3), 2).probs
        assert np.allclose(m, 0.5, atol=1e-12)


def test_noisy_k_scales_with_depolarizing():
    k0 = scenario.lgi_exact(scenario.THETA_STAR_3).k
    for p in (0.02, 0.05, 0.1):
        k = scenario.lgi_noisy(scenario.THETA_STAR_3, NoiseModel(entangling_depolarizing_p=p)).k
        assert k == pytest.approx((1 - p) ** 2 * k0, abs=1e-12)


def test_paper_preset_calibration():
    noise = NoiseModel.paper_preset(3)
    assert noise.entangling_depolarizing_p == pytest.approx(0.08)
    assert noise.readout_confusion[0][0, 0] == pytest.approx(0.989)
    assert noise.readout_confusion[2][0, 0] == pytest.approx(0.984)


def test_report_flags_and_determinism():
    grid = np.linspace(0, np.pi, 9)
    a = fig3_report(100, 0, grid)
    b = fig3_report(100, 0, grid)
    assert a.to_dict() == b.to_dict()
    names = {f.criterion.split(":")[0] for f in a.flags}
    assert {"C3", "C5", "C6", "C7", "C8", "C9"} <= names
    flags = {f.criterion.split(":")[0]: f.passed for f in a.flags if f.criterion.startswith("C")}
    assert flags["C8"] and flags["C9"] and flags["C3"]
    assert set(a.tables) == {"3a", "3b", "3c", "3d", "3e", "3f"}
    assert any("t2" in note and "t3" in note for note in a.notes)
