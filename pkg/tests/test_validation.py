import json

import numpy as np
import pytest

from irsjam.validation import GammaReport, ball_extremum, gamma_oracle_report


def test_ball_extremum_known_cases():
    # |x_1|^2 with x_1 = 0.5 + d: extremes 1.5^2 and 0 over |d| <= 1
    A = np.diag([1.0, 0.0])
    v = np.array([0.5, 1.0])
    assert ball_extremum(A, v, 1.0, "max") == pytest.approx(2.25, rel=1e-9)
    assert ball_extremum(A, v, 1.0, "min") == pytest.approx(0.0, abs=1e-9)
    assert ball_extremum(A, v, 0.0, "max") == pytest.approx(0.25)


def test_small_report(tmp_path):
    rep = gamma_oracle_report(n_instances=3, n_samples=500, radii=(1e-3,))
    assert isinstance(rep, GammaReport)
    assert len(rep.records) == 3 * 2 * 4
    assert rep.all_bounds_hold
    s = rep.summary()
    assert set(s) == {"beam-max-xi=0.001", "beam-min-xi=0.001", "phase-max-xi=0.001", "phase-min-xi=0.001"}
    rep.dump(tmp_path / "g.json")
    doc = json.loads((tmp_path / "g.json").read_text())
    assert doc["all_bounds_hold"] is True and len(doc["records"]) == 24
    # the stress set shows the printed forms crossing the true extremes
    ident = [r for r in rep.stress if r.stage == "identity"]
    assert {r.direction: r.closed_form for r in ident} == pytest.approx({"max": 4.0, "min": 0.0})
    assert not all(r.literal_ok for r in ident)
