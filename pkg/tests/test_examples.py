"""Example-level properties of the PDE runs (shared with the acceptance runs)."""

import numpy as np
import pytest

from mbl.solver import diagnostics

PLATEAU_KINDS = ("Monotone plateau", "Non-monotone plateau")
PRESETS_1_5 = ["example1", "example2", "example3",
               "example4-vt-1.0", "example4-vt-0.6", "example4-vt-0.4", "example4-vt-0.1",
               "example5-u0-0", "example5-u0-0.1", "example5-u0-0.2", "example5-u0-0.25"]


@pytest.mark.parametrize("name", PRESETS_1_5)
def test_predicted_and_observed_features_agree(runs, name):
    res, _ = runs.get(name)
    lead = res.predictions[-1]
    d = res.diagnostics
    assert d.morphology == lead.result.description.value
    assert (d.plateau_height is not None) == lead.expects_plateau
    # only a basin below both neighbouring levels is observable as a flat run
    expects_basin = any(p.result.description.value == "Non-monotone basin"
                        for p in res.predictions)
    assert (d.basin_height is not None) == expects_basin


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
def test_front_moves_at_the_shock_speed(runs, name):
    res, _ = runs.get(name)
    s = res.series
    T = res.config.T
    pts = [(t, diagnostics(x, u).front_position)
           for t, x, u in zip(s.times, s.x, s.u) if t >= 0.5 * T - 1e-12]
    t, xf = np.array(pts).T
    speed = np.polyfit(t, xf, 1)[0]
    assert speed == pytest.approx(res.predictions[-1].result.s, rel=0.02)


def test_plateau_slope_matches_travelling_wave(runs):
    res, _ = runs.get("example4-vt-1.0")
    assert res.slope_comparison["ratio"] == pytest.approx(1.0, abs=0.05)


def test_full_model_smoke_run(runs):
    res, elapsed = runs.get("example6-smoke")
    q = res.quality
    assert res.series.final.t == pytest.approx(35.0)
    assert q["min_dx"] > 0
    assert 2 / 3 * 0.95 <= q["min_ratio"] and q["max_ratio"] <= 1.5 * 1.05
    assert q["max_mass_defect"] <= 10 * res.config.rtol
    assert q["max_clip"] <= 1e-6
    d = res.diagnostics
    # the front has left the inflow boundary and overshoots the boundary value
    assert 0.0 < d.front_position < 0.1
    assert res.series.u[-1].max() > res.config.initial.u_B
