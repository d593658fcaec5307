import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, strategies as st

from inlslab import classify as cl
from inlslab import diagnostics as dg
from inlslab.grid import Field3, Grid3
from inlslab.ground_state import solve_ground_state
from inlslab.potential import PotentialSpec
from inlslab.propagator import EvolveConfig, evolve, split_step_soliton

G = Grid3(64, 16.0)


def gaussian(grid, amp=1.0, width=1.0, c=(0.0, 0.0, 0.0), v=0.0):
    x, y, z = grid.coords
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    return Field3(grid, np.broadcast_to(amp * np.exp(-r2 / (2 * width**2) + 1j * v * x), grid.shape))


@pytest.fixture(scope="module")
def soliton_run(gs_cubic):
    g = Grid3(32, 16.0)
    q = split_step_soliton(gs_cubic.embed(g), 0.0, 3.0, 1e-2)
    diag = dg.Diagnostics(g, PotentialSpec.zero(), 0.0, 3.0, local_radii=(4.0,), evacuation_radii=(1.0, 2.0))
    return evolve(q, PotentialSpec.zero(), (0.0, 3.0),
                  EvolveConfig(dt=1e-2, t_end=2.0, record_every=5, snapshot_times=(0.25, 0.5, 1.0, 2.0)), diag)


# thresholds ------------------------------------------------------------------------

def test_half_Q_predicts_scattering(gs_half):
    rep = cl.dichotomy_report(gs_half.embed(G, 0.5), PotentialSpec.zero(), gs_half)
    sigma = (1 - rep.s_c) / rep.s_c
    assert rep.s_c == pytest.approx(0.75)
    assert rep.ratio_grad_plain == pytest.approx(0.5 ** (1 + sigma), rel=1e-12)
    assert rep.ratio_grad == pytest.approx(rep.ratio_grad_plain, rel=1e-12)
    assert rep.prediction == "global_scattering"
    assert all(rep.hypotheses.values())


def test_Q_itself_is_indeterminate(gs_half):
    rep = cl.dichotomy_report(gs_half.embed(G), PotentialSpec.zero(), gs_half)
    assert rep.ratio_grad_plain == pytest.approx(1.0, abs=1e-12)
    assert rep.prediction == "indeterminate"
    assert any("threshold" in r for r in rep.reasons)


def test_continuum_reference_reports_embedding_error(gs_half):
    rep = cl.dichotomy_report(gs_half.embed(G, 0.5), PotentialSpec.zero(), gs_half, grid_reference=False)
    assert rep.q_embedding_error > 0.01
    assert rep.boundary_band == pytest.approx(rep.q_embedding_error)
    assert rep.prediction == "global_scattering"


@given(st.floats(0.6, 1.6))
def test_scaling_covariance(lam):
    gs = half_gs()
    b, p = gs.b, gs.p
    g = Grid3(64, 16.0)
    u = gaussian(g, 0.8, 1.0)
    scaled = Field3(g, lam ** ((2 - b) / (p - 1)) * np.exp(-(lam * g.r) ** 2 / 2) * 0.8 + 0j)
    a = cl.dichotomy_report(u, PotentialSpec.zero(), gs, admissibility=_PASS)
    s = cl.dichotomy_report(scaled, PotentialSpec.zero(), gs, admissibility=_PASS)
    assert s.ratio_grad_plain == pytest.approx(a.ratio_grad_plain, rel=1e-6)


@lru_cache(maxsize=None)
def half_gs():
    # hypothesis tests cannot take function-scoped fixtures
    return solve_ground_state(0.5, 3.0)


class _Pass:
    in_K0_cap_L32 = nonneg = repulsive = negative_part_below_4pi = theorem_hypotheses = True


_PASS = _Pass()


@given(st.floats(0.0, 2 * math.pi), st.integers(-6, 6), st.integers(-6, 6))
def test_phase_and_translation_invariance(theta, i, j):
    gs = half_gs()
    g = Grid3(32, 16.0)
    shift = (i * g.dx, j * g.dx, 0.0)
    V = PotentialSpec.gaussian(1.0)
    u = gaussian(g, 0.7, 1.2, v=0.5)
    moved = gaussian(g, 0.7, 1.2, c=shift, v=0.5) * np.exp(1j * theta)
    a = cl.dichotomy_report(u, V, gs, admissibility=_PASS)
    b = cl.dichotomy_report(moved, V.translated(shift), gs, admissibility=_PASS)
    for name in ("ratio_grad", "ratio_grad_plain"):
        # shifted tails wrap through the periodic box at the 1e-9 level
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-7)
    # |x|^-b is pinned to the origin, so the energy ratio only has the phase symmetry
    rotated = cl.dichotomy_report(u * np.exp(1j * theta), V, gs, admissibility=_PASS)
    assert rotated.ratio_mass_energy == pytest.approx(a.ratio_mass_energy, rel=1e-12)


@given(st.floats(0.0, 4.0))
def test_ratios_nonnegative_and_no_blowup_claims(c):
    gs = half_gs()
    u = gaussian(Grid3(32, 16.0), c, 1.0)
    rep = cl.dichotomy_report(u, PotentialSpec.zero(), gs, admissibility=_PASS)
    assert rep.ratio_grad >= 0 and rep.ratio_grad_plain >= 0 and rep.ratio_mass_energy >= 0
    assert rep.prediction in cl.PREDICTIONS
    if rep.energy <= 0:
        assert rep.ratio_mass_energy == 0.0


def test_failed_hypotheses_downgrade(gs_half):
    V = PotentialSpec.gaussian(-3.0)
    rep = cl.dichotomy_report(gs_half.embed(G, 0.3), V, gs_half)
    assert rep.ratio_grad < 1
    assert rep.prediction == "indeterminate"
    assert not rep.hypotheses["negative_part_below_4pi"]
    assert any("hypotheses on V fail" in r for r in rep.reasons)


# detector -------------------------------------------------------------------------------

@pytest.mark.parametrize("V", [PotentialSpec.zero(), PotentialSpec.gaussian(1.0)])
def test_linear_run_pullbacks_are_constant(V):
    g = Grid3(32, 16.0)
    dt = 1e-2
    tr = evolve(gaussian(g, 1.0, 1.0, v=0.5), V, (0.5, 3.0),
                EvolveConfig(dt=dt, t_end=2.0, nonlinearity_on=False, snapshot_times=(0.25, 0.5, 1.0, 2.0)))
    ver = cl.scattering_detector(tr, V, cl.DetectorConfig(pullback_dt=dt))
    assert len(ver.cauchy_differences) == 3
    assert max(ver.cauchy_differences) < 1e-8
    assert ver.u_plus is not None


def test_soliton_is_not_scattering(soliton_run):
    ver = cl.scattering_detector(soliton_run, PotentialSpec.zero(), cl.DetectorConfig(radius=4.0))
    assert ver.verdict == "inconclusive"
    assert ver.total_decay < 10
    m = soliton_run.records[0].mass
    assert ver.local_mass_infimum > 0.9 * m


def test_blowup_signal_forces_blowup_verdict():
    g = Grid3(32, 16.0)
    tr = evolve(gaussian(g, 3.0, 1.0), PotentialSpec.zero(), (0.5, 3.0),
                EvolveConfig(dt=1e-3, t_end=0.5, max_grad_growth=1.05, snapshot_times=(0.25, 0.5)))
    assert tr.blowup is not None
    ver = cl.scattering_detector(tr, PotentialSpec.zero())
    assert ver.verdict == "blowup"
    assert ver.reasons[0].startswith("propagator signal")


def test_too_few_samples_is_inconclusive():
    g = Grid3(32, 16.0)
    tr = evolve(gaussian(g, 0.5), PotentialSpec.zero(), (0.5, 3.0),
                EvolveConfig(dt=1e-2, t_end=0.5, snapshot_times=(0.5,)))
    ver = cl.scattering_detector(tr, PotentialSpec.zero())
    assert ver.verdict == "inconclusive"
    assert ver.local_mass_radius == pytest.approx(2.0)
    assert "pullback" in ver.reasons[0]


def test_verdict_serialises():
    v = cl.ScatterVerdict([1, 2, 4], [0.4, 0.1], None, 0.0, 2.0, 0.1, "inconclusive")
    d = v.to_dict()
    assert d["decay_ratios"] == [4.0] and d["total_decay"] == 4.0


# Morawetz, evacuation, Hoelder --------------------------------------------------------------

def test_morawetz_soliton_is_constant(soliton_run):
    vals = [cl.morawetz_average(soliton_run, 2.0, T) for T in (0.25, 0.5, 1.0, 2.0)]
    assert max(vals) / min(vals) - 1 < 1e-6
    assert cl.morawetz_average(soliton_run, 4.0, 1.0) >= cl.morawetz_average(soliton_run, 2.0, 1.0) >= 0
    with pytest.raises(ValueError):
        cl.morawetz_average(soliton_run, 2.0, 3.0)


def test_evacuation_scan():
    g = Grid3(64, 32.0)
    diag = dg.Diagnostics(g, PotentialSpec.zero(), 0.5, 3.0, evacuation_radii=(1.0, 1.5, 2.0, 2.5))
    tr = evolve(gaussian(g), PotentialSpec.zero(), (0.5, 3.0),
                EvolveConfig(dt=5e-2, t_end=8.0, nonlinearity_on=False, record_every=2), diag)
    scan = cl.evacuation_scan(tr, (1.0, 1.5, 2.0))
    vals = scan.values()
    assert not scan.partial
    assert vals[0] > vals[1] > vals[2] > 0
    assert all(0 <= t <= R**3 for t, R, _ in scan.entries)
    assert cl.evacuation_scan(tr, (2.5,)).partial


def test_evacuation_scan_soliton_bounded_below(soliton_run):
    scan = cl.evacuation_scan(soliton_run, (1.0, 2.0))
    assert min(scan.values()) > 0.5 * soliton_run.records[0].evacuation[1.0]


def test_evacuation_of_zero_field_is_zero():
    g = Grid3(16, 10.0)
    zero = Field3(g, np.zeros(g.shape, complex))
    tr = evolve(zero, PotentialSpec.zero(), (0.5, 3.0), EvolveConfig(dt=0.1, t_end=1.0, snapshot_times=(0.5, 1.0)))
    assert cl.evacuation_scan(tr, (1.0, 2.0)).values() == [0.0, 0.0]
    assert cl.final_holder_check(zero, 1.0, 2.0, 0.5, 3.0) == (0.0, 0.0)


def test_holder_exponent_and_constant():
    assert cl.holder_exponent(0.5, 3.0) == pytest.approx(7 / 4)
    assert cl.holder_constant(0.5, 3.0) == pytest.approx(math.sqrt(4 * math.pi / 3.5))
    with pytest.raises(ValueError):
        cl.final_holder_check(gaussian(Grid3(16, 10.0)), 2.0, 1.0, 0.5, 3.0)


@given(st.floats(0.2, 2.0), st.floats(0.3, 1.0), st.floats(0.0, 0.9), st.floats(2.0, 4.0))
def test_holder_inequality_on_bumps(amp, R, b, p):
    g = Grid3(32, 8.0)
    u = gaussian(g, amp, 0.4 * R)
    lhs, rhs = cl.final_holder_check(u, R, R, b, p)
    assert 0 < lhs <= 1.02 * cl.holder_constant(b, p) * rhs
