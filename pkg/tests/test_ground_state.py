import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from inlslab.grid import Grid3, fft3, grad_norm_sq_parseval, l2_norm
from inlslab.ground_state import (BracketError, GroundState, OutsideWindowWarning, critical_index, energy0_simpson,
                                  pohozaev_residuals, refine_on_grid, solve_ground_state, threshold_constants)


def test_critical_index_values():
    assert critical_index(0.0, 3.0) == 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideWindowWarning)
        assert critical_index(0.5, 1 + (4 - 1.0) / 3) == pytest.approx(0.0, abs=1e-15)
        assert critical_index(0.5, 5 - 1.0) == pytest.approx(1.0)


def test_critical_index_warns_outside_window():
    with pytest.warns(OutsideWindowWarning):
        critical_index(0.0, 6.0)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_critical_index_inside_window(b, frac):
    lo, hi = 1 + (4 - 2 * b) / 3, 5 - 2 * b
    s = critical_index(b, lo + frac * (hi - lo))
    assert 0 < s < 1


@pytest.mark.parametrize("fixture", ["gs_cubic", "gs_half"])
def test_pohozaev_and_shape(fixture, request):
    gs = request.getfixturevalue(fixture)
    r1, r2 = pohozaev_residuals(gs)
    assert r1 < 1e-6 and r2 < 1e-6
    q = gs.profile.samples
    assert np.all(q > 0) and np.all(np.diff(q) < 0)
    assert q[-1] < 1e-8 * gs.amplitude


def test_cubic_ground_state_known_values(gs_cubic):
    # Q(0) = 4.33738... for the cubic 3D ground state; the two identities give |grad Q|^2 = 3 |Q|^2
    assert gs_cubic.amplitude == pytest.approx(4.33738768, rel=1e-7)
    assert gs_cubic.grad_norm_sq == pytest.approx(3 * gs_cubic.mass, rel=1e-6)


def test_pohozaev_detects_perturbation(gs_cubic):
    r = gs_cubic.radial_grid.r
    q = gs_cubic.profile.samples * (1 + 0.01 * r)
    dq = gs_cubic.dprofile * (1 + 0.01 * r) + 0.01 * gs_cubic.profile.samples
    bad = gs_cubic.with_profile(q, dq)
    assert max(pohozaev_residuals(bad)) > 1e-3


def test_far_field_log_slope(gs_half):
    # d/dr log Q + 1/r -> -1 for Q ~ C e^{-r}/r, checked where the profile is still integrated
    r = gs_half.radial_grid.r
    sel = (r > 6.0) & (r < min(gs_half.r_match, 12.0))
    assert sel.sum() > 100
    slope = gs_half.dprofile[sel] / gs_half.profile.samples[sel] + 1.0 / r[sel]
    assert np.max(np.abs(slope + 1.0)) < 0.05


def test_threshold_constants(gs_cubic):
    tc = threshold_constants(gs_cubic)
    assert tc.s_c == critical_index(0.0, 3.0)
    assert tc.K_grad > 0
    e_simpson = energy0_simpson(gs_cubic)
    want = e_simpson**tc.s_c * gs_cubic.mass ** (1 - tc.s_c)
    assert tc.K_mass_energy == pytest.approx(want, rel=1e-8)


def test_k_grad_refinement(gs_half):
    fine = solve_ground_state(0.5, 3.0, m=2**17)
    assert threshold_constants(fine).K_grad == pytest.approx(threshold_constants(gs_half).K_grad, rel=1e-4)


def test_embedding_reproduces_norms(gs_cubic):
    g = Grid3(64, 16.0)
    q = gs_cubic.embed(g)
    assert l2_norm(q) ** 2 == pytest.approx(gs_cubic.mass, rel=1e-3)
    assert grad_norm_sq_parseval(g, fft3(q.values)) == pytest.approx(gs_cubic.grad_norm_sq, rel=1e-3)


def test_embedding_error_shrinks_with_dx(gs_half):
    # the r^{2-b} cusp limits spectral convergence to an algebraic rate
    errs = []
    for n in (32, 64):
        g = Grid3(n, 8.0)
        q = gs_half.embed(g)
        errs.append(abs(grad_norm_sq_parseval(g, fft3(q.values)) / gs_half.grad_norm_sq - 1))
    assert errs[1] < errs[0] / 6


def test_outside_window_raises():
    with pytest.raises(BracketError):
        solve_ground_state(0.5, 4.5)
    with pytest.raises(ValueError):
        solve_ground_state(0.5, 3.0, tol=1e-3)


def test_json_round_trip(gs_cubic):
    back = GroundState.from_dict(gs_cubic.to_dict())
    assert back.amplitude == gs_cubic.amplitude
    assert np.array_equal(back.profile.samples, gs_cubic.profile.samples)


def test_refine_on_grid_solves_discrete_equation(gs_cubic):
    g = Grid3(32, 16.0)
    q = refine_on_grid(gs_cubic, g).values.real
    lhs = np.real(np.fft.ifftn((1 + g.k2) * np.fft.fftn(q)))
    assert np.max(np.abs(lhs - q**3)) < 1e-9 * np.max(q)
