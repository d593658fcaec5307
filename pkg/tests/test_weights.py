import numpy as np
import pytest
from hypothesis import given, strategies as st

from inlslab.weights import MorawetzWeight, cutoff, omega, omega_prime


def test_cutoff_values():
    s = np.array([0.0, 0.25, 0.5, 1.0, 2.0])
    assert np.allclose(cutoff(s), [1, 1, 1, 0, 0])
    mid = np.linspace(0.5, 1.0, 101)
    assert np.all(np.diff(cutoff(mid)) <= 0)


def test_cutoff_derivatives_continuous():
    for d in (1, 2, 3):
        for edge in (0.5, 1.0):
            assert cutoff(np.array([edge - 1e-9]), d)[0] == pytest.approx(cutoff(np.array([edge + 1e-9]), d)[0], abs=1e-3)


def test_omega_is_double_integral_of_cutoff():
    s = np.linspace(0, 1.5, 30001)
    phi = cutoff(s)
    w1 = np.concatenate([[0.0], np.cumsum(0.5 * (phi[1:] + phi[:-1]) * np.diff(s))])
    assert np.max(np.abs(w1 - omega_prime(s))) < 1e-8
    w0 = np.concatenate([[0.0], np.cumsum(0.5 * (w1[1:] + w1[:-1]) * np.diff(s))])
    assert np.max(np.abs(w0 - omega(s))) < 1e-8


@given(st.floats(0.5, 20.0))
def test_weight_is_quadratic_on_core(R):
    w = MorawetzWeight(R)
    r = np.linspace(0, R / 2, 50)
    assert np.allclose(w.a(r), r**2)
    assert np.allclose(w.laplacian(r), 6.0)
    assert np.allclose(w.bilaplacian(r[1:]), 0.0, atol=1e-12)


@given(st.floats(0.5, 20.0))
def test_weight_bounds(R):
    w = MorawetzWeight(R)
    r = np.linspace(1e-3, 3 * R, 400)
    d2 = w.d2a(r)
    assert np.all(d2 >= -1e-14) and np.all(d2 <= 2 + 1e-14)
    assert np.all(w.da(r) >= 0)
    assert np.all(w.laplacian(r) >= -1e-14)


def test_quadratic_weight():
    w = MorawetzWeight.quadratic()
    r = np.array([0.5, 2.0])
    assert np.allclose(w.a(r), r**2)
    assert np.allclose(w.da_over_r(r), 2.0)
    assert w.is_quadratic


def test_gradient_matches_derivative():
    w = MorawetzWeight(4.0)
    x, y, z = np.array([1.5]), np.array([-2.0]), np.array([0.7])
    r = np.sqrt(x * x + y * y + z * z)
    gx, gy, gz = w.gradient(x, y, z)
    assert np.sqrt(gx**2 + gy**2 + gz**2)[0] == pytest.approx(w.da(r)[0])


def test_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        MorawetzWeight(0.0)
