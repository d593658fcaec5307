import math

import numpy as np
import pytest

from inlslab.grid import RadialField, RadialGrid
from inlslab.potential import PotentialSpec
from inlslab.radial import RadialCollapseConfig, SinhMesh, evolve_radial


def test_sinh_mesh_geometry():
    m = SinhMesh(20.0, 2000, 1e-3)
    assert m.h0 == pytest.approx(1e-3, rel=1e-6)
    assert np.all(np.diff(m.spacing) > 0)
    assert m.r[-1] < 20.0


def test_mesh_quadrature_and_resample():
    m = SinhMesh(20.0, 4000, 1e-2)
    u = np.exp(-m.r**2)
    assert m.integrate(u) == pytest.approx(math.pi**1.5, rel=1e-5)
    fine = SinhMesh(20.0, 4000, 1e-3)
    back = m.resample(fine, u * m.r) / fine.r
    assert np.max(np.abs(back - np.exp(-fine.r**2))) < 1e-5


def test_linear_free_gaussian():
    cfg = RadialCollapseConfig(n_nodes=4000, r_max=30.0, resolution=50, dt0=1e-3, t_end=0.5,
                               nonlinearity_on=False)
    run = evolve_radial(lambda r: np.exp(-r**2 / 2), 0.5, 3.0, cfg=cfg)
    a = 1 + 2j * 0.5
    want = a ** -1.5 * np.exp(-run.r_final**2 / (2 * a))
    assert np.max(np.abs(run.u_final - want)) < 1e-4
    assert run.mass_drift < 1e-12
    assert run.blowup is None


def test_collapse_above_threshold(gs_half):
    run = evolve_radial(RadialField(gs_half.profile.grid, 1.5 * gs_half.profile.samples), 0.5, 3.0)
    assert run.blowup is not None
    assert run.max_grad_growth > 1e3
    assert run.t_final < 5.0
    assert run.remeshes > 0
    assert run.mass_drift < 1e-3


def test_below_threshold_disperses(gs_half):
    cfg = RadialCollapseConfig(t_end=1.0)
    run = evolve_radial(RadialField(gs_half.profile.grid, 0.5 * gs_half.profile.samples), 0.5, 3.0, cfg=cfg)
    assert run.blowup is None
    assert run.sup_norm[-1] < 0.2 * run.sup_norm[0]


def test_radial_tracker_needs_radial_potential():
    with pytest.raises(ValueError):
        evolve_radial(lambda r: np.exp(-r**2), 0.5, 3.0, PotentialSpec.gaussian(1.0, center=(1, 0, 0)))


def test_config_validation():
    with pytest.raises(ValueError):
        RadialCollapseConfig(n_nodes=4)
    with pytest.raises(ValueError):
        RadialCollapseConfig(resolution=1.0)
