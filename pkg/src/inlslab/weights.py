"""Radial Morawetz weight a(r) = c_a R^2 w(r/R) built from a smooth cutoff.

The cutoff phi is 1 on [0, 1/2], 0 on [1, inf) and a C^3 septic smoothstep
in between, so a has four continuous derivatives and the bilaplacian is
well defined.  All antiderivatives are exact polynomial integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial as P

# C^3 smoothstep 35t^4 - 84t^5 + 70t^6 - 20t^7 on t in [0, 1]
_SMOOTHSTEP = P([0, 0, 0, 0, 35, -84, 70, -20])


def _pieces():
    # polynomials in t = 2s - 1 on the transition shell s in [1/2, 1]; ds = dt / 2
    phi_mid = 1 - _SMOOTHSTEP
    w1_mid = 0.5 * phi_mid.integ(lbnd=0, k=1.0)      # omega'(s), omega'(1/2) = 1/2
    w0_mid = 0.5 * w1_mid.integ(lbnd=0, k=0.25)      # omega(s),  omega(1/2) = 1/8
    return phi_mid, w1_mid, w0_mid


_PHI_MID, _W1_MID, _W0_MID = _pieces()
_W1_END = float(_W1_MID(1.0))
_W0_END = float(_W0_MID(1.0))


def _t(s):
    return 2.0 * np.clip(s, 0.5, 1.0) - 1.0


def cutoff(s: np.ndarray, deriv: int = 0) -> np.ndarray:
    """phi(s) and its derivatives."""
    s = np.asarray(s, dtype=float)
    core = 1.0 if deriv == 0 else 0.0
    mid = _PHI_MID.deriv(deriv) * 2.0**deriv if deriv else _PHI_MID
    return np.where(s <= 0.5, core, np.where(s >= 1.0, 0.0, mid(_t(s))))


def omega(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    mid = _W0_MID(_t(s))
    outer = _W0_END + _W1_END * (s - 1.0)
    return np.where(s <= 0.5, 0.5 * s * s, np.where(s >= 1.0, outer, mid))


def omega_prime(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.where(s <= 0.5, s, np.where(s >= 1.0, _W1_END, _W1_MID(_t(s))))


@dataclass(frozen=True)
class MorawetzWeight:
    """a(x) = c_a R^2 omega(|x|/R); ``R = inf`` gives the pure weight a = c_a |x|^2 / 2."""

    R: float
    scale: float = 2.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")

    @classmethod
    def quadratic(cls) -> "MorawetzWeight":
        return cls(math.inf)

    @property
    def is_quadratic(self) -> bool:
        return math.isinf(self.R)

    def a(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_quadratic:
            return 0.5 * self.scale * r * r
        return self.scale * self.R**2 * omega(r / self.R)

    def da(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_quadratic:
            return self.scale * r
        return self.scale * self.R * omega_prime(r / self.R)

    def d2a(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_quadratic:
            return np.full_like(r, self.scale)
        return self.scale * cutoff(r / self.R)

    def d3a(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_quadratic:
            return np.zeros_like(r)
        return self.scale * cutoff(r / self.R, 1) / self.R

    def d4a(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_quadratic:
            return np.zeros_like(r)
        return self.scale * cutoff(r / self.R, 2) / self.R**2

    def da_over_r(self, r):
        """a'(r) / r, finite at r = 0."""
        r = np.asarray(r, dtype=float)
        if self.is_quadratic:
            return np.full_like(r, self.scale)
        s = r / self.R
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.scale * omega_prime(s) / s
        return np.where(s <= 0.5, self.scale, out)

    def laplacian(self, r):
        return self.d2a(r) + 2.0 * self.da_over_r(r)

    def bilaplacian(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.d4a(r) + 4.0 * self.d3a(r) / r
        return np.where(r > 0, out, 0.0)

    def gradient(self, x, y, z):
        """Cartesian components of grad a = (a'/r) x."""
        f = self.da_over_r(np.sqrt(x * x + y * y + z * z))
        return f * x, f * y, f * z


def morawetz_weight(R: float, scale: float = 2.0) -> MorawetzWeight:
    return MorawetzWeight(R, scale)
