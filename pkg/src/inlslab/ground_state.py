"""Radial ground state of  Q'' + (2/r) Q' - Q + r^-b Q^p = 0  by shooting.

The shooting amplitude Q(0) is bisected between a trajectory that crosses
zero and one that turns back upward.  Past the radius where the two
bracketing trajectories separate, the profile is continued with the exact
linear tail C e^-r / r.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp, simpson

from .grid import Field3, Grid3, RadialField, RadialGrid


class GroundStateError(RuntimeError):
    pass


class BracketError(GroundStateError):
    """No (cross, turn) bracket for the shooting amplitude: (b, p) outside the window."""


class StartRefinementError(GroundStateError):
    """The integrator failed close to r = 0."""


class OutsideWindowWarning(UserWarning):
    pass


def intercritical_window(b: float) -> tuple[float, float]:
    return 1.0 + (4.0 - 2.0 * b) / 3.0, 5.0 - 2.0 * b


def critical_index(b: float, p: float) -> float:
    if p <= 1:
        raise ValueError("p must exceed 1")
    lo, hi = intercritical_window(b)
    if not lo < p < hi:
        warnings.warn(
            f"p={p:g} is outside the intercritical window ({lo:g}, {hi:g}) for b={b:g}",
            OutsideWindowWarning,
            stacklevel=2,
        )
    return 1.5 - (2.0 - b) / (p - 1.0)


def _series(beta: float, b: float, p: float, r):
    """Second-order expansion of Q and Q' about r = 0."""
    bp1 = p * beta ** (p - 1.0)
    c10 = -beta**p / ((2 - b) * (3 - b))
    c01 = beta / 6.0
    e20 = 2.0 * (2 - b)
    c20 = -bp1 * c10 / (e20 * (e20 + 1))
    e11 = 4.0 - b
    c11 = (c10 - bp1 * c01) / (e11 * (e11 + 1))
    c02 = c01 / 20.0
    terms = ((c10, 2.0 - b), (c01, 2.0), (c20, e20), (c11, e11), (c02, 4.0))
    q = beta + sum(c * r**e for c, e in terms)
    dq = sum(c * e * r ** (e - 1) for c, e in terms)
    return q, dq


def _rhs(b, p):
    def f(r, y):
        q, dq = y
        return [dq, -2.0 * dq / r + q - r ** (-b) * abs(q) ** (p - 1) * q]

    return f


def _cross(r, y):
    return y[0]


_cross.terminal = True
_cross.direction = -1


def _turn(r, y):
    return y[1]


_turn.terminal = True
_turn.direction = 1


def _shoot(beta, b, p, r0, r_end, rtol, atol, dense=False):
    q0, dq0 = _series(beta, b, p, r0)
    sol = solve_ivp(
        _rhs(b, p), (r0, r_end), [q0, dq0], method="DOP853",
        rtol=rtol, atol=atol, events=[_cross, _turn], dense_output=dense,
    )
    if sol.status == -1:
        raise StartRefinementError(f"integration failed from r0={r0:g}: {sol.message}")
    if sol.t_events[0].size:
        return "cross", sol
    if sol.t_events[1].size:
        return "turn", sol
    return "decay", sol


@dataclass
class GroundState:
    b: float
    p: float
    profile: RadialField
    dprofile: np.ndarray = field(repr=False)
    amplitude: float
    mass: float
    grad_norm_sq: float
    nl_integral: float
    r_match: float = math.nan
    ode_residual: float = math.nan

    @property
    def radial_grid(self) -> RadialGrid:
        return self.profile.grid

    @property
    def energy0(self) -> float:
        """Energy without potential, E_0(Q) = |grad Q|^2/2 - N(Q)/(p+1)."""
        return 0.5 * self.grad_norm_sq - self.nl_integral / (self.p + 1.0)

    def embed(self, grid: Grid3, scale: float = 1.0, center=(0.0, 0.0, 0.0)) -> Field3:
        return self.profile.embed(grid, center) * scale

    def with_profile(self, q: np.ndarray, dq: np.ndarray) -> "GroundState":
        """Copy with replaced samples; norms are recomputed from them."""
        return _assemble(self.b, self.p, self.radial_grid, np.asarray(q), np.asarray(dq),
                         self.amplitude, self.r_match, math.nan)

    def to_dict(self) -> dict:
        g = self.radial_grid
        return {
            "b": self.b, "p": self.p, "r_max": g.r_max, "m": g.m,
            "amplitude": self.amplitude, "mass": self.mass,
            "grad_norm_sq": self.grad_norm_sq, "nl_integral": self.nl_integral,
            "r_match": self.r_match, "ode_residual": self.ode_residual,
            "profile": self.profile.samples.tolist(), "dprofile": self.dprofile.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundState":
        g = RadialGrid(d["r_max"], d["m"])
        return cls(
            b=d["b"], p=d["p"], profile=RadialField(g, np.asarray(d["profile"])),
            dprofile=np.asarray(d["dprofile"]), amplitude=d["amplitude"], mass=d["mass"],
            grad_norm_sq=d["grad_norm_sq"], nl_integral=d["nl_integral"],
            r_match=d["r_match"], ode_residual=d["ode_residual"],
        )


def _radial_norms(grid: RadialGrid, b, p, q, dq):
    r = grid.r
    mass = grid.integrate(q * q)
    grad = grid.integrate(dq * dq)
    nl = grid.integrate(r ** (-b) * np.abs(q) ** (p + 1))
    return mass, grad, nl


def _assemble(b, p, grid, q, dq, beta, r_match, resid) -> GroundState:
    mass, grad, nl = _radial_norms(grid, b, p, q, dq)
    return GroundState(b, p, RadialField(grid, q), dq, beta, mass, grad, nl, r_match, resid)


def _ode_residual(grid: RadialGrid, b, p, q, dq, beta, r_lo, r_hi) -> float:
    """Max of |Q'' + 2Q'/r - Q + r^-b Q^p| / Q(0) on [r_lo, r_hi], Q'' by 4th-order differences."""
    h, r = grid.h, grid.r
    d2 = (-dq[4:] + 8 * dq[3:-1] - 8 * dq[1:-3] + dq[:-4]) / (12.0 * h)
    rc, qc, dqc = r[2:-2], q[2:-2], dq[2:-2]
    res = d2 + 2.0 * dqc / rc - qc + rc ** (-b) * np.abs(qc) ** (p - 1) * qc
    sel = (rc >= r_lo) & (rc <= r_hi)
    return float(np.max(np.abs(res[sel])) / beta)


def solve_ground_state(
    b: float,
    p: float,
    tol: float = 1e-10,
    r_max: float = 24.0,
    m: int = 2**16,
    residual_from: float = 0.1,
) -> GroundState:
    """Shoot for the positive radial ground state with V absent.

    ``tol`` sets the integrator tolerance (rtol = tol / 100).  The returned
    profile lives on the midpoint grid r_j = (j + 1/2) r_max / m.
    """
    if not 1e-12 < tol < 1e-4:
        raise ValueError("tol must lie in (1e-12, 1e-4)")
    if not 0 <= b < 1:
        raise ValueError("b must lie in [0, 1)")
    lo_w, hi_w = intercritical_window(b)
    if not lo_w < p < hi_w:
        raise BracketError(f"p={p:g} outside ({lo_w:g}, {hi_w:g}); no ground-state bracket")

    rtol = max(tol * 1e-2, 2.5e-14)
    atol = rtol * 1e-2
    r0 = 1e-4 * r_max

    def kind(beta):
        return _shoot(beta, b, p, r0, r_max, rtol, atol)[0]

    lo, hi = 1.0, 2.0
    for _ in range(60):
        if kind(hi) == "cross":
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise BracketError("no zero-crossing trajectory found")
    for _ in range(60):
        if kind(lo) == "turn":
            break
        lo *= 0.5
    else:
        raise BracketError("no upward-turning trajectory found")

    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        k = kind(mid)
        if k == "cross":
            hi = mid
        elif k == "turn":
            lo = mid
        else:
            lo = hi = mid
            break
        assert kind(lo) != "cross" or lo == hi

    beta = 0.5 * (lo + hi)
    _, s_lo = _shoot(lo, b, p, r0, r_max, rtol, atol, dense=True)
    _, s_hi = _shoot(hi, b, p, r0, r_max, rtol, atol, dense=True)
    r_end = min(s_lo.t[-1], s_hi.t[-1])
    probe = np.linspace(r0, r_end, 20001)
    qa, qb = s_lo.sol(probe)[0], s_hi.sol(probe)[0]
    agree = np.abs(qa - qb) <= 1e-9 * np.abs(qa)
    r_match = float(probe[np.argmin(agree) - 1]) if not agree.all() else float(probe[-1])

    grid = RadialGrid(r_max, m)
    r = grid.r
    q = np.empty(m)
    dq = np.empty(m)
    inner = r < r0
    q[inner], dq[inner] = _series(beta, b, p, r[inner])
    body = ~inner & (r <= r_match)
    y = 0.5 * (s_lo.sol(r[body]) + s_hi.sol(r[body]))
    q[body], dq[body] = y
    tail = r > r_match
    qm = 0.5 * (s_lo.sol(r_match)[0] + s_hi.sol(r_match)[0])
    c = qm * r_match * math.exp(r_match)
    rt = r[tail]
    q[tail] = c * np.exp(-rt) / rt
    dq[tail] = -c * np.exp(-rt) * (1.0 / rt + 1.0 / rt**2)

    resid = _ode_residual(grid, b, p, q, dq, beta, residual_from, r_match)
    gs = _assemble(b, p, grid, q, dq, beta, r_match, resid)
    if not (np.all(q > 0) and np.all(np.diff(q) < 0)):
        raise GroundStateError("profile is not positive and strictly decreasing")
    return gs


def pohozaev_residuals(gs: GroundState) -> tuple[float, float]:
    """Relative defects of the two integral identities satisfied by Q.

    (i)   |grad Q|^2 + |Q|^2 = N
    (ii)  |grad Q|^2 / 2 + 3 |Q|^2 / 2 = (3 - b) N / (p + 1)
    with N = int |x|^-b Q^(p+1), all computed from the stored samples.
    """
    b, p = gs.b, gs.p
    mass, grad, nl = _radial_norms(gs.radial_grid, b, p, gs.profile.samples, gs.dprofile)
    res1 = abs(grad + mass - nl) / nl
    rhs2 = (3.0 - b) / (p + 1.0) * nl
    res2 = abs(0.5 * grad + 1.5 * mass - rhs2) / rhs2
    return float(res1), float(res2)


@dataclass(frozen=True)
class ThresholdConstants:
    s_c: float
    K_grad: float
    K_mass_energy: float

    @property
    def sigma(self) -> float:
        """Exponent (1 - s_c) / s_c applied to the L^2 norm."""
        return (1.0 - self.s_c) / self.s_c


def threshold_constants(gs: GroundState) -> ThresholdConstants:
    s_c = critical_index(gs.b, gs.p)
    sigma = (1.0 - s_c) / s_c
    k_grad = math.sqrt(gs.grad_norm_sq) * math.sqrt(gs.mass) ** sigma
    k_me = gs.energy0**s_c * gs.mass ** (1.0 - s_c)
    return ThresholdConstants(s_c, k_grad, k_me)


def energy0_simpson(gs: GroundState) -> float:
    """E_0(Q) by Simpson's rule on the same samples (independent of the midpoint sums)."""
    r = gs.radial_grid.r
    q, dq = gs.profile.samples, gs.dprofile
    w = 4.0 * np.pi * r**2
    grad = simpson(w * dq * dq, x=r)
    nl = simpson(w * r ** (-gs.b) * q ** (gs.p + 1), x=r)
    return 0.5 * grad - nl / (gs.p + 1.0)


def refine_on_grid(gs: GroundState, grid: Grid3, tol: float = 1e-12, maxiter: int = 500) -> Field3:
    """Petviashvili iteration for the grid's own solitary wave, started from the embedded Q.

    Solves (1 - Lap_h) Q = |x|^-b Q^p with the spectral Laplacian of ``grid``, so
    that e^(it) Q is stationary for the semi-discrete flow and the split-step
    error is the only remaining source of drift.
    """
    from .grid import fft3, ifft3

    b, p = gs.b, gs.p
    q = np.real(gs.embed(grid).values).copy()
    weight = grid.r ** (-b)
    symbol = 1.0 + grid.k2
    gamma = p / (p - 1.0)
    for _ in range(maxiter):
        nl = weight * np.abs(q) ** (p - 1.0) * q
        nl_hat = fft3(nl)
        q_hat = fft3(q)
        num = np.sum(symbol * np.abs(q_hat) ** 2)
        den = np.real(np.sum(np.conj(q_hat) * nl_hat))
        m = num / den
        new = np.real(ifft3(nl_hat / symbol)) * m**gamma
        change = np.max(np.abs(new - q)) / np.max(np.abs(new))
        q = new
        if change < tol:
            break
    else:
        raise GroundStateError(f"Petviashvili iteration did not reach {tol:g} in {maxiter} steps")
    return Field3(grid, q)
