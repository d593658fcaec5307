"""Strang split-step propagator for  i u_t + Lap u - V u = -|x|^-b |u|^(p-1) u.

One step applies half of the potential phase, the exact kinetic multiplier
exp(-i dt |k|^2) and the other half of the phase.  Both substeps are pointwise
unit-modulus multiplications (in x or in k), so mass is conserved to rounding.
Between records the two half phases of consecutive steps are fused; this is
exact because a phase multiplication leaves |u| untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .grid import Field3, Grid3, NonFiniteError, grad_norm_sq_parseval
from .potential import PotentialSpec


class BlowUpSignal(RuntimeError):
    """Raised when the evolution leaves the range the grid can represent.

    ``state`` is the last finite state and ``t`` its time.
    """

    def __init__(self, t: float, reason: str, state=None):
        super().__init__(f"blow-up signal at t={t:.6g}: {reason}")
        self.t = t
        self.reason = reason
        self.state = state


@dataclass(frozen=True)
class AbsorbingLayer:
    """Cosine-ramp damping in the outer shell of the box.

    Every ``apply_every`` steps u is multiplied by exp(-strength * span * ramp),
    span being the time elapsed since the previous application; ramp rises
    from 0 at distance ``width`` from a face of the box to 1 at the face.
    The removed part is kept, pulled back by the free flow, in
    ``Trajectory.reservoir`` so that pullbacks can account for it.
    """

    width: float
    strength: float = 20.0
    apply_every: int = 10

    def __post_init__(self):
        if not self.width > 0 or not self.strength > 0:
            raise ValueError("absorbing layer needs positive width and strength")
        if self.apply_every < 1:
            raise ValueError("apply_every must be at least 1")

    def ramp(self, grid: Grid3) -> np.ndarray:
        half = 0.5 * grid.box_length
        total = np.zeros(grid.shape)
        for x in grid.coords:
            depth = np.clip((np.abs(x) - (half - self.width)) / self.width, 0.0, 1.0)
            total = total + 0.5 * (1.0 - np.cos(np.pi * depth))
        return np.minimum(total, 1.0)

    def mask(self, grid: Grid3, dt: float) -> np.ndarray:
        return np.exp(-self.strength * dt * self.ramp(grid))


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    nonlinearity_on: bool = True
    absorbing_layer: Optional[AbsorbingLayer] = None
    record_every: int = 10
    snapshot_times: tuple = ()
    # blow-up guards, relative to the initial state
    max_grad_growth: float = 1e3
    max_sup_growth: float = 1e3
    # fraction of |grad u|^2 carried by the outer third of the spectrum
    max_spectral_tail: float = 0.05
    checkpoint_every: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.dt <= self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    grid: Grid3
    b: float
    p: float
    potential: PotentialSpec
    times: list = field(default_factory=list)
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    final: Optional[Field3] = None
    t_final: float = 0.0
    blowup: Optional[BlowUpSignal] = None
    open_system: bool = False
    nonlinearity_on: bool = True
    # snapshot time -> sum over absorbed pieces a_k of exp(-i t_k Lap) a_k
    reservoir: dict = field(default_factory=dict)
    absorbed_mass: float = 0.0

    @property
    def tags(self) -> list[str]:
        out = ["open-system" if self.open_system else "closed-system"]
        if not self.nonlinearity_on:
            out.append("linear")
        if self.blowup is not None:
            out.append("blowup")
        return out

    def snapshot_list(self) -> list[tuple[float, Field3]]:
        return sorted(self.snapshots.items())


class SplitStepper:
    """Cached multipliers for repeated steps at a fixed dt on one grid."""

    def __init__(self, grid: Grid3, V: PotentialSpec, b: float, p: float, dt: float,
                 nonlinearity_on: bool = True):
        self.grid = grid
        self.b = float(b)
        self.p = float(p)
        self.dt = float(dt)
        self.nonlinearity_on = nonlinearity_on
        self.V = V.on_grid(grid) if not V.is_zero else None
        self.weight = grid.r ** (-self.b) if nonlinearity_on else None
        self.kinetic = np.exp(-1j * self.dt * grid.k2)

    def _power(self, u: np.ndarray) -> np.ndarray:
        m2 = u.real**2 + u.imag**2
        if self.p == 3.0:
            return m2
        return m2 ** (0.5 * (self.p - 1.0))

    def phase(self, u: np.ndarray, tau: float) -> np.ndarray:
        """u * exp(-i tau (V - |x|^-b |u|^(p-1))), in place."""
        w = None
        if self.nonlinearity_on:
            w = -self.weight * self._power(u)
        if self.V is not None:
            w = self.V if w is None else w + self.V
        if w is None:
            return u
        theta = tau * w
        rot = np.empty(u.shape, dtype=complex)
        np.cos(theta, out=rot.real)
        np.sin(theta, out=rot.imag)
        np.negative(rot.imag, out=rot.imag)
        u *= rot
        return u

    def kick(self, u: np.ndarray) -> np.ndarray:
        uh = sfft.fftn(u, overwrite_x=True)
        uh *= self.kinetic
        return sfft.ifftn(uh, overwrite_x=True)

    def step(self, u: np.ndarray) -> np.ndarray:
        u = self.phase(u, 0.5 * self.dt)
        u = self.kick(u)
        return self.phase(u, 0.5 * self.dt)


def _finite_or_raise(u: np.ndarray, t: float, last: np.ndarray, grid: Grid3):
    if not np.isfinite(u).all():
        raise BlowUpSignal(t, "non-finite values", Field3(grid, last))


def step(u: Field3, V: PotentialSpec, params, dt: float, nonlinearity_on: bool = True) -> Field3:
    """One Strang step of the nonlinear flow (or of e^(-i dt H) with the nonlinearity off)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    b, p = params
    stepper = SplitStepper(u.grid, V, b, p, dt, nonlinearity_on)
    with np.errstate(over="ignore", invalid="ignore"):
        out = stepper.step(np.array(u.values))
    _finite_or_raise(out, dt, u.values, u.grid)
    return Field3(u.grid, out)


def spectral_tail_fraction(grid: Grid3, uhat: np.ndarray) -> float:
    """Share of sum |k|^2 |u_k|^2 carried by modes with max_i |k_i| > (2/3) k_max."""
    kx, ky, kz = (np.abs(grid.kvec(a, for_gradient=False)) for a in range(3))
    kmax = np.pi / grid.dx
    outer = np.maximum(np.maximum(kx, ky), kz) > (2.0 / 3.0) * kmax
    w = grid.k2 * (uhat.real**2 + uhat.imag**2)
    tot = float(w.sum())
    return float(w[outer].sum()) / tot if tot > 0 else 0.0


def evolve(
    u0: Field3,
    V: PotentialSpec,
    params,
    cfg: EvolveConfig,
    sink: Optional[Callable[[float, Field3], object]] = None,
    checkpoint: Optional[Callable[[float, Field3], None]] = None,
) -> Trajectory:
    """Run ``cfg.n_steps`` Strang steps from ``u0``.

    ``sink(t, u)`` is called at t = 0 and every ``record_every`` steps; its
    non-None return values are collected in ``Trajectory.records``.  A blow-up
    signal stops the run; it is stored on the trajectory, not raised.
    """
    grid = u0.grid
    b, p = params
    if cfg.absorbing_layer is not None and cfg.absorbing_layer.width >= grid.box_length / 4:
        raise ValueError("absorbing layer must be thinner than L/4")
    traj = Trajectory(grid, float(b), float(p), V, open_system=cfg.absorbing_layer is not None,
                      nonlinearity_on=cfg.nonlinearity_on)
    stepper = SplitStepper(grid, V, b, p, cfg.dt, cfg.nonlinearity_on)
    layer = cfg.absorbing_layer
    absorb_every = layer.apply_every if layer is not None else 0
    if layer is not None:
        mask = layer.mask(grid, absorb_every * cfg.dt)
        reservoir_hat = np.zeros(grid.shape, dtype=complex)

    snaps = sorted(float(s) for s in cfg.snapshot_times)
    # snapshots are taken at the nearest step and keyed by that step's time
    snap_steps = {}
    for s in snaps:
        if 0 <= s <= cfg.t_end + 0.5 * cfg.dt:
            k = int(round(s / cfg.dt))
            snap_steps[k] = round(k * cfg.dt, 12)

    u = np.array(u0.values)
    uh0 = sfft.fftn(u)
    g0 = grad_norm_sq_parseval(grid, uh0)
    tail0 = spectral_tail_fraction(grid, uh0)
    if tail0 > cfg.max_spectral_tail:
        raise ValueError(f"initial data under-resolved: spectral tail fraction {tail0:.3g} "
                         f"exceeds {cfg.max_spectral_tail:g}; refine the grid")
    sup0 = float(np.abs(u).max())

    def emit(k, arr):
        t = k * cfg.dt
        f = Field3(grid, arr)
        traj.times.append(t)
        if sink is not None:
            rec = sink(t, f)
            if rec is not None:
                traj.records.append(rec)
        return f

    def guard(k, arr, last):
        t = k * cfg.dt
        if not np.isfinite(arr).all():
            raise BlowUpSignal(t, "non-finite values", Field3(grid, last))
        uh = sfft.fftn(arr)
        g = grad_norm_sq_parseval(grid, uh)
        if g0 > 0 and g > cfg.max_grad_growth**2 * g0:
            raise BlowUpSignal(t, f"gradient norm grew by {math.sqrt(g / g0):.3g}", Field3(grid, arr.copy()))
        sup = float(np.abs(arr).max())
        if sup0 > 0 and sup > cfg.max_sup_growth * sup0:
            raise BlowUpSignal(t, f"sup norm grew by {sup / sup0:.3g}", Field3(grid, arr.copy()))
        tail = spectral_tail_fraction(grid, uh)
        if tail > cfg.max_spectral_tail:
            raise BlowUpSignal(t, f"unresolved: spectral tail fraction {tail:.3g}", Field3(grid, arr.copy()))

    emit(0, u.copy())
    if 0 in snap_steps:
        traj.snapshots[0.0] = Field3(grid, u.copy())
    last_good = u.copy()
    n = cfg.n_steps
    k = 0
    half = 0.5 * cfg.dt
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            u = stepper.phase(u, half)
            while k < n:
                u = stepper.kick(u)
                k += 1
                absorb = absorb_every and k % absorb_every == 0
                boundary = (k % cfg.record_every == 0 or k == n or k in snap_steps
                            or (cfg.checkpoint_every and k % cfg.checkpoint_every == 0))
                if not (boundary or absorb):
                    u = stepper.phase(u, cfg.dt)
                    continue
                u = stepper.phase(u, half)
                if absorb:
                    removed = u * (1.0 - mask)
                    # mass that leaves: |u|^2 (1 - mask^2), not |removed|^2
                    traj.absorbed_mass += float(np.sum((u.real**2 + u.imag**2) * (1.0 - mask**2))) * grid.cell_volume
                    u -= removed
                    reservoir_hat += sfft.fftn(removed) * np.exp(1j * (k * cfg.dt) * grid.k2)
                if boundary:
                    guard(k, u, last_good)
                    last_good = u.copy()
                    if k % cfg.record_every == 0 or k == n:
                        emit(k, u.copy())
                    if k in snap_steps:
                        traj.snapshots[snap_steps[k]] = Field3(grid, u.copy())
                        if layer is not None:
                            traj.reservoir[snap_steps[k]] = Field3(grid, sfft.ifftn(reservoir_hat))
                    if checkpoint is not None and cfg.checkpoint_every and k % cfg.checkpoint_every == 0:
                        checkpoint(k * cfg.dt, Field3(grid, u.copy()))
                if k < n:
                    u = stepper.phase(u, half)
    except BlowUpSignal as sig:
        traj.blowup = sig
        traj.final = sig.state
        traj.t_final = sig.t
        return traj
    traj.final = Field3(grid, u)
    traj.t_final = n * cfg.dt
    return traj


def linear_flow(u: Field3, V: PotentialSpec, t: float, dt: float = 1e-2) -> Field3:
    """e^(-itH) u by Strang steps with the nonlinearity off.

    Negative t runs forward on the conjugate and conjugates back, which is the
    exact time reversal of the scheme.  With V = 0 a single exact kinetic step
    is taken.
    """
    if t == 0:
        return u
    if t < 0:
        return linear_flow(u.conj(), V, -t, dt).conj()
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = 1 if V.is_zero else max(1, int(math.ceil(t / dt - 1e-12)))
    h = t / n
    stepper = SplitStepper(u.grid, V, 0.0, 3.0, h, nonlinearity_on=False)
    v = np.array(u.values)
    if V.is_zero:
        return Field3(u.grid, stepper.kick(v))
    v = stepper.phase(v, 0.5 * h)
    for j in range(n):
        v = stepper.kick(v)
        v = stepper.phase(v, h if j < n - 1 else 0.5 * h)
    return Field3(u.grid, v)


def split_step_soliton(q0: Field3, b: float, p: float, dt: float, f_tol: float = 1e-11) -> Field3:
    """Real profile Q whose Strang step is an exact phase rotation, S_dt(Q) = e^(i dt) Q.

    With V = 0 and Q real, tau = dt / 2 and W = |x|^-b Q^(p-1), the step maps Q
    to e^(i dt) Q exactly when  Im(e^(-i tau) e^(i tau Lap)(e^(i tau W) Q)) = 0.
    Divided by tau this is the ground-state equation plus O(dt^2), and Newton-Krylov
    from ``q0`` (typically the grid-refined ground state) solves it.  The result
    is the scheme's own solitary wave, so rounding is the only seed for the
    instability of Q.
    """
    from scipy.optimize import newton_krylov

    grid = q0.grid
    tau = 0.5 * dt
    weight = grid.r ** (-b)
    half_kick = np.exp(-1j * tau * grid.k2)
    rot = np.exp(-1j * tau)

    def residual(flat):
        q = flat.reshape(grid.shape)
        chi = sfft.ifftn(half_kick * sfft.fftn(np.exp(1j * tau * weight * np.abs(q) ** (p - 1.0)) * q))
        return (np.imag(rot * chi) / tau).ravel()

    q = newton_krylov(residual, np.real(q0.values).ravel(), f_tol=f_tol, method="lgmres")
    return Field3(grid, q.reshape(grid.shape))
