"""Monitored scalars: conserved quantities, virial quantity and identity,
local mass, evacuation functional, decay fits and admissible-pair arithmetic.

Energy convention (focusing):

    E(u) = 1/2 |grad u|^2 + 1/2 int V |u|^2 - 1/(p+1) int |x|^-b |u|^(p+1)
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import Field3, Grid3, fft3, grad_norm_sq_parseval, gradient_arrays, laplacian_form
from .potential import PotentialSpec
from .weights import MorawetzWeight, morawetz_weight

__all__ = [
    "DiagnosticsRecord", "Diagnostics", "MorawetzWeight", "morawetz_weight",
    "mass", "kinetic", "potential_energy", "nl_energy", "energy", "gamma_norm_sq",
    "virial_Z", "virial_rhs", "virial_rhs_quadratic", "local_mass", "evacuation_functional",
    "sup_norm", "decay_fit", "FitError", "is_admissible", "is_s_admissible", "pair_window",
    "PairWindow", "CSV_BASE_COLUMNS", "write_csv",
]


class FitError(ValueError):
    pass


def _abs2(v: np.ndarray) -> np.ndarray:
    return v.real**2 + v.imag**2


def _abs_pow(v: np.ndarray, q: float) -> np.ndarray:
    m2 = _abs2(v)
    return m2 if q == 2.0 else m2 ** (0.5 * q)


def mass(u: Field3) -> float:
    return float(np.sum(_abs2(u.values)) * u.grid.cell_volume)


def kinetic(u: Field3) -> float:
    """|grad u|_2^2 as <u, -Lap u> from the spectrum (the form conserved by the propagator)."""
    return laplacian_form(u.grid, fft3(u.values))


def potential_energy(u: Field3, V: PotentialSpec) -> float:
    if V.is_zero:
        return 0.0
    return float(np.sum(V.on_grid(u.grid) * _abs2(u.values)) * u.grid.cell_volume)


def nl_energy(u: Field3, b: float, p: float) -> float:
    """int |x|^-b |u|^(p+1)."""
    g = u.grid
    return float(np.sum(g.r ** (-b) * _abs_pow(u.values, p + 1.0)) * g.cell_volume)


def energy(u: Field3, V: PotentialSpec, b: float, p: float) -> float:
    return 0.5 * kinetic(u) + 0.5 * potential_energy(u, V) - nl_energy(u, b, p) / (p + 1.0)


def gamma_norm_sq(u: Field3, V: PotentialSpec) -> float:
    """|Gamma u|^2 = |grad u|^2 + int V |u|^2."""
    return kinetic(u) + potential_energy(u, V)


def sup_norm(u: Field3) -> float:
    return float(np.sqrt(_abs2(u.values).max()))


def _ball(grid: Grid3, R: float, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Indicator of B(center, R) with a linear ramp one cell wide across the sphere."""
    x, y, z = grid.coords
    rr = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    return np.clip((R - rr) / grid.dx + 0.5, 0.0, 1.0)


def local_mass(u: Field3, R: float, center=(0.0, 0.0, 0.0)) -> float:
    g = u.grid
    if not 0 < R <= g.box_length / 2:
        raise ValueError("R must lie in (0, L/2]")
    return float(np.sum(_ball(g, R, center) * _abs2(u.values)) * g.cell_volume)


def evacuation_functional(u: Field3, R: float, b: float, p: float) -> float:
    """int over |x| <= R of |x|^-b |u|^(p+1)."""
    g = u.grid
    if not 0 < R <= g.box_length / 2:
        raise ValueError("R must lie in (0, L/2]")
    w = _ball(g, R) * g.r ** (-b)
    return float(np.sum(w * _abs_pow(u.values, p + 1.0)) * g.cell_volume)


# virial -------------------------------------------------------------------

def _weight(w) -> MorawetzWeight:
    return MorawetzWeight.quadratic() if w is None or w == "quadratic" else w


def virial_Z(u: Field3, weight: Optional[MorawetzWeight] = None) -> float:
    """Z = 2 Im int conj(u) grad u . grad a; ``None`` selects a = |x|^2."""
    w = _weight(weight)
    g = u.grid
    v = u.values
    grads = gradient_arrays(g, v)
    ax = w.gradient(*g.coords)
    s = sum(gi * ai for gi, ai in zip(grads, ax))
    return float(2.0 * np.sum(np.imag(np.conj(v) * s)) * g.cell_volume)


def virial_rhs(u: Field3, weight: Optional[MorawetzWeight], V: PotentialSpec,
               b: float, p: float) -> tuple[float, dict]:
    """Right-hand side of dZ/dt and its per-term breakdown.

    nonlinear_laplacian   (4/(p+1) - 2) int |x|^-b |u|^(p+1) Lap a
    nonlinear_radial      -(4b/(p+1)) int |x|^-b |u|^(p+1) a'/r
    bilaplacian           -int |u|^2 Lap^2 a
    hessian               4 int a'' |d_r u|^2 + 4 int (a'/r) |angular grad u|^2
    potential             -2 int (a'/r) (x . grad V) |u|^2
    """
    w = _weight(weight)
    g = u.grid
    v = u.values
    r = g.r
    dv = g.cell_volume
    gx, gy, gz = gradient_arrays(g, v)
    x, y, z = g.coords
    dr = (x * gx + y * gy + z * gz) / r
    grad2 = _abs2(gx) + _abs2(gy) + _abs2(gz)
    radial2 = _abs2(dr)
    angular2 = np.maximum(grad2 - radial2, 0.0)
    dens = r ** (-b) * _abs_pow(v, p + 1.0)
    m2 = _abs2(v)
    lap_a = w.laplacian(r)
    a_r = w.da_over_r(r)
    terms = {
        "nonlinear_laplacian": (4.0 / (p + 1.0) - 2.0) * float(np.sum(dens * lap_a)) * dv,
        "nonlinear_radial": -(4.0 * b / (p + 1.0)) * float(np.sum(dens * a_r)) * dv,
        "bilaplacian": -float(np.sum(m2 * w.bilaplacian(r))) * dv,
        "hessian": 4.0 * float(np.sum(w.d2a(r) * radial2 + a_r * angular2)) * dv,
        "potential": 0.0 if V.is_zero else -2.0 * float(np.sum(a_r * V.xgrad_on_grid(g) * m2)) * dv,
    }
    return float(sum(terms.values())), terms


def virial_rhs_quadratic(u: Field3, b: float, p: float) -> float:
    """Closed form for a = |x|^2, V = 0:  8|grad u|^2 - (12(p-1) + 8b)/(p+1) int |x|^-b |u|^(p+1)."""
    grad2 = grad_norm_sq_parseval(u.grid, fft3(u.values))
    return 8.0 * grad2 - (12.0 * (p - 1.0) + 8.0 * b) / (p + 1.0) * nl_energy(u, b, p)


# records --------------------------------------------------------------------

CSV_BASE_COLUMNS = ("t", "mass", "kinetic", "potential_energy", "nl_energy", "energy",
                    "gamma_norm_sq", "Z")


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    kinetic: float
    potential_energy: float
    nl_energy: float
    energy: float
    gamma_norm_sq: float
    Z: float
    local_mass: dict = field(default_factory=dict)
    evacuation: dict = field(default_factory=dict)
    sup_norm: float = 0.0

    def row(self) -> list[float]:
        out = [getattr(self, c) for c in CSV_BASE_COLUMNS]
        out += [self.local_mass[R] for R in sorted(self.local_mass)]
        out += [self.evacuation[R] for R in sorted(self.evacuation)]
        out.append(self.sup_norm)
        return out

    def header(self) -> list[str]:
        cols = list(CSV_BASE_COLUMNS)
        cols += [f"local_mass@{R:g}" for R in sorted(self.local_mass)]
        cols += [f"evacuation@{R:g}" for R in sorted(self.evacuation)]
        cols.append("sup_norm")
        return cols


class Diagnostics:
    """Callable sink for :func:`inlslab.propagator.evolve`; caches grid-sized factors.

    One forward FFT per record serves the kinetic term and the gradient used
    by Z.  Local-mass and evacuation radii are fixed at construction.
    """

    def __init__(self, grid: Grid3, V: PotentialSpec, b: float, p: float,
                 local_radii: Sequence[float] = (), evacuation_radii: Sequence[float] = (),
                 weight: Optional[MorawetzWeight] = None, nonlinearity_on: bool = True):
        self.grid = grid
        self.V = V
        self.b = float(b)
        self.p = float(p)
        self.nonlinearity_on = nonlinearity_on
        self.Vg = None if V.is_zero else V.on_grid(grid)
        self.rb = grid.r ** (-self.b)
        self.balls = {float(R): _ball(grid, R) for R in local_radii}
        self.evac = {float(R): _ball(grid, R) * self.rb for R in evacuation_radii}
        w = _weight(weight)
        self.grad_a = w.gradient(*grid.coords)

    def __call__(self, t: float, u: Field3) -> DiagnosticsRecord:
        g = self.grid
        dv = g.cell_volume
        v = u.values
        vh = fft3(v)
        kin = laplacian_form(g, vh)
        m2 = _abs2(v)
        pot = 0.0 if self.Vg is None else float(np.sum(self.Vg * m2)) * dv
        dens = m2 * m2 if self.p == 3.0 else m2 ** (0.5 * (self.p + 1.0))
        nl = float(np.sum(self.rb * dens)) * dv
        e = 0.5 * kin + 0.5 * pot - (nl / (self.p + 1.0) if self.nonlinearity_on else 0.0)
        grads = gradient_arrays(g, v, vh)
        s = sum(gi * ai for gi, ai in zip(grads, self.grad_a))
        Z = float(2.0 * np.sum(np.imag(np.conj(v) * s))) * dv
        return DiagnosticsRecord(
            t=float(t), mass=float(np.sum(m2)) * dv, kinetic=kin, potential_energy=pot,
            nl_energy=nl, energy=e, gamma_norm_sq=kin + pot, Z=Z,
            local_mass={R: float(np.sum(w * m2)) * dv for R, w in self.balls.items()},
            evacuation={R: float(np.sum(w * dens)) * dv for R, w in self.evac.items()},
            sup_norm=float(np.sqrt(m2.max())),
        )


def write_csv(records: Sequence[DiagnosticsRecord], stream, preamble: Iterable[str] = ()) -> None:
    """CSV with ``# ``-prefixed preamble lines, a header and one row per record."""
    for line in preamble:
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    if records:
        w.writerow(records[0].header())
    for rec in records:
        w.writerow([repr(float(x)) for x in rec.row()])


def records_to_csv_text(records, preamble=()) -> str:
    buf = io.StringIO()
    write_csv(records, buf, preamble)
    return buf.getvalue()


# decay ------------------------------------------------------------------------

def decay_fit(traj_or_times, values=None, window: Optional[tuple[float, float]] = None) -> float:
    """Exponent alpha of sup|u(t)| ~ t^-alpha by least squares in log-log.

    Accepts a trajectory with diagnostics records, or explicit times and values.
    """
    if values is None:
        recs = traj_or_times.records
        t = np.array([r.t for r in recs])
        y = np.array([r.sup_norm for r in recs])
    else:
        t = np.asarray(traj_or_times, dtype=float)
        y = np.asarray(values, dtype=float)
    sel = t > 0
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    if sel.sum() < 10:
        raise FitError(f"need at least 10 samples in the fit window, have {int(sel.sum())}")
    slope, _ = np.polyfit(np.log(t[sel]), np.log(y[sel]), 1)
    return float(-slope)


def edge_mass_fraction(u: Field3, width: Optional[float] = None) -> float:
    """Share of the mass within ``width`` (default L/8) of a face of the box."""
    g = u.grid
    width = g.box_length / 8.0 if width is None else width
    inner = 0.5 * g.box_length - width
    x = g.axis
    near = np.abs(x) > inner
    edge = near[:, None, None] | near[None, :, None] | near[None, None, :]
    m2 = _abs2(u.values)
    return float(np.sum(m2[edge]) / np.sum(m2))


def prewrap_end(times, edge_fractions, tol: float = 1e-2) -> float:
    """Last time before the edge mass fraction first exceeds ``tol``.

    Past that point waves leaving one face re-enter through the opposite one
    and the periodic box stops imitating R^3.
    """
    t = np.asarray(times, dtype=float)
    f = np.asarray(edge_fractions, dtype=float)
    over = np.nonzero(f > tol)[0]
    if over.size == 0:
        return float(t[-1])
    if over[0] == 0:
        return 0.0
    return float(t[over[0] - 1])


# admissible pairs -------------------------------------------------------------------

def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if math.isinf(x):
        raise ValueError("infinite exponent has no fraction")
    return Fraction(x).limit_denominator(10**9)


def _inv(x) -> Fraction:
    """1/x exactly, with 1/inf = 0."""
    if not isinstance(x, Fraction) and math.isinf(x):
        return Fraction(0)
    return 1 / _frac(x)


def is_s_admissible(q, r, s=0, sign: int = 1) -> bool:
    """2/q = 3/2 - 3/r - sign*s; sign=+1 for H^s, -1 for H^-s."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    lhs = 2 * _inv(q)
    rhs = Fraction(3, 2) - 3 * _inv(r) - sign * _frac(s)
    return lhs == rhs


def is_admissible(q, r) -> bool:
    """L^2-admissible: 2/q = 3/2 - 3/r with 2 <= r <= 6."""
    if math.isinf(r) or not 2 <= r <= 6:
        return False
    return is_s_admissible(q, r, 0, 1)


@dataclass(frozen=True)
class PairWindow:
    """The pair set Lambda_s: H^(sign s)-admissible pairs with r_min <= r <= r_max."""

    s: float
    sign: int
    eps: float
    r_min: float
    r_max: float

    def q_of(self, r: float) -> float:
        inv = 0.5 * (1.5 - 3.0 / r - self.sign * self.s)
        return math.inf if inv == 0 else 1.0 / inv

    @property
    def q_range(self) -> tuple[float, float]:
        qs = sorted((self.q_of(self.r_min), self.q_of(self.r_max)))
        return qs[0], qs[1]

    def contains(self, q, r) -> bool:
        if not self.r_min <= r <= self.r_max:
            return False
        return abs(_inv_float(q) - _inv_float(self.q_of(r))) <= 1e-12

    def describe(self) -> str:
        kind = "H^s" if self.sign > 0 else "H^-s"
        return (f"{kind}-admissible pairs, s={self.s:g}, "
                f"{self.r_min:.12g} <= r <= {self.r_max:.12g}, q in [{self.q_range[0]:.6g}, {self.q_range[1]:.6g}]")


def _inv_float(q) -> float:
    return 0.0 if math.isinf(q) else 1.0 / q


def pair_window(s: float, sign: int = 1, eps: float = 1e-9) -> PairWindow:
    """(6/(3-2s))^+ <= r <= 6^-, with a^+ = a + eps and a^- = a - eps."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return PairWindow(s, sign, eps, 6.0 / (3.0 - 2.0 * s) + eps, 6.0 - eps)
