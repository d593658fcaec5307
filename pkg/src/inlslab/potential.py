"""Analytic potential families and admissibility checks.

Every family is smooth (or at worst Lipschitz at its centre) and bounded, so
it can be sampled on any grid.  ``check_assumptions`` reports the Kato norm,
the L^{3/2} norm, sign information and the L^r norms of ``x . grad V``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft as sfft

from .grid import Grid3

FAMILIES = ("zero", "gaussian", "yukawa", "bounded_inverse_power")

KATO_BOUND = 4.0 * math.pi


class ResolutionError(ValueError):
    """The potential varies on a scale the quadrature grid cannot resolve."""


@dataclass(frozen=True)
class PotentialSpec:
    """Symbolic description of V; ``amplitude`` carries the sign.

    gaussian:               A exp(-|x - x0|^2 / sigma^2)
    yukawa:                 A exp(-m s) / (rho + s),       s = |x|
    bounded_inverse_power:  A (rho^2 + s^2)^(-a/2),       0 < a < 1
    """

    family: str = "zero"
    amplitude: float = 0.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    width: float = 1.0
    screening: float = 1.0
    core: float = 1.0
    exponent: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise ValueError("center must have three components")
        if self.width <= 0 or self.screening <= 0 or self.core <= 0:
            raise ValueError("width, screening and core must be strictly positive")
        if self.family == "bounded_inverse_power" and not 0 < self.exponent < 1:
            raise ValueError("inverse-power exponent must lie in (0, 1)")

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("zero")

    @classmethod
    def gaussian(cls, amplitude: float, width: float = 1.0, center=(0.0, 0.0, 0.0)) -> "PotentialSpec":
        return cls("gaussian", amplitude=amplitude, width=width, center=tuple(center))

    @classmethod
    def yukawa(cls, amplitude: float, screening: float = 1.0, core: float = 1.0) -> "PotentialSpec":
        return cls("yukawa", amplitude=amplitude, screening=screening, core=core)

    @classmethod
    def inverse_power(cls, amplitude: float, exponent: float = 0.5, core: float = 1.0) -> "PotentialSpec":
        return cls("bounded_inverse_power", amplitude=amplitude, exponent=exponent, core=core)

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or self.amplitude == 0.0

    def scaled(self, c: float) -> "PotentialSpec":
        return _replace(self, amplitude=self.amplitude * c)

    def translated(self, shift) -> "PotentialSpec":
        if self.family != "gaussian":
            raise ValueError("only the gaussian family carries a movable centre")
        return _replace(self, center=tuple(c + s for c, s in zip(self.center, shift)))

    def resolution_scale(self) -> float:
        """Smallest length on which V varies."""
        if self.family == "gaussian":
            return self.width
        if self.family == "yukawa":
            return min(1.0 / self.screening, self.core)
        if self.family == "bounded_inverse_power":
            return self.core
        return math.inf

    def tail_decay(self) -> tuple[float, float]:
        """Algebraic decay rates of |V| and |x . grad V| at infinity (inf = faster than any power)."""
        if self.family == "bounded_inverse_power":
            return self.exponent, self.exponent
        return math.inf, math.inf

    # evaluation -----------------------------------------------------------

    def _evaluate(self, x, y, z):
        """Returns (V, x . grad V) on broadcast coordinates."""
        A = self.amplitude
        if self.family == "zero" or A == 0.0:
            zero = np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)))
            return zero, zero.copy()
        if self.family == "gaussian":
            cx, cy, cz = self.center
            dx, dy, dz = x - cx, y - cy, z - cz
            s2 = dx * dx + dy * dy + dz * dz
            v = A * np.exp(-s2 / self.width**2)
            xdot = x * dx + y * dy + z * dz
            return v, -2.0 * xdot * v / self.width**2
        s = np.sqrt(x * x + y * y + z * z)
        if self.family == "yukawa":
            m, rho = self.screening, self.core
            v = A * np.exp(-m * s) / (rho + s)
            dvds = -v * (m + 1.0 / (rho + s))
            return v, s * dvds
        a, rho = self.exponent, self.core
        base = rho * rho + s * s
        v = A * base ** (-0.5 * a)
        return v, -a * s * s * v / base

    def evaluate(self, x) -> np.ndarray:
        """V at points ``x`` of shape (..., 3)."""
        x = np.asarray(x, dtype=float)
        return self._evaluate(x[..., 0], x[..., 1], x[..., 2])[0]

    def evaluate_xgrad(self, x) -> np.ndarray:
        """x . grad V at points ``x`` of shape (..., 3)."""
        x = np.asarray(x, dtype=float)
        return self._evaluate(x[..., 0], x[..., 1], x[..., 2])[1]

    def gradient(self, x) -> np.ndarray:
        """Analytic grad V at points of shape (..., 3)."""
        x = np.asarray(x, dtype=float)
        A = self.amplitude
        if self.is_zero:
            return np.zeros_like(x)
        if self.family == "gaussian":
            d = x - np.asarray(self.center)
            v = self.evaluate(x)
            return (-2.0 / self.width**2) * d * v[..., None]
        s = np.linalg.norm(x, axis=-1)
        if self.family == "yukawa":
            m, rho = self.screening, self.core
            v = A * np.exp(-m * s) / (rho + s)
            dvds = -v * (m + 1.0 / (rho + s))
        else:
            a, rho = self.exponent, self.core
            base = rho * rho + s * s
            dvds = -a * s * A * base ** (-0.5 * a - 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(s[..., None] > 0, x / s[..., None], 0.0)
        return dvds[..., None] * unit

    @property
    def is_radial(self) -> bool:
        return self.family != "gaussian" or self.is_zero or not any(self.center)

    def radial_profile(self, r) -> np.ndarray:
        """V(|x| = r) for a radial potential."""
        if not self.is_radial:
            raise ValueError("potential is not centred at the origin")
        r = np.asarray(r, dtype=float)
        return self._evaluate(r, np.zeros_like(r), np.zeros_like(r))[0]

    def on_grid(self, grid: Grid3) -> np.ndarray:
        v, _ = self._evaluate(*grid.coords)
        return np.broadcast_to(v, grid.shape).copy()

    def xgrad_on_grid(self, grid: Grid3) -> np.ndarray:
        _, xg = self._evaluate(*grid.coords)
        return np.broadcast_to(xg, grid.shape).copy()

    # serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        d = dict(d)
        if "center" in d:
            d["center"] = tuple(d["center"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown potential keys: {sorted(unknown)}")
        return cls(**d)

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_text(cls, text: str) -> "PotentialSpec":
        return cls.from_dict(json.loads(text))


def _replace(spec: PotentialSpec, **changes) -> PotentialSpec:
    d = spec.to_dict()
    d.update(changes)
    return PotentialSpec.from_dict(d)


def evaluate(V: PotentialSpec, x) -> np.ndarray:
    return V.evaluate(x)


def evaluate_xgrad(V: PotentialSpec, x) -> np.ndarray:
    return V.evaluate_xgrad(x)


# Kato norm ----------------------------------------------------------------


@dataclass(frozen=True)
class KatoQuadrature:
    n: int = 32
    box_length: float = 8.0
    pad: int = 3
    min_cells: float = 4.0


def _truncated_newton_symbol(k2: np.ndarray, radius: float) -> np.ndarray:
    """Fourier symbol of 1/|x| restricted to the ball |x| < radius."""
    k = np.sqrt(k2)
    out = np.empty_like(k)
    nz = k > 0
    out[nz] = 4.0 * np.pi * (1.0 - np.cos(k[nz] * radius)) / k2[nz]
    out[~nz] = 2.0 * np.pi * radius**2
    return out


def newton_potential(density: np.ndarray, grid: Grid3, pad: int = 3):
    """Free-space convolution of ``density`` with 1/|x|.

    The density is zero-padded to a box of side ``pad * L``; the kernel is
    truncated at the box diagonal, whose Fourier symbol is known in closed
    form, so the periodic images never reach the original box.
    Returns the potential at the grid nodes and at the origin.
    """
    if pad < 3:
        raise ValueError("padding factor must be at least 3 for the truncated kernel")
    n, h = grid.n, grid.dx
    big = pad * n
    buf = np.zeros((big, big, big))
    buf[:n, :n, :n] = density
    radius = math.sqrt(3.0) * grid.box_length
    k = 2.0 * np.pi * np.fft.fftfreq(big, d=h)
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    spec = sfft.fftn(buf) * _truncated_newton_symbol(k2, radius)
    del k2
    field_vals = sfft.ifftn(spec).real[:n, :n, :n]
    # origin value: evaluate the Fourier series at x=0 relative to node 0
    phase1 = np.exp(1j * k * (0.0 - grid.axis[0]))
    at_origin = np.einsum("ijk,i,j,k->", spec, phase1, phase1, phase1).real / big**3
    return field_vals, float(at_origin)


def kato_norm(V: PotentialSpec, quad: KatoQuadrature = KatoQuadrature(), part: str = "abs") -> float:
    """sup_x int |V(y)| / |x - y| dy over grid nodes plus the origin.

    ``part="negative"`` measures V_- = min(V, 0) instead of V.
    """
    if V.is_zero:
        return 0.0
    grid = Grid3(quad.n, quad.box_length)
    if V.resolution_scale() < quad.min_cells * grid.dx:
        raise ResolutionError(
            f"potential scale {V.resolution_scale():g} spans fewer than "
            f"{quad.min_cells:g} cells of size {grid.dx:g}"
        )
    vals = V.on_grid(grid)
    if part == "negative":
        dens = np.abs(np.minimum(vals, 0.0))
    elif part == "abs":
        dens = np.abs(vals)
    else:
        raise ValueError(f"unknown part {part!r}")
    if not dens.any():
        return 0.0
    conv, origin = newton_potential(dens, grid, quad.pad)
    return float(max(conv.max(), origin))


# admissibility -------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    kato_norm: float
    kato_norm_negative_part: float
    l32_norm: float
    nonneg: bool
    repulsive: bool
    repulsive_basis: str
    xgradV_lr_norms: dict
    in_K0_cap_L32: bool
    negative_part_below_4pi: bool
    theorem_hypotheses: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _analytic_sign(V: PotentialSpec):
    """(nonneg, repulsive) when decidable in closed form, else None entries."""
    if V.is_zero:
        return True, True
    A = V.amplitude
    nonneg = A >= 0
    if V.family == "gaussian" and any(V.center):
        return nonneg, None
    return nonneg, A >= 0


def check_assumptions(
    V: PotentialSpec,
    quad: KatoQuadrature = KatoQuadrature(),
    n_probe: int = 4096,
    seed: int = 0,
) -> AdmissibilityReport:
    notes = []
    grid = Grid3(quad.n, quad.box_length)
    vals = V.on_grid(grid)
    xg = V.xgrad_on_grid(grid)

    kn = kato_norm(V, quad)
    kn_neg = kato_norm(V, quad, part="negative")
    dv = grid.cell_volume
    l32 = float(np.sum(np.abs(vals) ** 1.5) * dv) ** (2.0 / 3.0)

    decay_v, decay_xg = V.tail_decay()
    # K0 and L^{3/2} both need |V| to decay faster than |x|^-2 at infinity
    tails_ok = decay_v > 2.0
    if not tails_ok:
        notes.append(
            f"|V| decays like |x|^-{decay_v:g}: not in L^3/2 nor K0 on R^3; "
            "box-truncated norms are reported"
        )

    nonneg_a, rep_a = _analytic_sign(V)
    rng = np.random.default_rng(seed)
    probes = rng.uniform(-quad.box_length, quad.box_length, size=(n_probe, 3))
    scale = max(float(np.abs(vals).max()), 1e-300)
    sampled_nonneg = bool(vals.min() >= -1e-14 * scale and V.evaluate(probes).min() >= -1e-14 * scale)
    sampled_rep = bool(xg.max() <= 1e-14 * scale and V.evaluate_xgrad(probes).max() <= 1e-14 * scale)
    nonneg = nonneg_a if nonneg_a is not None else sampled_nonneg
    if rep_a is None:
        repulsive, basis = sampled_rep, "sampled"
        notes.append("repulsivity decided by sampling only (no closed-form sign)")
    else:
        repulsive, basis = rep_a, "analytic"
        if rep_a != sampled_rep:
            notes.append("sampled sign of x.grad V disagrees with closed form")

    lr = {}
    for label, r in (("3/2", 1.5), ("2", 2.0), ("3", 3.0)):
        lr[label] = float(np.sum(np.abs(xg) ** r) * dv) ** (1.0 / r)
    lr["inf-"] = float(np.abs(xg).max())
    lr_member = {label: decay_xg * r > 3.0 for label, r in (("3/2", 1.5), ("2", 2.0), ("3", 3.0))}
    xg_ok = any(lr_member.values()) or decay_xg > 0
    if not any(lr_member.values()):
        notes.append(f"x.grad V is in L^r only for r > {3.0 / decay_xg:g}; none of the sampled exponents qualifies")

    below = kn_neg < KATO_BOUND
    hyp = bool(tails_ok and nonneg and repulsive and xg_ok)
    return AdmissibilityReport(
        kato_norm=kn,
        kato_norm_negative_part=kn_neg,
        l32_norm=l32,
        nonneg=bool(nonneg),
        repulsive=bool(repulsive),
        repulsive_basis=basis,
        xgradV_lr_norms=lr,
        in_K0_cap_L32=bool(tails_ok),
        negative_part_below_4pi=bool(below),
        theorem_hypotheses=hyp,
        notes=notes,
    )
