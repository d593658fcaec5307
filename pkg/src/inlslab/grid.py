"""Uniform periodic 3D grid, spectral derivatives and midpoint quadrature.

Everything else in the package computes on these objects.  The grid is
cell-centred by default (``offset=True``) so that no node sits on the
origin and ``|x|**-b`` is finite everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft


class NonFiniteError(ValueError):
    """Raised when a field holds NaN or inf entries."""


@dataclass(frozen=True)
class Grid3:
    n: int
    box_length: float
    offset: bool = True

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        j = np.arange(self.n, dtype=float)
        shift = 0.5 if self.offset else 0.0
        return (j + shift) * self.dx - 0.5 * self.box_length

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays of shapes (n,1,1), (1,n,1), (1,1,n)."""
        a = self.axis
        return a[:, None, None], a[None, :, None], a[None, None, :]

    @cached_property
    def r(self) -> np.ndarray:
        x, y, z = self.coords
        return np.sqrt(x * x + y * y + z * z)

    @cached_property
    def k_axis(self) -> np.ndarray:
        # k = 2 pi m / L, m in [-n/2, n/2), in FFT ordering
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_axis_grad(self) -> np.ndarray:
        k = self.k_axis.copy()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def k2(self) -> np.ndarray:
        k = self.k_axis
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2

    def kvec(self, axis: int, *, for_gradient: bool = True) -> np.ndarray:
        k = self.k_axis_grad if for_gradient else self.k_axis
        shape = [1, 1, 1]
        shape[axis] = self.n
        return k.reshape(shape)

    def contains_origin_node(self) -> bool:
        return bool(np.any(self.r == 0.0))


@dataclass(frozen=True, eq=False)
class Field3:
    """Complex samples of a function on a :class:`Grid3`."""

    grid: Grid3
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("field contains non-finite entries")
        v = v.view()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid3, fn: Callable) -> "Field3":
        x, y, z = grid.coords
        return cls(grid, np.broadcast_to(fn(x, y, z), grid.shape))

    def __mul__(self, c) -> "Field3":
        return Field3(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field3") -> "Field3":
        _same_grid(self, other)
        return Field3(self.grid, self.values + other.values)

    def __sub__(self, other: "Field3") -> "Field3":
        _same_grid(self, other)
        return Field3(self.grid, self.values - other.values)

    def conj(self) -> "Field3":
        return Field3(self.grid, np.conj(self.values))


def _same_grid(a: Field3, b: Field3):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def _checked(f: Field3) -> np.ndarray:
    v = f.values
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("non-finite input to spectral operator")
    return v


def fft3(v: np.ndarray) -> np.ndarray:
    return sfft.fftn(v)


def ifft3(v: np.ndarray) -> np.ndarray:
    return sfft.ifftn(v)


def laplacian_spectral(f: Field3) -> Field3:
    v = _checked(f)
    return Field3(f.grid, ifft3(-f.grid.k2 * fft3(v)))


def gradient_arrays(grid: Grid3, v: np.ndarray, vhat: np.ndarray | None = None):
    """Spectral gradient of a raw array; the Nyquist mode is dropped."""
    if vhat is None:
        vhat = fft3(v)
    return tuple(ifft3(1j * grid.kvec(a) * vhat) for a in range(3))


def gradient_spectral(f: Field3) -> tuple[Field3, Field3, Field3]:
    v = _checked(f)
    return tuple(Field3(f.grid, g) for g in gradient_arrays(f.grid, v))


def grad_norm_sq_parseval(grid: Grid3, vhat: np.ndarray) -> float:
    """||grad u||^2 from the spectrum, consistent with :func:`gradient_spectral`."""
    kx, ky, kz = (grid.kvec(a) for a in range(3))
    k2 = kx * kx + ky * ky + kz * kz
    n3 = grid.n**3
    return float(np.sum(k2 * (vhat.real**2 + vhat.imag**2)) * grid.cell_volume / n3)


Weight = Union[None, float, np.ndarray, Callable]


def laplacian_form(grid: Grid3, vhat: np.ndarray) -> float:
    """<u, -Lap u> with the full symbol |k|^2, Nyquist mode included.

    This is the kinetic term conserved by the split-step flow; it differs from
    :func:`grad_norm_sq_parseval` only by the Nyquist-plane contribution.
    """
    n3 = grid.n**3
    return float(np.sum(grid.k2 * (vhat.real**2 + vhat.imag**2)) * grid.cell_volume / n3)


def integrate(f: Union[Field3, np.ndarray], w: Weight = None, grid: Grid3 | None = None):
    """Midpoint rule ``sum w(x_j) f(x_j) dx**3``.

    ``w`` may be None, a scalar, an array broadcastable to the grid, or a
    callable of the broadcast coordinates ``(x, y, z)``.  A real result is
    returned when the integrand is real.
    """
    if isinstance(f, Field3):
        grid = f.grid
        v = f.values
    else:
        if grid is None:
            raise ValueError("a grid is required when integrating a raw array")
        v = np.asarray(f)
    if callable(w):
        w = w(*grid.coords)
    integrand = v if w is None else v * w
    total = np.sum(integrand) * grid.cell_volume
    if np.iscomplexobj(total) and total.imag == 0.0:
        return float(total.real)
    return total.item() if hasattr(total, "item") else total


def l2_norm(f: Field3) -> float:
    v = f.values
    return math.sqrt(float(np.sum(v.real**2 + v.imag**2)) * f.grid.cell_volume)


def h1_norm(f: Field3) -> float:
    vhat = fft3(f.values)
    g2 = grad_norm_sq_parseval(f.grid, vhat)
    return math.sqrt(l2_norm(f) ** 2 + g2)


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    m: int

    def __post_init__(self):
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.m < 2:
            raise ValueError("need at least two radial samples")

    @property
    def h(self) -> float:
        return self.r_max / self.m

    @cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.h

    def integrate(self, f: np.ndarray) -> float:
        """Integral over R^3 of a radial function sampled on the nodes."""
        return float(4.0 * np.pi * np.sum(np.asarray(f) * self.r**2) * self.h)


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (self.grid.m,):
            raise ValueError("sample count does not match radial grid")
        object.__setattr__(self, "samples", s)

    def embed(self, grid: Grid3, center=(0.0, 0.0, 0.0)) -> Field3:
        """Interpolate onto a 3D grid, zero beyond ``r_max``."""
        x, y, z = grid.coords
        rr = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
        vals = interp_radial(self.grid.r, self.samples, rr)
        return Field3(grid, vals)


def interp_radial(nodes: np.ndarray, samples: np.ndarray, rr: np.ndarray) -> np.ndarray:
    """Cubic interpolation on radial nodes, even extension through r=0."""
    from scipy.interpolate import CubicSpline

    nodes_ext = np.concatenate([-nodes[:3][::-1], nodes])
    samp_ext = np.concatenate([samples[:3][::-1], samples])
    spline = CubicSpline(nodes_ext, samp_ext)
    out = spline(np.minimum(rr, nodes[-1]))
    return np.where(rr > nodes[-1], 0.0, out)
