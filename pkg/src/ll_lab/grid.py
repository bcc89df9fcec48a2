"""Periodic grids, field containers, and Fourier collocation calculus.

Everything downstream works on a uniform periodic grid with a power-of-two
number of samples.  Derivatives are spectral, integrals are the periodic
rectangle rule (spectrally accurate for smooth integrands), and the weighted
Sobolev-type norm used throughout is

    ||(v, w)||_X = ( integral of v^2 + (dv/dx)^2 + w^2 )^(1/2).

Spin configurations whose transverse component m1 + i*m2 winds through an odd
multiple of pi over one period are not periodic but antiperiodic.  Such fields
are tagged with ``phase_sector = 1`` and differentiated by first removing a
half-integer twist, so that single dark solitons (phase jump pi) live on the
grid at spectral accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

#: Guard on 1 - v^2 (equivalently |m1 + i m2|^2).  Below this the hydrodynamic
#: variables lose meaning and operations raise :class:`VacuumBreakdown`.
VACUUM_GUARD = 1e-6


class VacuumBreakdown(RuntimeError):
    """The transverse spin component (or 1 - v^2) dropped below the guard."""


def _frozen_array(values, shape=None, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype, copy=True)
    if shape is not None and out.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("array contains non-finite entries")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with samples x_min + j*dx, j = 0..n-1.

    The period is n*dx.  n must be even (the transform conventions assume a
    Nyquist bin); powers of two are fastest but not required.
    """

    n: int
    dx: float
    x_min: float = 0.0

    def __post_init__(self) -> None:
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError(f"n must be an even integer >= 4, got {self.n}")
        if not (np.isfinite(self.dx) and self.dx > 0.0):
            raise ValueError(f"dx must be finite and positive, got {self.dx}")
        if not np.isfinite(self.x_min):
            raise ValueError(f"x_min must be finite, got {self.x_min}")

    @property
    def period(self) -> float:
        return self.n * self.dx

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen_array(self.x_min + self.dx * np.arange(self.n))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Full FFT wavenumbers 2*pi*fftfreq, matching ``np.fft.fft`` layout."""
        return _frozen_array(2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx))

    @cached_property
    def rfft_wavenumbers(self) -> np.ndarray:
        return _frozen_array(2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx))

    def periodic_offset(self, x, center: float) -> np.ndarray:
        """Signed displacement x - center wrapped into [-period/2, period/2)."""
        half = 0.5 * self.period
        return np.mod(np.asarray(x, dtype=float) - center + half, self.period) - half

    @classmethod
    def centered(cls, n: int, dx: float) -> "Grid":
        """Grid of n points symmetric about the origin."""
        return cls(n=n, dx=dx, x_min=-0.5 * n * dx)


@dataclass(frozen=True, eq=False)
class RealField:
    """A real scalar field sampled on a grid.  Values are finite and read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_array(self.values, (self.grid.n,)))

    def __add__(self, other: "RealField") -> "RealField":
        _require_same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        _require_same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "RealField":
        return RealField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def _require_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class HydroState:
    """Hydrodynamic pair (v, w) with the non-vacuum constraint max|v| < 1."""

    grid: Grid
    v: RealField
    w: RealField

    def __post_init__(self) -> None:
        _require_same_grid(self.grid, self.v.grid)
        _require_same_grid(self.grid, self.w.grid)
        vmax = float(np.max(np.abs(self.v.values)))
        if vmax >= 1.0:
            raise ValueError(f"non-vacuum constraint violated: max|v| = {vmax} >= 1")

    @classmethod
    def from_arrays(cls, grid: Grid, v, w) -> "HydroState":
        return cls(grid, RealField(grid, v), RealField(grid, w))

    def vacuum_margin(self) -> float:
        """min(1 - v^2), the distance to vacuum breakdown."""
        return float(np.min(1.0 - self.v.values ** 2))


@dataclass(frozen=True, eq=False)
class SpinState:
    """Unit spin field m : grid -> S^2, stored as an (n, 3) array.

    ``phase_sector`` records the parity of the phase winding of m1 + i*m2
    over one period: 0 for periodic transverse components, 1 for antiperiodic
    ones (odd multiples of pi, the sector of a single dark soliton).  The
    sector is preserved by the flow, which is linear in m1 + i*m2 with
    periodic coefficients.
    """

    grid: Grid
    m: np.ndarray
    phase_sector: int = 0

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float, copy=True)
        if m.shape != (self.grid.n, 3):
            raise ValueError(f"m must have shape ({self.grid.n}, 3), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("spin field contains non-finite entries")
        norms = np.sqrt(np.sum(m * m, axis=1))
        err = float(np.max(np.abs(norms - 1.0)))
        if err > 1e-12:
            raise ValueError(f"spin field is not unit-length: max deviation {err:.3e}")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)
        if self.phase_sector not in (0, 1):
            raise ValueError(f"phase_sector must be 0 or 1, got {self.phase_sector}")

    @classmethod
    def from_components(cls, grid: Grid, m1, m2, m3, phase_sector: int = 0) -> "SpinState":
        return cls(grid, np.stack([np.asarray(m1, dtype=float),
                                   np.asarray(m2, dtype=float),
                                   np.asarray(m3, dtype=float)], axis=1), phase_sector)

    @property
    def transverse(self) -> np.ndarray:
        """m1 + i*m2 as a complex array."""
        return self.m[:, 0] + 1j * self.m[:, 1]


# ---------------------------------------------------------------------------
# spectral calculus on raw arrays
# ---------------------------------------------------------------------------

def deriv_array(values: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    """Fourier collocation derivative of a real sample array."""
    if order < 1:
        raise ValueError(f"derivative order must be >= 1, got {order}")
    k = grid.rfft_wavenumbers
    mult = (1j * k) ** order
    if order % 2 == 1:
        # the Nyquist mode has no well-defined odd derivative on the grid
        mult = mult.copy()
        mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(values), n=grid.n)


def complex_deriv_array(values: np.ndarray, grid: Grid, order: int = 1,
                        phase_sector: int = 0) -> np.ndarray:
    """Derivative of a complex array, periodic or antiperiodic.

    In sector 1 the array satisfies f(x + period) = -f(x); it is untwisted by
    exp(-i*pi*(x - x_min)/period), differentiated with wavenumbers shifted by
    pi/period, and re-twisted.
    """
    if order < 1:
        raise ValueError(f"derivative order must be >= 1, got {order}")
    vals = np.asarray(values, dtype=complex)
    if phase_sector == 0:
        k = grid.wavenumbers
        mult = (1j * k) ** order
        if order % 2 == 1:
            mult = mult.copy()
            mult[grid.n // 2] = 0.0
        return np.fft.ifft(mult * np.fft.fft(vals))
    if phase_sector != 1:
        raise ValueError(f"phase_sector must be 0 or 1, got {phase_sector}")
    shift = np.pi / grid.period
    twist = np.exp(1j * shift * (grid.x - grid.x_min))
    k = grid.wavenumbers + shift
    mult = (1j * k) ** order
    return twist * np.fft.ifft(mult * np.fft.fft(vals / twist))


def antiderivative_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral antiderivative of the mean-free part, itself mean-free."""
    vhat = np.fft.rfft(values)
    k = grid.rfft_wavenumbers.copy()
    k[0] = 1.0  # avoid divide-by-zero; the mean is dropped below
    out = vhat / (1j * k)
    out[0] = 0.0
    return np.fft.irfft(out, n=grid.n)


def shift_array(values: np.ndarray, grid: Grid, delta: float) -> np.ndarray:
    """Periodic translation f(x) -> f(x - delta) by Fourier phase ramp."""
    phase = np.exp(-1j * grid.rfft_wavenumbers * delta)
    return np.fft.irfft(phase * np.fft.rfft(values), n=grid.n)


def integrate(values: np.ndarray, grid: Grid) -> float:
    """Periodic rectangle rule, exact for band-limited integrands."""
    return float(np.sum(values) * grid.dx)


def spatial_derivative(f: RealField, order: int = 1) -> RealField:
    """Spectral derivative of a field; orders 1 through 3 are supported."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    return RealField(f.grid, deriv_array(f.values, f.grid, order))


def spin_derivative(s: SpinState, order: int = 1) -> np.ndarray:
    """Componentwise derivative of a spin field, honouring its phase sector.

    The transverse pair (m1, m2) is differentiated as m1 + i*m2 in the
    state's sector; m3 is always periodic.  Returns an (n, 3) array.
    """
    dmc = complex_deriv_array(s.transverse, s.grid, order, s.phase_sector)
    dm3 = deriv_array(s.m[:, 2], s.grid, order)
    return np.stack([dmc.real, dmc.imag, dm3], axis=1)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def _xnorm_density(s: HydroState) -> np.ndarray:
    dv = deriv_array(s.v.values, s.grid, 1)
    return s.v.values ** 2 + dv ** 2 + s.w.values ** 2


def x_norm(s: HydroState) -> float:
    """The energy-space norm ( int v^2 + (dx v)^2 + w^2 )^(1/2)."""
    return math.sqrt(max(integrate(_xnorm_density(s), s.grid), 0.0))


def window_norm(s: HydroState, center: float, half_width: float) -> float:
    """x_norm restricted to the periodic window |x - center| <= half_width."""
    if half_width <= 0.0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    offs = s.grid.periodic_offset(s.grid.x, center)
    mask = np.abs(offs) <= half_width
    dens = _xnorm_density(s)
    return math.sqrt(max(float(np.sum(dens[mask]) * s.grid.dx), 0.0))


State = Union[HydroState, SpinState]
