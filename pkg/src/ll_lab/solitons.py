"""Dark solitons of the easy-plane Landau-Lifshitz line, in both frames.

For every speed 0 < |c| < 1, with nu = sqrt(1 - c^2), the travelling-wave
profile is

    u_c(x) = ( c*sech(nu*x), tanh(nu*x), nu*sech(nu*x) )

in the spin frame, and (v_c, w_c) = (nu*sech(nu*x), c*v_c/(1 - v_c^2)) in the
hydrodynamic frame.  Closed forms for the invariants:

    E(Q_c) = 2*nu,        P(Q_c) = 2*arctan(nu/c)   (same sign as c).

Each soliton carries a transverse phase winding of pi*sign(c), so a single
profile is antiperiodic in m1 + i*m2 and is sampled into phase sector 1;
``reconstruct_spin`` detects the sector of arbitrary hydrodynamic data from
the total winding integral of w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .grid import (
    VACUUM_GUARD,
    Grid,
    HydroState,
    SpinState,
    VacuumBreakdown,
    antiderivative_array,
    complex_deriv_array,
    integrate,
    spin_derivative,
)


def _check_speed(c: float) -> float:
    c = float(c)
    if not (0.0 < abs(c) < 1.0):
        raise ValueError(f"soliton speed must satisfy 0 < |c| < 1, got {c}")
    return c


def soliton_nu(c: float) -> float:
    """Amplitude parameter nu = sqrt(1 - c^2)."""
    return math.sqrt(1.0 - _check_speed(c) ** 2)


def soliton_spin(c: float, x) -> np.ndarray:
    """Travelling-wave spin profile u_c(x); output shape is x.shape + (3,)."""
    nu = soliton_nu(c)
    x = np.asarray(x, dtype=float)
    sech = 1.0 / np.cosh(nu * x)
    return np.stack([c * sech, np.tanh(nu * x), nu * sech], axis=-1)


def soliton_hydro(c: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Hydrodynamic profile (v_c, w_c) at the points x."""
    nu = soliton_nu(c)
    x = np.asarray(x, dtype=float)
    v = nu / np.cosh(nu * x)
    w = c * v / (1.0 - v * v)
    return v, w


def soliton_hydro_derivative(c: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Analytic x-derivative of the hydrodynamic profile."""
    nu = soliton_nu(c)
    x = np.asarray(x, dtype=float)
    v = nu / np.cosh(nu * x)
    dv = -nu * v * np.tanh(nu * x)
    dw = c * dv * (1.0 + v * v) / (1.0 - v * v) ** 2
    return dv, dw


def soliton_energy(c: float) -> float:
    """E(Q_c) = 2*sqrt(1 - c^2)."""
    return 2.0 * soliton_nu(c)


def soliton_momentum(c: float) -> float:
    """P(Q_c) = 2*arctan(nu/c), odd in c and valued in (-pi, pi)."""
    return 2.0 * math.atan(soliton_nu(c) / _check_speed(c))


@dataclass(frozen=True)
class SolitonParams:
    """One soliton: speed c, center a, and sign s in {+1, -1}.

    The sign flips the profile pointwise, (v, w) -> (-v, -w); it does not
    change speed, energy, or momentum of the single soliton.
    """

    c: float
    a: float
    s: int = 1

    def __post_init__(self) -> None:
        _check_speed(self.c)
        if not np.isfinite(self.a):
            raise ValueError(f"center must be finite, got {self.a}")
        if self.s not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.s}")


@dataclass(frozen=True)
class MultiSolitonConfig:
    """An ordered N-soliton configuration with a guaranteed separation.

    Speeds must be strictly increasing and consecutive centers at least
    ``min_separation`` apart, the well-ordered regime in which superposition
    and modulation tracking are meaningful.
    """

    params: tuple[SolitonParams, ...]
    min_separation: float

    def __post_init__(self) -> None:
        params = tuple(self.params)
        object.__setattr__(self, "params", params)
        if len(params) < 1:
            raise ValueError("need at least one soliton")
        if self.min_separation <= 0.0:
            raise ValueError(f"min_separation must be positive, got {self.min_separation}")
        cs = [p.c for p in params]
        if any(c2 <= c1 for c1, c2 in zip(cs, cs[1:])):
            raise ValueError(f"speeds must be strictly increasing, got {cs}")
        avals = [p.a for p in params]
        for a1, a2 in zip(avals, avals[1:]):
            if a2 - a1 < self.min_separation:
                raise ValueError(
                    f"centers {a1} and {a2} closer than min_separation {self.min_separation}")

    @property
    def n_solitons(self) -> int:
        return len(self.params)

    @cached_property
    def speeds(self) -> np.ndarray:
        return np.array([p.c for p in self.params])

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([p.a for p in self.params])

    @cached_property
    def signs(self) -> np.ndarray:
        return np.array([p.s for p in self.params])


@dataclass(frozen=True)
class SpeedGaps:
    """Derived spacing constants of a speed vector c_1 < ... < c_N.

    mu  = min_j |c_j|                    distance to the stationary speed,
    nu  = min_j sqrt(1 - c_j^2)          smallest amplitude parameter,
    delta = half the least gap within (-1, c_1, ..., c_N, 1),
    lam = the same quantity for an interlacing reference vector gamma,
          or None when no gamma was supplied.
    """

    mu: float
    nu: float
    delta: float
    lam: Optional[float] = None


def speed_gaps(speeds: Sequence[float], gamma: Optional[Sequence[float]] = None) -> SpeedGaps:
    """Spacing constants of an increasing speed vector, optionally with a
    reference vector gamma that must interlace: c_{j-1} < gamma_j < c_j with
    c_0 = -1 and c_{N+1} = +1.
    """

    c = np.asarray(speeds, dtype=float)
    if c.ndim != 1 or len(c) < 1:
        raise ValueError("speeds must be a non-empty 1-d sequence")
    if np.any(np.abs(c) >= 1.0) or np.any(c == 0.0):
        raise ValueError(f"speeds must lie in (-1, 1) excluding 0, got {c}")
    if np.any(np.diff(c) <= 0.0):
        raise ValueError(f"speeds must be strictly increasing, got {c}")
    mu = float(np.min(np.abs(c)))
    nu = float(np.min(np.sqrt(1.0 - c * c)))
    fence = np.concatenate([[-1.0], c, [1.0]])
    delta = 0.5 * float(np.min(np.diff(fence)))
    lam = None
    if gamma is not None:
        g = np.asarray(gamma, dtype=float)
        if g.shape != (len(c) + 1,):
            raise ValueError(f"gamma must have length N + 1 = {len(c) + 1}, got {g.shape}")
        lo = np.concatenate([[-1.0], c])
        hi = np.concatenate([c, [1.0]])
        if np.any(g <= lo) or np.any(g >= hi):
            raise ValueError("gamma must interlace the speeds: c_(j-1) < gamma_j < c_j")
        gaps = np.concatenate([g - lo, hi - g])
        lam = 0.5 * float(np.min(gaps))
    return SpeedGaps(mu=mu, nu=nu, delta=delta, lam=lam)


def _sum_profile_arrays(speeds, centers, signs, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise sum of hydrodynamic profiles, centers wrapped periodically."""
    v = np.zeros(grid.n)
    w = np.zeros(grid.n)
    for c, a, s in zip(speeds, centers, signs):
        xi = grid.periodic_offset(grid.x, a)
        vj, wj = soliton_hydro(c, xi)
        v += s * vj
        w += s * wj
    return v, w


def multi_soliton_sum(config: MultiSolitonConfig, grid: Grid) -> HydroState:
    """Superposed hydrodynamic state V = sum_j s_j v_{c_j}(x - a_j), same for W.

    Raises ValueError if the summed amplitudes violate max|V| < 1 (the state
    constructor enforces it).
    """
    v, w = _sum_profile_arrays(config.speeds, config.centers, config.signs, grid)
    return HydroState.from_arrays(grid, v, w)


def soliton_spin_state(c: float, a: float, grid: Grid) -> SpinState:
    """Single travelling wave sampled in the spin frame, phase sector 1.

    The transverse component c*sech + i*tanh of one dark soliton crosses the
    periodic seam antiperiodically, so the sample lands in sector 1 with
    seam mismatch of order exp(-nu * distance from a to the seam).
    """
    u = soliton_spin(c, grid.x - a)
    norms = np.sqrt(np.sum(u * u, axis=1))
    return SpinState(grid, u / norms[:, None], phase_sector=1)


# ---------------------------------------------------------------------------
# frame changes
# ---------------------------------------------------------------------------

def reconstruct_spin(state: HydroState, theta0: float = 0.0) -> SpinState:
    """Lift (v, w) to a spin field m with m3 = v and transverse phase theta,
    d(theta)/dx = w, fixed by theta = theta0 at the grid point nearest x = 0.

    The total winding T = int w dx is rounded to the nearest multiple of pi;
    the half-integer part sets the phase sector and the residual T - k*pi is
    removed by a localized winding correction supported where the state has
    the least mass, so the lift is exact for states whose winding is an
    honest multiple of pi and changes the data by at most the residual
    otherwise.
    """
    grid = state.grid
    v = state.v.values
    w = state.w.values
    if float(np.min(1.0 - v * v)) < VACUUM_GUARD:
        raise VacuumBreakdown("1 - v^2 fell below the vacuum guard; no phase lift exists")

    total = integrate(w, grid)
    n_half = int(round(total / math.pi))
    sector = n_half & 1
    residual = total - n_half * math.pi

    w_used = w
    if abs(residual) > 1e-12 * (1.0 + abs(total)):
        # place the correction bump at the minimum of a smoothed mass density
        mass = v * v + w * w
        sigma_smooth = grid.period / 8.0
        k = grid.rfft_wavenumbers
        smoothed = np.fft.irfft(np.fft.rfft(mass) * np.exp(-0.5 * (k * sigma_smooth) ** 2),
                                n=grid.n)
        x_far = float(grid.x[int(np.argmin(smoothed))])
        offs = grid.periodic_offset(grid.x, x_far)
        sigma_b = grid.period / 16.0
        bump = np.exp(-0.5 * (offs / sigma_b) ** 2)
        bump /= integrate(bump, grid)
        w_used = w - residual * bump

    mean = integrate(w_used, grid) / grid.period
    theta = antiderivative_array(w_used - mean, grid)
    theta += (n_half * math.pi) * (grid.x - grid.x_min) / grid.period

    j0 = int(np.argmin(np.abs(grid.periodic_offset(grid.x, 0.0))))
    theta = theta - theta[j0] + theta0

    rho = np.sqrt(1.0 - v * v)
    return SpinState.from_components(grid, rho * np.cos(theta), rho * np.sin(theta), v,
                                     phase_sector=sector)


def extract_hydro(state: SpinState) -> HydroState:
    """Project a spin field to (v, w) = (m3, d(arg(m1 + i m2))/dx).

    The phase derivative is computed branch-free as
    Im(conj(mc) * d(mc)/dx) / |mc|^2 with the sector-aware derivative.
    Raises :class:`VacuumBreakdown` when the transverse component is too
    small for w to be meaningful (for instance m3 identically 1).
    """
    mc = state.transverse
    rho2 = np.abs(mc) ** 2
    if float(np.min(rho2)) < VACUUM_GUARD:
        raise VacuumBreakdown("transverse spin component below the vacuum guard")
    dmc = complex_deriv_array(mc, state.grid, 1, state.phase_sector)
    w = np.imag(np.conj(mc) * dmc) / rho2
    return HydroState.from_arrays(state.grid, state.m[:, 2], w)


def traveling_wave_residual(state: SpinState, c: float) -> float:
    """Sup norm of -c*m' + m x (m'' - m3*e3), zero on an exact profile."""
    d1 = spin_derivative(state, 1)
    d2 = spin_derivative(state, 2)
    d2[:, 2] -= state.m[:, 2]
    res = -c * d1 + np.cross(state.m, d2)
    return float(np.max(np.abs(res)))


def winding_number(state: HydroState) -> float:
    """Total transverse winding int w dx in units of pi."""
    return integrate(state.w.values, state.grid) / math.pi
