"""Time evolution in both frames, and the operators behind the flow.

Spin frame (unit field m, easy-plane anisotropy):

    dm/dt = -m x (d2m/dx2 - m3*e3)

Hydrodynamic frame (v = m3, w = phase gradient):

    dv/dt = d/dx( (v^2 - 1) w )
    dw/dt = d/dx( v''/(1-v^2) + v*(v')^2/(1-v^2)^2 + v*(w^2 - 1) )

The hydrodynamic right-hand side factors exactly as J(L + B) applied to the
state, where J(f1, f2) = (f2', f1') is the skew symplectic operator,
L(v, w) = (-v + v'', -w) is the linearization around vacuum, and B collects
the remaining superlinear terms.  ``rhs_hll`` is computed from the flux form
independently; agreement with the factored form is a grid-exact identity.

Integration is classical RK4 on the spectral right-hand side with the
stability restriction dt <= 0.2*dx^2 (the imaginary-axis stability span of
RK4 against the k^2 dispersion at the grid cutoff).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import (
    VACUUM_GUARD,
    Grid,
    HydroState,
    RealField,
    SpinState,
    VacuumBreakdown,
)

FieldPair = tuple[RealField, RealField]
State = Union[HydroState, SpinState]


class BlowupError(RuntimeError):
    """The integration produced non-finite values."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping parameters.

    dt must respect dt <= cfl_factor * dx^2; ``sample_stride`` controls how
    many steps separate stored snapshots; ``dealias`` optionally applies a
    2/3-rule spectral mask after every step (off by default, the quadratic
    and cubic nonlinearities stay clean without it at these resolutions).
    """

    dt: float
    t_end: float
    scheme: str = "rk4"
    renormalize_spin: bool = True
    sample_stride: int = 1
    cfl_factor: float = 0.2
    dealias: bool = False

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0.0):
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.scheme != "rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}; only 'rk4' is implemented")
        if self.sample_stride < 1:
            raise ValueError(f"sample_stride must be >= 1, got {self.sample_stride}")
        if not (0.0 < self.cfl_factor <= 0.2828):
            raise ValueError(f"cfl_factor must lie in (0, 0.2828], got {self.cfl_factor}")


@lru_cache(maxsize=32)
def _spectral_ops(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(i*k with Nyquist zeroed, k^2) on the rfft layout."""
    k = grid.rfft_wavenumbers
    ik = 1j * k
    ik[-1] = 0.0
    k2 = k * k
    return ik, k2


@lru_cache(maxsize=32)
def _sector_ops(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(twist, i*kk, kk^2) for antiperiodic transverse components."""
    shift = np.pi / grid.period
    twist = np.exp(1j * shift * (grid.x - grid.x_min))
    kk = grid.wavenumbers + shift
    return twist, 1j * kk, kk * kk


@lru_cache(maxsize=32)
def _full_ops(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(i*k with Nyquist zeroed, k^2) on the full fft layout."""
    k = grid.wavenumbers
    ik = 1j * k
    ik = ik.copy()
    ik[grid.n // 2] = 0.0
    return ik, k * k


def _check_vacuum(one_minus_v2: np.ndarray) -> None:
    if float(np.min(one_minus_v2)) < VACUUM_GUARD:
        raise VacuumBreakdown("1 - v^2 fell below the vacuum guard during evaluation")


def _hll_rhs_arrays(v: np.ndarray, w: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    ik, k2 = _spectral_ops(grid)
    vhat = np.fft.rfft(v)
    dv = np.fft.irfft(ik * vhat, n=grid.n)
    d2v = np.fft.irfft(-k2 * vhat, n=grid.n)
    om = 1.0 - v * v
    _check_vacuum(om)
    g = d2v / om + v * dv * dv / (om * om) + v * (w * w - 1.0)
    vdot = np.fft.irfft(ik * np.fft.rfft((v * v - 1.0) * w), n=grid.n)
    wdot = np.fft.irfft(ik * np.fft.rfft(g), n=grid.n)
    return vdot, wdot


def _spin_rhs_arrays(m: np.ndarray, grid: Grid, sector: int) -> np.ndarray:
    mc = m[:, 0] + 1j * m[:, 1]
    if sector:
        twist, ikk, kk2 = _sector_ops(grid)
        ghat = np.fft.fft(mc / twist)
        d2c = twist * np.fft.ifft(-kk2 * ghat)
    else:
        _ik, k2 = _full_ops(grid)
        d2c = np.fft.ifft(-k2 * np.fft.fft(mc))
    _ikr, k2r = _spectral_ops(grid)
    d2r = np.fft.irfft(-k2r * np.fft.rfft(m[:, 2]), n=grid.n)
    heff = np.empty_like(m)
    heff[:, 0] = d2c.real
    heff[:, 1] = d2c.imag
    heff[:, 2] = d2r - m[:, 2]
    return -np.cross(m, heff)


def rhs_spin(state: SpinState) -> np.ndarray:
    """-m x (m'' - m3 e3) as an (n, 3) array, tangent to m pointwise."""
    return _spin_rhs_arrays(state.m, state.grid, state.phase_sector)


def rhs_hll(state: HydroState) -> FieldPair:
    """Hydrodynamic right-hand side from the flux form."""
    vdot, wdot = _hll_rhs_arrays(state.v.values, state.w.values, state.grid)
    return RealField(state.grid, vdot), RealField(state.grid, wdot)


# ---------------------------------------------------------------------------
# the operators J, L, B
# ---------------------------------------------------------------------------

def apply_J(pair: FieldPair) -> FieldPair:
    """Skew operator J(f1, f2) = (f2', f1')."""
    f1, f2 = pair
    grid = f1.grid
    ik, _ = _spectral_ops(grid)
    d2 = np.fft.irfft(ik * np.fft.rfft(f2.values), n=grid.n)
    d1 = np.fft.irfft(ik * np.fft.rfft(f1.values), n=grid.n)
    return RealField(grid, d2), RealField(grid, d1)


def apply_L(state: HydroState) -> FieldPair:
    """Vacuum linearization L(v, w) = (-v + v'', -w)."""
    grid = state.grid
    _, k2 = _spectral_ops(grid)
    d2v = np.fft.irfft(-k2 * np.fft.rfft(state.v.values), n=grid.n)
    return RealField(grid, -state.v.values + d2v), RealField(grid, -state.w.values)


def apply_B(state: HydroState) -> FieldPair:
    """Superlinear remainder so that the flow is J(L + B).

    B1 = v'' v^2/(1-v^2) + (v')^2 v/(1-v^2)^2 + v w^2,   B2 = v^2 w.
    Both components scale cubically near zero.
    """
    grid = state.grid
    v = state.v.values
    w = state.w.values
    ik, k2 = _spectral_ops(grid)
    vhat = np.fft.rfft(v)
    dv = np.fft.irfft(ik * vhat, n=grid.n)
    d2v = np.fft.irfft(-k2 * vhat, n=grid.n)
    om = 1.0 - v * v
    _check_vacuum(om)
    b1 = d2v * v * v / om + dv * dv * v / (om * om) + v * w * w
    return RealField(grid, b1), RealField(grid, v * v * w)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _rk4_hydro(v, w, grid, dt):
    k1v, k1w = _hll_rhs_arrays(v, w, grid)
    k2v, k2w = _hll_rhs_arrays(v + 0.5 * dt * k1v, w + 0.5 * dt * k1w, grid)
    k3v, k3w = _hll_rhs_arrays(v + 0.5 * dt * k2v, w + 0.5 * dt * k2w, grid)
    k4v, k4w = _hll_rhs_arrays(v + dt * k3v, w + dt * k3w, grid)
    sixth = dt / 6.0
    return (v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            w + sixth * (k1w + 2.0 * k2w + 2.0 * k3w + k4w))


def _rk4_spin(m, grid, sector, dt, renormalize):
    k1 = _spin_rhs_arrays(m, grid, sector)
    k2 = _spin_rhs_arrays(m + 0.5 * dt * k1, grid, sector)
    k3 = _spin_rhs_arrays(m + 0.5 * dt * k2, grid, sector)
    k4 = _spin_rhs_arrays(m + dt * k3, grid, sector)
    out = m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if renormalize:
        out /= np.sqrt(np.sum(out * out, axis=1))[:, None]
    return out


@lru_cache(maxsize=32)
def _dealias_mask_rfft(grid: Grid) -> np.ndarray:
    k = grid.rfft_wavenumbers
    return (np.abs(k) <= (2.0 / 3.0) * np.max(np.abs(k))).astype(float)


def _dealias_real(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.irfft(_dealias_mask_rfft(grid) * np.fft.rfft(values), n=grid.n)


def step_rk4(state: State, dt: float, renormalize_spin: bool = True) -> State:
    """One classical RK4 step of the appropriate flow."""
    if isinstance(state, HydroState):
        v, w = _rk4_hydro(state.v.values, state.w.values, state.grid, dt)
        return HydroState.from_arrays(state.grid, v, w)
    if isinstance(state, SpinState):
        m = _rk4_spin(state.m, state.grid, state.phase_sector, dt, renormalize_spin)
        return SpinState(state.grid, m, state.phase_sector)
    raise TypeError(f"cannot step object of type {type(state).__name__}")


@dataclass(eq=False)
class Trajectory:
    """Snapshots of one run: strictly increasing times, states in one frame.

    ``error`` is None for a clean run, otherwise a short description of the
    failure that ended the run early (the stored snapshots remain valid).
    """

    frame: str
    grid: Grid
    times: np.ndarray
    states: tuple
    error: Optional[str] = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = tuple(self.states)
        if self.frame not in ("hydro", "spin"):
            raise ValueError(f"frame must be 'hydro' or 'spin', got {self.frame!r}")
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("snapshot times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


DiagnosticHook = Callable[[float, State], None]


def evolve(state: State, config: IntegratorConfig,
           hooks: Sequence[DiagnosticHook] = ()) -> Trajectory:
    """Integrate the state to t_end, storing every sample_stride-th step.

    The initial state is always the first snapshot.  Hooks are called at
    every stored snapshot with (t, state).  Vacuum breakdown or non-finite
    values end the run early with ``Trajectory.error`` set, keeping the
    snapshots collected so far.
    """
    is_spin = isinstance(state, SpinState)
    if not is_spin and not isinstance(state, HydroState):
        raise TypeError(f"cannot evolve object of type {type(state).__name__}")
    grid = state.grid
    limit = config.cfl_factor * grid.dx ** 2
    if config.dt > limit * (1.0 + 1e-12):
        raise ValueError(
            f"dt = {config.dt} exceeds the stability limit {limit} "
            f"(cfl_factor * dx^2) for dx = {grid.dx}")
    ratio = config.t_end / config.dt
    nsteps = int(round(ratio))
    if abs(ratio - nsteps) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"t_end = {config.t_end} is not an integer multiple of dt = {config.dt}")

    times = [0.0]
    snapshots = [state]
    for hook in hooks:
        hook(0.0, state)
    error = None

    if is_spin:
        m = np.array(state.m, dtype=float)
        sector = state.phase_sector
    else:
        v = np.array(state.v.values, dtype=float)
        w = np.array(state.w.values, dtype=float)

    for step in range(1, nsteps + 1):
        try:
            if is_spin:
                m = _rk4_spin(m, grid, sector, config.dt, config.renormalize_spin)
                if config.dealias:
                    for col in range(3):
                        m[:, col] = _dealias_real(m[:, col], grid)
                    m /= np.sqrt(np.sum(m * m, axis=1))[:, None]
                if not np.all(np.isfinite(m)):
                    raise BlowupError(f"non-finite spin values at step {step}")
            else:
                v, w = _rk4_hydro(v, w, grid, config.dt)
                if config.dealias:
                    v = _dealias_real(v, grid)
                    w = _dealias_real(w, grid)
                if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
                    raise BlowupError(f"non-finite hydrodynamic values at step {step}")
        except (VacuumBreakdown, BlowupError) as exc:
            error = f"{type(exc).__name__} at t = {step * config.dt:.6g}: {exc}"
            break
        if step % config.sample_stride == 0 or step == nsteps:
            t = step * config.dt
            snap = (SpinState(grid, m, sector) if is_spin
                    else HydroState.from_arrays(grid, v, w))
            times.append(t)
            snapshots.append(snap)
            for hook in hooks:
                hook(t, snap)

    return Trajectory(frame="spin" if is_spin else "hydro", grid=grid,
                      times=np.array(times), states=tuple(snapshots), error=error)


# ---------------------------------------------------------------------------
# on-disk format
# ---------------------------------------------------------------------------

_MAGIC = b"LLTRAJ01"
_FRAME_TAGS = {("hydro", 0): 0, ("spin", 0): 1, ("spin", 1): 3}


def save_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory as little-endian binary plus a CSV snapshot index.

    Layout: magic, header (n, dx, x_min, frame tag, snapshot count, error
    string), then per snapshot the time followed by the raw fields.  The
    index file ``<path>.index.csv`` lists snapshot number, time, and byte
    offset of each record.
    """
    path = str(path)
    sector = traj.states[0].phase_sector if traj.frame == "spin" else 0
    tag = _FRAME_TAGS[(traj.frame, sector)]
    err = (traj.error or "").encode("utf-8")
    rows = []
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QddQQQ", traj.grid.n, traj.grid.dx, traj.grid.x_min,
                             tag, len(traj), len(err)))
        fh.write(err)
        for i, (t, snap) in enumerate(zip(traj.times, traj.states)):
            rows.append((i, t, fh.tell()))
            fh.write(struct.pack("<d", t))
            if traj.frame == "hydro":
                fh.write(np.ascontiguousarray(snap.v.values, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(snap.w.values, dtype="<f8").tobytes())
            else:
                fh.write(np.ascontiguousarray(snap.m, dtype="<f8").tobytes())
    with open(path + ".index.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snapshot", "t", "byte_offset"])
        for i, t, off in rows:
            writer.writerow([i, f"{t:.17g}", off])


def load_trajectory(path) -> Trajectory:
    """Read a trajectory written by :func:`save_trajectory`."""
    with open(str(path), "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a trajectory file: bad magic {magic!r}")
        n, dx, x_min, tag, count, errlen = struct.unpack("<QddQQQ", fh.read(48))
        error = fh.read(errlen).decode("utf-8") or None
        frames = {v: k for k, v in _FRAME_TAGS.items()}
        if tag not in frames:
            raise ValueError(f"unknown frame tag {tag}")
        frame, sector = frames[tag]
        grid = Grid(n=int(n), dx=dx, x_min=x_min)
        times = []
        states = []
        for _ in range(count):
            (t,) = struct.unpack("<d", fh.read(8))
            times.append(t)
            if frame == "hydro":
                v = np.frombuffer(fh.read(8 * grid.n), dtype="<f8")
                w = np.frombuffer(fh.read(8 * grid.n), dtype="<f8")
                states.append(HydroState.from_arrays(grid, v, w))
            else:
                m = np.frombuffer(fh.read(24 * grid.n), dtype="<f8").reshape(grid.n, 3)
                states.append(SpinState(grid, m, sector))
    return Trajectory(frame=frame, grid=grid, times=np.array(times),
                      states=tuple(states), error=error)
