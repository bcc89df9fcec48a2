"""Spectral decomposition of the soliton Hessian and modulation tracking.

Around a profile Q_c the relevant self-adjoint operator is the constrained
Hessian H_c = E''(Q_c) - c P''(Q_c).  It is applied matrix-free by a central
finite difference of the first variation grad E - c grad P; its kernel
contains the translation mode dQ_c/dx and it has exactly one negative
direction chi_c, computed here by a preconditioned block Davidson iteration
whose Rayleigh-Ritz values are certified by explicit residual norms.

``modulate`` decomposes a state s = sum_j s_j Q_{c_j}(. - a_j) + eps with eps
orthogonal (in L^2) to every translation mode and every negative direction,
solving the 2N orthogonality conditions for (c_j, a_j) by Newton iteration.
``track_modulation`` runs this along a trajectory with warm starts, reusing
each chi_{c_j} until the tracked speed has moved more than a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .dynamics import FieldPair, Trajectory
from .grid import (
    Grid,
    HydroState,
    RealField,
    SpinState,
    deriv_array,
    integrate,
    shift_array,
    x_norm,
)
from .solitons import (
    MultiSolitonConfig,
    extract_hydro,
    soliton_hydro,
    soliton_hydro_derivative,
    soliton_nu,
)


class ModulationError(RuntimeError):
    """Newton decomposition failed (no convergence, ordering lost, or a
    speed left the admissible range)."""


# ---------------------------------------------------------------------------
# first variation and Hessian
# ---------------------------------------------------------------------------

def grad_EP(state: HydroState) -> tuple[FieldPair, FieldPair]:
    """(grad E, grad P) at the state, as field pairs.

    grad E = ( -d/dx( v'/(1-v^2) ) + v (v')^2/(1-v^2)^2 - v w^2 + v,
               (1-v^2) w ),
    grad P = ( w, v ).
    """
    grid = state.grid
    v = state.v.values
    w = state.w.values
    om = 1.0 - v * v
    dv = deriv_array(v, grid, 1)
    ge1 = (-deriv_array(dv / om, grid, 1) + v * dv * dv / (om * om)
           - v * w * w + v)
    ge2 = om * w
    gradE = (RealField(grid, ge1), RealField(grid, ge2))
    gradP = (RealField(grid, w), RealField(grid, v))
    return gradE, gradP


def _pair_l2(h: FieldPair) -> float:
    return math.sqrt(integrate(h[0].values ** 2 + h[1].values ** 2, h[0].grid))


@dataclass(frozen=True, eq=False)
class HessianOperator:
    """Matrix-free H_c = E''(Q_c) - c P''(Q_c) at the profile centered at
    ``center`` (the domain midpoint when not given)."""

    c: float
    grid: Grid
    center: Optional[float] = None

    def __post_init__(self) -> None:
        soliton_nu(self.c)  # validates the speed range
        if self.center is None:
            object.__setattr__(self, "center", self.grid.x_min + 0.5 * self.grid.period)

    @cached_property
    def profile(self) -> tuple[np.ndarray, np.ndarray]:
        xi = self.grid.periodic_offset(self.grid.x, self.center)
        return soliton_hydro(self.c, xi)

    @cached_property
    def profile_derivative(self) -> tuple[np.ndarray, np.ndarray]:
        xi = self.grid.periodic_offset(self.grid.x, self.center)
        return soliton_hydro_derivative(self.c, xi)

    @cached_property
    def profile_norm(self) -> float:
        v0, w0 = self.profile
        return math.sqrt(integrate(v0 * v0 + w0 * w0, self.grid))

    def __call__(self, h: FieldPair) -> FieldPair:
        return hessian_apply(self, h)


def _grad_e_arrays(state: HydroState) -> tuple[np.ndarray, np.ndarray]:
    gradE, _ = grad_EP(state)
    return gradE[0].values, gradE[1].values


def hessian_apply(op: HessianOperator, h: FieldPair) -> FieldPair:
    """H_c h = [gradE(Q_c + d h) - gradE(Q_c - d h)]/(2d) - c (h2, h1).

    Only E'' needs differencing; P'' is applied exactly.  The step is
    d = 1e-5 * ||Q_c|| / ||h|| in L^2, making the operator exactly
    homogeneous of degree one in h.
    """
    grid = op.grid
    hnorm = _pair_l2(h)
    if hnorm == 0.0:
        zero = RealField(grid, np.zeros(grid.n))
        return zero, zero
    delta = 1e-5 * op.profile_norm / hnorm
    v0, w0 = op.profile
    plus = HydroState.from_arrays(grid, v0 + delta * h[0].values, w0 + delta * h[1].values)
    minus = HydroState.from_arrays(grid, v0 - delta * h[0].values, w0 - delta * h[1].values)
    gp1, gp2 = _grad_e_arrays(plus)
    gm1, gm2 = _grad_e_arrays(minus)
    inv = 0.5 / delta
    return (RealField(grid, (gp1 - gm1) * inv - op.c * h[1].values),
            RealField(grid, (gp2 - gm2) * inv - op.c * h[0].values))


def _hessian_apply_vec4(op: HessianOperator, x: np.ndarray) -> np.ndarray:
    """Fourth-order differencing of grad E on a stacked vector, P'' exact.

    The eigensolver needs applies whose deviation from linearity sits well
    below its residual targets; the cubic truncation term of the two-point
    stencil is amplified by 1/(1-v^2)^3 near deep profiles, so it is
    cancelled here with a four-point stencil at the same step.
    """
    grid = op.grid
    n = grid.n
    nrm = math.sqrt(grid.dx) * float(np.linalg.norm(x))
    if nrm == 0.0:
        return np.zeros(2 * n)
    delta = 1e-5 * op.profile_norm / nrm
    v0, w0 = op.profile
    h1 = x[:n]
    h2 = x[n:]

    def grad_at(mult: float) -> tuple[np.ndarray, np.ndarray]:
        state = HydroState.from_arrays(grid, v0 + mult * delta * h1, w0 + mult * delta * h2)
        return _grad_e_arrays(state)

    gm2 = grad_at(-2.0)
    gm1 = grad_at(-1.0)
    gp1 = grad_at(1.0)
    gp2 = grad_at(2.0)
    inv = 1.0 / (12.0 * delta)
    out1 = (gm2[0] - 8.0 * gm1[0] + 8.0 * gp1[0] - gp2[0]) * inv - op.c * h2
    out2 = (gm2[1] - 8.0 * gm1[1] + 8.0 * gp1[1] - gp2[1]) * inv - op.c * h1
    return np.concatenate([out1, out2])


# ---------------------------------------------------------------------------
# lowest eigenpairs: preconditioned block Davidson with thick restart
# ---------------------------------------------------------------------------

def _davidson_lowest(apply_vec, precond_vec, x0: np.ndarray, nev: int,
                     tol_first: float, tol_rest: float, maxiter: int = 300,
                     maxdim: int = 90):
    """Lowest ``nev`` Ritz pairs of a symmetric operator on column vectors.

    Convergence demands the first residual below tol_first and the remaining
    tracked residuals below tol_rest (Euclidean norms, unit Ritz vectors).
    Returns (thetas, vectors, residual_norms, iterations).
    """

    def orth_against(block, basis):
        for _ in range(2):
            block = block - basis @ (basis.T @ block)
        q, r = np.linalg.qr(block)
        keep = np.abs(np.diag(r)) > 1e-10
        return q[:, keep]

    V, _ = np.linalg.qr(x0)
    HV = np.column_stack([apply_vec(V[:, j]) for j in range(V.shape[1])])
    last = None
    for it in range(1, maxiter + 1):
        G = V.T @ HV
        G = 0.5 * (G + G.T)
        thetas, S = np.linalg.eigh(G)
        m = min(nev, len(thetas))
        U = V @ S[:, :m]
        HU = HV @ S[:, :m]
        R = HU - U * thetas[:m]
        res = np.sqrt(np.sum(R * R, axis=0))
        last = (thetas[:m], U, res, it)
        tols = np.full(m, tol_rest)
        tols[0] = tol_first
        if np.all(res <= tols):
            return last
        W = np.column_stack([precond_vec(R[:, j], thetas[j])
                             for j in range(m) if res[j] > tols[j]])
        if V.shape[1] + W.shape[1] > maxdim:
            keep = min(8 * nev, V.shape[1])
            V = V @ S[:, :keep]
            HV = HV @ S[:, :keep]
        W = orth_against(W, V)
        if W.shape[1] == 0:
            return last
        HW = np.column_stack([apply_vec(W[:, j]) for j in range(W.shape[1])])
        V = np.column_stack([V, W])
        HV = np.column_stack([HV, HW])
    return last


@dataclass(frozen=True, eq=False)
class NegativeMode:
    """The certified negative direction of H_c.

    ``chi`` is L^2-normalized with positive overlap against (v_c, 0);
    ``rayleigh`` is its (negative) Rayleigh quotient, ``residual`` the
    Euclidean eigenresidual, and ``negative_count`` the certified number of
    eigenvalues below -1e-6 (always 1 on successful construction).
    """

    c: float
    grid: Grid
    center: float
    chi: FieldPair
    rayleigh: float
    residual: float
    negative_count: int


def negative_mode(c: float, grid: Grid, center: Optional[float] = None,
                  tol_first: float = 2e-7, tol_certify: float = 1e-4,
                  maxiter: int = 200) -> NegativeMode:
    """Compute chi_c by a block Davidson iteration preconditioned with the
    inverse vacuum symbol [[k^2+1, -c], [-c, 1]]^(-1).

    The iteration runs on the low-pass subspace of the two-thirds rule.
    The unfiltered grid operator carries a spurious family of bound states
    rooted at the Nyquist mode: odd-order spectral derivatives annihilate
    the sawtooth carrier while the w-block has no derivatives at all, so a
    near-Nyquist wavepacket sees only the pointwise potential well of the
    core, which is deep enough at small |c| to bind below zero with an
    eigenvalue of size O(1/period).  No continuum counterpart exists (the
    essential spectrum of the line operator is bounded below by
    min(c^2, 1-|c|) > 0), and the genuine eigenvectors are spectrally
    smooth, so the projection leaves them unchanged to machine precision.

    Tracks the three lowest Ritz pairs; eigenvalues are counted as negative
    below -1e-6 and only residual-certified pairs participate in the count.
    Raises RuntimeError when the count differs from one or when an
    uncertified pair sits below the counting threshold.
    """
    op = HessianOperator(c, grid, center)
    n = grid.n
    k2 = grid.rfft_wavenumbers ** 2
    keep = np.arange(k2.size) <= n // 3

    def lowpass_vec(x: np.ndarray) -> np.ndarray:
        r1 = np.fft.rfft(x[:n])
        r2 = np.fft.rfft(x[n:])
        r1[~keep] = 0.0
        r2[~keep] = 0.0
        return np.concatenate([np.fft.irfft(r1, n=n), np.fft.irfft(r2, n=n)])

    def apply_vec(x: np.ndarray) -> np.ndarray:
        return lowpass_vec(_hessian_apply_vec4(op, x))

    def precond_vec(r: np.ndarray, theta: float = 0.0) -> np.ndarray:
        # inverse of the shifted vacuum symbol [[k^2+1-t, -c], [-c, 1-t]];
        # the shift is only applied safely below the symbol's spectrum
        t = theta if theta < -0.05 else 0.0
        det = (k2 + 1.0 - t) * (1.0 - t) - c * c
        r1 = np.fft.rfft(r[:n])
        r2 = np.fft.rfft(r[n:])
        g1 = ((1.0 - t) * r1 + c * r2) / det
        g2 = (c * r1 + (k2 + 1.0 - t) * r2) / det
        g1[~keep] = 0.0
        g2[~keep] = 0.0
        return np.concatenate([np.fft.irfft(g1, n=n), np.fft.irfft(g2, n=n)])

    v0, w0 = op.profile
    dv0, dw0 = op.profile_derivative
    rng = np.random.default_rng(2024)
    rand = rng.standard_normal((2 * n, 2))
    x0 = np.column_stack([
        lowpass_vec(np.concatenate([v0, w0])),
        lowpass_vec(np.concatenate([dv0, dw0])),
        precond_vec(rand[:, 0]),
        precond_vec(rand[:, 1]),
    ])
    thetas, U, res, iters = _davidson_lowest(apply_vec, precond_vec, x0, nev=3,
                                             tol_first=tol_first, tol_rest=tol_certify,
                                             maxiter=maxiter)
    if res[0] > tol_first:
        raise RuntimeError(
            f"eigensolver did not certify the lowest pair: residual {res[0]:.3e} "
            f"after {iters} iterations at c = {c}")
    certified = res <= tol_certify
    below = thetas < -1e-6
    if np.any(below & ~certified):
        raise RuntimeError(
            f"uncertified Ritz value below the counting threshold at c = {c}: "
            f"thetas {thetas}, residuals {res}")
    count = int(np.sum(below & certified))
    if count != 1:
        raise RuntimeError(
            f"expected exactly one negative eigenvalue at c = {c}, found {count} "
            f"(thetas {thetas}, residuals {res})")

    x = U[:, 0]
    l2 = math.sqrt(grid.dx) * float(np.linalg.norm(x))
    x = x / l2
    if integrate(x[:n] * v0, grid) < 0.0:
        x = -x
    chi = (RealField(grid, x[:n]), RealField(grid, x[n:]))
    return NegativeMode(c=c, grid=grid, center=op.center, chi=chi,
                        rayleigh=float(thetas[0]), residual=float(res[0]),
                        negative_count=count)


class ChiCache:
    """Per-soliton cache of negative directions, refreshed only when the
    tracked speed moves by more than ``refresh``."""

    def __init__(self, grid: Grid, refresh: float = 5e-3):
        self.grid = grid
        self.refresh = refresh
        self._modes: dict[int, NegativeMode] = {}

    def mode_for(self, index: int, c: float) -> NegativeMode:
        mode = self._modes.get(index)
        if mode is None or abs(mode.c - c) > self.refresh:
            mode = negative_mode(c, self.grid)
            self._modes[index] = mode
        return mode


# ---------------------------------------------------------------------------
# Newton decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModulationResult:
    """Decomposition s = sum_j s_j Q_{c_j}(. - a_j) + eps with eps orthogonal
    to the translation modes and negative directions of every soliton."""

    speeds: np.ndarray
    centers: np.ndarray
    signs: np.ndarray
    epsilon: HydroState
    residual_norm: float
    orthogonality: float
    newton_iters: int


def _guarded_sum(speeds, centers, signs, grid: Grid,
                 speed_margin: float) -> tuple[np.ndarray, np.ndarray]:
    if np.any(np.diff(speeds) <= 0.0):
        raise ModulationError(f"ordering lost: speeds {list(speeds)} are not increasing")
    if np.any(np.abs(speeds) >= 1.0 - speed_margin) or np.any(np.abs(speeds) <= speed_margin):
        raise ModulationError(
            f"speed out of range: speeds {list(speeds)} left "
            f"[{speed_margin}, {1.0 - speed_margin}] in magnitude")
    v = np.zeros(grid.n)
    w = np.zeros(grid.n)
    for c, a, s in zip(speeds, centers, signs):
        xi = grid.periodic_offset(grid.x, a)
        vj, wj = soliton_hydro(c, xi)
        v += s * vj
        w += s * wj
    return v, w


def _modulate_raw(sv: np.ndarray, sw: np.ndarray, grid: Grid,
                  speeds0: np.ndarray, centers0: np.ndarray, signs: np.ndarray,
                  chi: ChiCache, max_iter: int, speed_margin: float,
                  state_norm: float) -> ModulationResult:
    nsol = len(speeds0)

    def residual(params: np.ndarray) -> np.ndarray:
        speeds = params[:nsol]
        centers = params[nsol:]
        total_v, total_w = _guarded_sum(speeds, centers, signs, grid, speed_margin)
        ev = sv - total_v
        ew = sw - total_w
        out = np.empty(2 * nsol)
        for j in range(nsol):
            xi = grid.periodic_offset(grid.x, centers[j])
            dvj, dwj = soliton_hydro_derivative(speeds[j], xi)
            out[2 * j] = integrate(ev * dvj + ew * dwj, grid) * signs[j]
            mode = chi.mode_for(j, speeds[j])
            delta = centers[j] - mode.center
            c1 = shift_array(mode.chi[0].values, grid, delta)
            c2 = shift_array(mode.chi[1].values, grid, delta)
            out[2 * j + 1] = integrate(ev * c1 + ew * c2, grid) * signs[j]
        return out

    p = np.concatenate([speeds0, centers0]).astype(float)
    f = residual(p)
    fd_step = 1e-6
    iters = 0
    # drive the conditions to an absolute 1e-10, the floor of every
    # normalized tolerance below; Newton squares the error per step, so
    # this costs at most one iteration beyond the stated criterion
    while np.max(np.abs(f)) > 1e-10 and iters < max_iter:
        jac = np.empty((2 * nsol, 2 * nsol))
        for i in range(2 * nsol):
            dp = p.copy()
            dp[i] += fd_step
            jac[:, i] = (residual(dp) - f) / fd_step
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise ModulationError(f"no convergence: singular Jacobian ({exc})") from exc
        # backtracking: a full step that reduces max|f| is accepted as-is
        # (the warm-started regime), otherwise halve until it does or the
        # damping floor is reached; trial points outside the admissible
        # speed region count as non-reducing
        fmax = np.max(np.abs(f))
        scale = 1.0
        trial = None
        while True:
            try:
                cand = residual(p - scale * step)
            except ModulationError:
                cand = None
            if cand is not None and (np.max(np.abs(cand)) < fmax
                                     or scale <= 1.0 / 256.0):
                trial = cand
                break
            if scale <= 1.0 / 256.0:
                # even the floor-damped point is inadmissible; surface the
                # guard failure of the undamped step
                residual(p - step)
                raise ModulationError("no convergence: damping floor reached")
            scale *= 0.5
        p = p - scale * step
        f = trial
        iters += 1

    ortho = float(np.max(np.abs(f)))
    if ortho > 1e-10 * (1.0 + state_norm):
        raise ModulationError(
            f"no convergence: orthogonality residual {ortho:.3e} after {iters} iterations")
    speeds = p[:nsol]
    centers = p[nsol:]
    total_v, total_w = _guarded_sum(speeds, centers, signs, grid, speed_margin)
    eps = HydroState.from_arrays(grid, sv - total_v, sw - total_w)
    eps_norm = x_norm(eps)
    if ortho > 1e-10 * (1.0 + eps_norm):
        raise ModulationError(
            f"no convergence: orthogonality residual {ortho:.3e} after {iters} iterations")
    return ModulationResult(speeds=speeds.copy(), centers=centers.copy(),
                            signs=np.array(signs, dtype=int), epsilon=eps,
                            residual_norm=eps_norm, orthogonality=ortho,
                            newton_iters=iters)


def modulate(state: HydroState, guess: MultiSolitonConfig,
             chi: Optional[ChiCache] = None, max_iter: int = 25,
             speed_margin: float = 1e-3) -> ModulationResult:
    """Solve the orthogonality conditions for (c_j, a_j) by Newton iteration
    starting from the guess configuration.

    Raises :class:`ModulationError` with reason "no convergence", "ordering
    lost", or "speed out of range".
    """
    if chi is None:
        chi = ChiCache(state.grid)
    return _modulate_raw(state.v.values, state.w.values, state.grid,
                         guess.speeds, guess.centers, guess.signs.astype(float),
                         chi, max_iter, speed_margin, x_norm(state))


# ---------------------------------------------------------------------------
# tracking along a trajectory
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModulationTrack:
    """Modulation parameters along a trajectory, with centered-difference
    estimates of the parameter rates."""

    times: np.ndarray
    speeds: np.ndarray        # (T, N)
    centers: np.ndarray       # (T, N)
    signs: np.ndarray
    eps_norms: np.ndarray
    orthogonality: np.ndarray
    newton_iters: np.ndarray
    epsilons: tuple

    @property
    def n_solitons(self) -> int:
        return self.speeds.shape[1]

    @cached_property
    def center_rates(self) -> np.ndarray:
        return np.gradient(self.centers, self.times, axis=0)

    @cached_property
    def speed_rates(self) -> np.ndarray:
        return np.gradient(self.speeds, self.times, axis=0)


def _as_hydro(state) -> HydroState:
    if isinstance(state, HydroState):
        return state
    if isinstance(state, SpinState):
        return extract_hydro(state)
    raise TypeError(f"cannot take modulation of {type(state).__name__}")


def track_modulation(traj: Trajectory, guess: MultiSolitonConfig,
                     keep_epsilons: bool = False) -> ModulationTrack:
    """Run the Newton decomposition at every snapshot, warm starting each
    solve from the previous parameters and reusing cached negative
    directions until a speed drifts by more than the cache threshold."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    grid = traj.grid
    cache = ChiCache(grid)
    nsol = guess.n_solitons
    times = np.asarray(traj.times, dtype=float)
    speeds = np.empty((len(traj), nsol))
    centers = np.empty((len(traj), nsol))
    eps_norms = np.empty(len(traj))
    ortho = np.empty(len(traj))
    iters = np.empty(len(traj), dtype=int)
    epsilons = []

    warm_speeds = np.array(guess.speeds, dtype=float)
    warm_centers = np.array(guess.centers, dtype=float)
    signs_f = guess.signs.astype(float)
    for i, snap in enumerate(traj.states):
        hydro = _as_hydro(snap)
        try:
            result = _modulate_raw(hydro.v.values, hydro.w.values, grid,
                                   warm_speeds, warm_centers, signs_f, cache,
                                   max_iter=25, speed_margin=1e-3,
                                   state_norm=x_norm(hydro))
        except ModulationError as exc:
            err = ModulationError(f"at t = {times[i]:.6g}: {exc}")
            err.timestamp = float(times[i])
            err.snapshot_index = i
            raise err from exc
        speeds[i] = result.speeds
        centers[i] = result.centers
        eps_norms[i] = result.residual_norm
        ortho[i] = result.orthogonality
        iters[i] = result.newton_iters
        if keep_epsilons:
            epsilons.append(result.epsilon)
        warm_speeds = result.speeds
        warm_centers = result.centers
    return ModulationTrack(times=times, speeds=speeds, centers=centers,
                           signs=guess.signs.copy(), eps_norms=eps_norms,
                           orthogonality=ortho, newton_iters=iters,
                           epsilons=tuple(epsilons))


def track_to_csv(track: ModulationTrack, path) -> None:
    """CSV columns: t, c_1..c_N, a_1..a_N, eps_xnorm, iters."""
    import csv

    nsol = track.n_solitons
    header = (["t"] + [f"c_{j + 1}" for j in range(nsol)]
              + [f"a_{j + 1}" for j in range(nsol)] + ["eps_xnorm", "iters"])
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, t in enumerate(track.times):
            row = [f"{t:.17g}"]
            row += [f"{c:.17g}" for c in track.speeds[i]]
            row += [f"{a:.17g}" for a in track.centers[i]]
            row += [f"{track.eps_norms[i]:.17g}", str(int(track.newton_iters[i]))]
            writer.writerow(row)
