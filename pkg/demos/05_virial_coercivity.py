"""Check the virial growth bound U' >= 1/4 ||(v,w)||_X^2 on seeded
small-amplitude runs (the quantitative heart of the Liouville argument)."""

import numpy as np

from ll_lab import (Grid, HydroState, IntegratorConfig, evolve,
                    random_smooth_pair, virial_rate, x_norm)

AMPLITUDE = 0.01
RUNS = 5
T = 10.0


def main():
    grid = Grid(n=2048, dx=0.1, x_min=-102.4)
    config = IntegratorConfig(dt=2e-3, t_end=T, sample_stride=250)
    print(f"{RUNS} runs, amplitude {AMPLITUDE}, T = {T}")
    worst = np.inf
    for k in range(RUNS):
        dv, dw = random_smooth_pair(grid, AMPLITUDE, seed=100 + k,
                                    max_mode=8, sigma=grid.period / 10.0)
        traj = evolve(HydroState.from_arrays(grid, dv, dw), config)
        margins = [virial_rate(s) - 0.25 * x_norm(s) ** 2 for s in traj.states]
        worst = min(worst, min(margins))
        print(f"  seed {100 + k}: min margin {min(margins):+.6e} "
              f"(U' range [{min(margins) + 0.25 * x_norm(traj.states[0]) ** 2:.3e}, "
              f"{max(virial_rate(s) for s in traj.states):.3e}])")
    print(f"worst margin over all runs: {worst:+.6e} "
          f"({'coercive' if worst >= 0 else 'VIOLATED'})")


if __name__ == "__main__":
    main()
