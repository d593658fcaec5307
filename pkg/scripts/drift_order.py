"""Energy drift of the split-step scheme at dt, dt/2, dt/4 for the conservation recipe."""
import argparse

import numpy as np

from inlslab import diagnostics as dg
from inlslab.config import load_config, make_initial_data
from inlslab.propagator import evolve


def max_drift(cfg, dt):
    grid, V = cfg.make_grid(), cfg.make_potential()
    u0 = make_initial_data(cfg, grid)
    cfg.evolve.dt = dt
    cfg.evolve.record_every = max(1, int(round(0.02 / dt)))
    traj = evolve(u0, V, (cfg.physics.b, cfg.physics.p), cfg.make_evolve_config(),
                  dg.Diagnostics(grid, V, cfg.physics.b, cfg.physics.p))
    e = np.array([r.energy for r in traj.records])
    m = np.array([r.mass for r in traj.records])
    return np.abs(e - e[0]).max(), np.abs(m - m[0]).max() / m[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/conservation.toml")
    ap.add_argument("--dt", type=float, default=4e-3)
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    cfg = load_config(args.config)
    prev = None
    print(f"{'dt':>8} {'max|E-E0|':>12} {'mass drift':>11} {'ratio':>7}")
    for j in range(args.levels):
        dt = args.dt / 2**j
        de, dm = max_drift(cfg, dt)
        ratio = f"{prev / de:7.3f}" if prev else "      -"
        print(f"{dt:8.1e} {de:12.4e} {dm:11.2e} {ratio}")
        prev = de


if __name__ == "__main__":
    main()
