"""Follow radial data c*Q with the remeshing Crank-Nicolson tracker."""
import argparse
import time

from inlslab.grid import RadialField
from inlslab.ground_state import solve_ground_state
from inlslab.radial import RadialCollapseConfig, evolve_radial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c", type=float, nargs="+", default=[0.999, 1.001, 1.5])
    ap.add_argument("--b", type=float, default=0.5)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--resolution", type=float, default=100.0)
    ap.add_argument("--dt0", type=float, default=4e-4)
    args = ap.parse_args()
    gs = solve_ground_state(args.b, args.p)
    cfg = RadialCollapseConfig(t_end=args.t_end, resolution=args.resolution, dt0=args.dt0)
    print(f"{'c':>7} {'t_final':>10} {'growth':>9} {'remeshes':>8} {'steps':>7} {'mass drift':>11} {'sec':>6}  signal")
    for c in args.c:
        t0 = time.time()
        run = evolve_radial(RadialField(gs.profile.grid, c * gs.profile.samples), args.b, args.p, cfg=cfg)
        signal = run.blowup.reason if run.blowup else "-"
        print(f"{c:7.4f} {run.t_final:10.6f} {run.max_grad_growth:9.4g} {run.remeshes:8d} {run.steps:7d} "
              f"{run.mass_drift:11.2e} {time.time() - t0:6.1f}  {signal}")


if __name__ == "__main__":
    main()
