"""Below and above the threshold: 0.5 Q in an open box against 1.5 Q in the radial tracker."""
import argparse

from inlslab import classify as cl
from inlslab.cli import run_classification
from inlslab.config import load_config
from inlslab.grid import RadialField
from inlslab.ground_state import solve_ground_state
from inlslab.radial import evolve_radial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/scatter_half_Q.toml")
    args = ap.parse_args()
    cfg = load_config(args.config)
    res = run_classification(cfg)
    pr, vd = res["prediction"], res["verdict"]
    print(f"0.5 Q: prediction {pr['prediction']} (ratio_grad {pr['ratio_grad']:.4f}), verdict {vd['verdict']}")
    print(f"  {'t':>6} {'H1 Cauchy difference':>22} {'ratio':>8}")
    ratios = [None] + vd["decay_ratios"]
    for t, d, r in zip(vd["times"][1:], vd["cauchy_differences"], ratios):
        print(f"  {t:6.2f} {d:22.4e} {'' if r is None else f'{r:8.3f}'}")
    print(f"  local mass inf {vd['local_mass_infimum']:.4g} vs threshold {vd['local_mass_threshold']:.4g}")

    gs = solve_ground_state(cfg.physics.b, cfg.physics.p)
    run = evolve_radial(RadialField(gs.profile.grid, 1.5 * gs.profile.samples), cfg.physics.b, cfg.physics.p)
    print(f"1.5 Q: radial tracker stops at t={run.t_final:.6f}, |grad u| grew by {run.max_grad_growth:.4g}, "
          f"{run.remeshes} remeshes")


if __name__ == "__main__":
    main()
