"""Unstable eigenvalue of the linearisation about Q for radial perturbations.

Writes the perturbation as e^(lambda t) times a radial function and solves
-L_- L_+ f = lambda^2 f with second-order finite differences for v = r f on
(0, r_max), Dirichlet at both ends.  A positive lambda^2 means a seeded Q
drifts away from itself like e^(lambda t), which bounds how long any
discretisation error can stay small.
"""
import argparse

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from inlslab.grid import interp_radial
from inlslab.ground_state import solve_ground_state


def unstable_rate(b, p, n=8000, r_max=20.0, shift=None):
    gs = solve_ground_state(b, p, tol=1e-8)
    h = r_max / n
    r = np.arange(1, n) * h
    q = interp_radial(gs.radial_grid.r, gs.profile.samples, r)
    d2 = sp.diags([np.ones(n - 2), -2.0 * np.ones(n - 1), np.ones(n - 2)], [-1, 0, 1]) / h**2
    w = r ** (-b) * q ** (p - 1.0)
    l_plus = -d2 + sp.diags(1.0 - p * w)
    l_minus = -d2 + sp.diags(1.0 - w)
    op = (-(l_minus @ l_plus)).tocsc()
    # a coarse scan for the largest positive real eigenvalue
    best = 0.0
    for s in ([shift] if shift else [10.0, 100.0, 1000.0, 3000.0]):
        vals = sla.eigs(op, k=4, sigma=s, which="LM", return_eigenvectors=False)
        real = [v.real for v in vals if abs(v.imag) < 1e-6 * abs(v) and v.real > 0]
        if real:
            best = max(best, max(real))
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--b", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--n", type=int, nargs="+", default=[4000, 8000])
    args = ap.parse_args()
    print(f"{'b':>5} {'n':>6} {'lambda^2':>12} {'lambda':>9} {'e-fold time':>12}")
    for b in args.b:
        for n in args.n:
            lam2 = unstable_rate(b, args.p, n)
            lam = np.sqrt(lam2)
            print(f"{b:5.2f} {n:6d} {lam2:12.4f} {lam:9.4f} {1.0 / lam:12.5f}")


if __name__ == "__main__":
    main()
