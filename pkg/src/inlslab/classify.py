"""Threshold predictions for initial data and dynamical verdicts from runs.

Predictions (from norms of u0 against the ground state) and verdicts (from a
trajectory) are separate fields and never overwrite each other.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import diagnostics as dg
from .ground_state import GroundState, threshold_constants
from .grid import Field3, grad_norm_sq_parseval, fft3
from .potential import AdmissibilityReport, KatoQuadrature, PotentialSpec, check_assumptions
from .propagator import Trajectory, linear_flow

PREDICTIONS = ("global_scattering", "possible_blowup", "indeterminate")
VERDICTS = ("scattering_evidence", "blowup", "inconclusive")


@dataclass
class DichotomyReport:
    s_c: float
    ratio_grad: float
    ratio_grad_plain: float
    ratio_mass_energy: float
    energy: float
    mass: float
    prediction: str
    hypotheses: dict = field(default_factory=dict)
    reasons: list = field(default_factory=list)
    boundary_band: float = 1e-2
    # ratios against the continuum constants, and the grid error of Q that separates the two
    ratio_grad_continuum: float = math.nan
    ratio_mass_energy_continuum: float = math.nan
    q_embedding_error: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _scale_invariant(norm: float, mass: float, sigma: float) -> float:
    return norm * math.sqrt(mass) ** sigma


def _grid_norms(u: Field3, b: float, p: float):
    """(mass, |grad u|^2, N(u)) with the same quadratures used for u0."""
    return dg.mass(u), grad_norm_sq_parseval(u.grid, fft3(u.values)), dg.nl_energy(u, b, p)


def dichotomy_report(
    u0: Field3,
    V: PotentialSpec,
    gs: GroundState,
    admissibility: Optional[AdmissibilityReport] = None,
    boundary_band: float = 1e-2,
    quad: KatoQuadrature = KatoQuadrature(),
    grid_reference: bool = True,
) -> DichotomyReport:
    """Compare u0 with the thresholds set by Q.

    ratio_grad         |Gamma u0| |u0|^sigma / (|grad Q| |Q|^sigma)
    ratio_grad_plain   the same with grad u0 in place of Gamma u0
    ratio_mass_energy  max(E(u0), 0)^s_c M(u0)^(1 - s_c) / (E_0(Q)^s_c M(Q)^(1 - s_c))

    With ``grid_reference`` the Q norms come from Q sampled on u0's grid, so
    u0 = c Q gives exactly c^(1 + sigma) whatever the resolution; the
    continuum ratios are reported alongside.  Ratios within
    max(boundary_band, q_embedding_error) of 1 give an indeterminate prediction.
    """
    b, p = gs.b, gs.p
    tc = threshold_constants(gs)
    s_c, sigma = tc.s_c, tc.sigma
    m, grad2, nl = _grid_norms(u0, b, p)
    pot = dg.potential_energy(u0, V)
    e = 0.5 * grad2 + 0.5 * pot - nl / (p + 1.0)
    gamma2 = grad2 + pot

    mq, gq, nq = _grid_norms(gs.embed(u0.grid), b, p)
    k_grad_grid = _scale_invariant(math.sqrt(gq), mq, sigma)
    e0_grid = 0.5 * gq - nq / (p + 1.0)
    k_me_grid = e0_grid ** s_c * mq ** (1.0 - s_c)
    q_err = abs(gq / gs.grad_norm_sq - 1.0)
    k_grad, k_me = (k_grad_grid, k_me_grid) if grid_reference else (tc.K_grad, tc.K_mass_energy)

    def ratios(kg, kme):
        return (_scale_invariant(math.sqrt(max(gamma2, 0.0)), m, sigma) / kg,
                _scale_invariant(math.sqrt(grad2), m, sigma) / kg,
                max(e, 0.0) ** s_c * m ** (1.0 - s_c) / kme)

    ratio_grad, ratio_plain, ratio_me = ratios(k_grad, k_me)
    cont_grad, _, cont_me = ratios(tc.K_grad, tc.K_mass_energy)
    band = max(boundary_band, q_err)

    if admissibility is None:
        admissibility = check_assumptions(V, quad)
    hyps = {
        "in_K0_cap_L32": admissibility.in_K0_cap_L32,
        "nonneg": admissibility.nonneg,
        "repulsive": admissibility.repulsive,
        "negative_part_below_4pi": admissibility.negative_part_below_4pi,
        "theorem_hypotheses": admissibility.theorem_hypotheses,
    }
    reasons = []
    if e <= 0:
        reasons.append("E(u0) <= 0: mass-energy ratio set to 0")
    if gamma2 < 0:
        reasons.append("|Gamma u0|^2 < 0")
    if q_err > boundary_band:
        reasons.append(f"Q is resolved to {q_err:.2g} in |grad Q|^2 on this grid; band widened to match")

    near = [name for name, r in (("ratio_grad", ratio_grad), ("ratio_mass_energy", ratio_me))
            if abs(r - 1.0) < band]
    if near:
        prediction = "indeterminate"
        reasons.append(f"{', '.join(near)} within {band:.3g} of the threshold")
    elif ratio_me >= 1.0:
        prediction = "indeterminate"
        reasons.append("mass-energy ratio above threshold: no statement available")
    elif ratio_grad < 1.0:
        prediction = "global_scattering"
    else:
        prediction = "possible_blowup"
    if prediction == "global_scattering" and not all(hyps.values()):
        failed = [k for k, v in hyps.items() if not v]
        prediction = "indeterminate"
        reasons.append("hypotheses on V fail: " + ", ".join(failed))
    return DichotomyReport(s_c, ratio_grad, ratio_plain, ratio_me, e, m, prediction,
                           hyps, reasons, band, cont_grad, cont_me, q_err)


# scattering detector ---------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    decay_factor: float = 10.0
    local_mass_fraction: float = 0.01
    # None selects L / 8
    radius: Optional[float] = None
    min_samples: int = 3
    pullback_dt: float = 1e-2

    def radius_for(self, box_length: float) -> float:
        return self.radius if self.radius is not None else box_length / 8.0


@dataclass
class ScatterVerdict:
    times: list
    cauchy_differences: list
    u_plus: Optional[Field3]
    local_mass_infimum: float
    local_mass_radius: float
    local_mass_threshold: float
    verdict: str
    reasons: list = field(default_factory=list)
    caveats: list = field(default_factory=list)

    @property
    def decay_ratios(self) -> list:
        d = self.cauchy_differences
        return [d[i] / d[i + 1] if d[i + 1] > 0 else math.inf for i in range(len(d) - 1)]

    @property
    def total_decay(self) -> float:
        d = self.cauchy_differences
        if len(d) < 2:
            return math.nan
        return d[0] / d[-1] if d[-1] > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "times": list(self.times), "cauchy_differences": list(self.cauchy_differences),
            "decay_ratios": self.decay_ratios, "total_decay": self.total_decay,
            "local_mass_infimum": self.local_mass_infimum,
            "local_mass_radius": self.local_mass_radius,
            "local_mass_threshold": self.local_mass_threshold,
            "verdict": self.verdict, "reasons": list(self.reasons), "caveats": list(self.caveats),
        }


def h1_distance(f: Field3, g: Field3) -> float:
    d = f - g
    return math.sqrt(dg.mass(d) + grad_norm_sq_parseval(d.grid, fft3(d.values)))


def pullbacks(traj: Trajectory, V: PotentialSpec, dt: float = 1e-2):
    """(t_j, w(t_j) = e^(i t_j H) u(t_j)) for every stored snapshot with t_j > 0.

    On an open-system run the absorbed mass, continued by the free flow, is
    added back so that w still describes the whole solution.
    """
    out = []
    for t, u in traj.snapshot_list():
        if t > 0:
            w = linear_flow(u, V, -t, dt)
            if t in traj.reservoir:
                w = w + traj.reservoir[t]
            out.append((t, w))
    return out


def _local_mass_series(traj: Trajectory, R: float):
    recs = [r for r in traj.records if isinstance(r, dg.DiagnosticsRecord)]
    if recs and R in recs[0].local_mass:
        return [r.local_mass[R] for r in recs], recs[0].mass
    snaps = traj.snapshot_list()
    if not snaps:
        return [], math.nan
    return [dg.local_mass(u, R) for _, u in snaps], dg.mass(snaps[0][1])


def scattering_detector(traj: Trajectory, V: PotentialSpec, cfg: DetectorConfig = DetectorConfig()) -> ScatterVerdict:
    """Cauchy test on the pullbacks plus the local-mass surrogate for small local mass.

    scattering_evidence needs the H^1 differences of successive pullbacks to
    decrease monotonically with first/last ratio >= ``decay_factor`` and the
    local mass in B(0, R) to drop below ``local_mass_fraction`` M(u0).
    """
    R = cfg.radius_for(traj.grid.box_length)
    caveats = []
    if traj.open_system:
        caveats.append("open-system run: absorbed mass is continued by the free flow in the pullbacks")
    caveats.append(f"surrogate thresholds: R={R:g}, local mass < {cfg.local_mass_fraction:g} M(u0)")
    series, m0 = _local_mass_series(traj, R)
    inf_local = float(min(series)) if series else math.nan
    threshold = cfg.local_mass_fraction * m0 if series else math.nan

    if traj.blowup is not None:
        return ScatterVerdict([], [], None, inf_local, R, threshold, "blowup",
                              [f"propagator signal: {traj.blowup.reason}"], caveats)

    pb = pullbacks(traj, V, cfg.pullback_dt)
    times = [t for t, _ in pb]
    diffs = [h1_distance(pb[i + 1][1], pb[i][1]) for i in range(len(pb) - 1)]
    u_plus = pb[-1][1] if pb else None
    reasons = []
    if len(diffs) < cfg.min_samples - 1:
        reasons.append(f"need at least {cfg.min_samples} pullback times, have {len(pb)}")
        return ScatterVerdict(times, diffs, u_plus, inf_local, R, threshold, "inconclusive", reasons, caveats)
    monotone = all(diffs[i + 1] < diffs[i] for i in range(len(diffs) - 1))
    total = diffs[0] / diffs[-1] if diffs[-1] > 0 else math.inf
    decays = monotone and total >= cfg.decay_factor
    small_local = inf_local < threshold
    if not monotone:
        reasons.append("Cauchy differences are not monotonically decreasing")
    if total < cfg.decay_factor:
        reasons.append(f"Cauchy differences decay by {total:.3g} < {cfg.decay_factor:g}")
    if not small_local:
        reasons.append(f"local mass infimum {inf_local:.3g} >= {threshold:.3g}")
    verdict = "scattering_evidence" if decays and small_local else "inconclusive"
    return ScatterVerdict(times, diffs, u_plus, inf_local, R, threshold, verdict, reasons, caveats)


# Morawetz and evacuation ---------------------------------------------------------------

def _evacuation_series(traj: Trajectory, R: float, b: float, p: float):
    recs = [r for r in traj.records if isinstance(r, dg.DiagnosticsRecord)]
    if recs and R in recs[0].evacuation:
        return np.array([r.t for r in recs]), np.array([r.evacuation[R] for r in recs])
    snaps = traj.snapshot_list()
    if len(snaps) < 2:
        raise ValueError(f"no evacuation samples at R={R:g}: record them or store snapshots")
    return (np.array([t for t, _ in snaps]),
            np.array([dg.evacuation_functional(u, R, b, p) for _, u in snaps]))


def morawetz_average(traj: Trajectory, R: float, T: float) -> float:
    """(1/T) int_0^T int_{|x| <= R/2} |x|^-b |u|^(p+1) dx dt, trapezoid rule in t."""
    t, y = _evacuation_series(traj, 0.5 * R, traj.b, traj.p)
    if not 0 < T <= t[-1] + 1e-12:
        raise ValueError(f"T={T:g} outside the recorded span (0, {t[-1]:g}]")
    sel = t <= T
    ts, ys = t[sel], y[sel]
    if ts[-1] < T:
        ts = np.append(ts, T)
        ys = np.append(ys, np.interp(T, t, y))
    return float(trapezoid(ys, ts) / T)


@dataclass
class EvacuationScan:
    entries: list
    partial: bool

    def values(self) -> list:
        return [e[2] for e in self.entries]


def evacuation_scan(traj: Trajectory, R_schedule: Sequence[float]) -> EvacuationScan:
    """For each R_n, the minimum over t in [0, R_n^3] of the evacuation functional at R_n."""
    entries = []
    partial = False
    for R in R_schedule:
        t, y = _evacuation_series(traj, float(R), traj.b, traj.p)
        horizon = R**3
        if horizon > t[-1]:
            partial = True
        sel = t <= horizon
        j = int(np.argmin(y[sel]))
        entries.append((float(t[sel][j]), float(R), float(y[sel][j])))
    return EvacuationScan(entries, partial)


def holder_exponent(b: float, p: float) -> float:
    return (2.0 * b + 3.0 * (p - 1.0)) / (p + 1.0)


def holder_constant(b: float, p: float) -> float:
    """Sharp constant C with  int_{B_R} |u|^2 <= C R^e (int_{B_R} |x|^-b |u|^(p+1))^(2/(p+1))."""
    c = 2.0 * b / (p - 1.0)
    return (4.0 * math.pi / (3.0 + c)) ** ((p - 1.0) / (p + 1.0))


def final_holder_check(u: Field3, R: float, R_n: float, b: float, p: float) -> tuple[float, float]:
    """Both sides of the Hoelder step with constant 1 on the right."""
    if not R <= R_n:
        raise ValueError("need R <= R_n")
    lhs = dg.local_mass(u, R)
    evac = dg.evacuation_functional(u, R_n, b, p)
    rhs = R ** holder_exponent(b, p) * evac ** (2.0 / (p + 1.0))
    return lhs, rhs
