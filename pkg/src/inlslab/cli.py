"""Command-line entry point: ``inlslab <subcommand> [--config PATH] [--override KEY=VALUE] ...``.

Exit codes: 0 ok (a blow-up is a recorded verdict, not a failure), 2 config
error, 3 runtime error, 4 I/O or checkpoint corruption.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import classify as cl
from . import diagnostics as dg
from .checkpoint import CheckpointError, CheckpointState, checkpoint_write
from .config import ConfigError, RunConfig, load_config, make_initial_data
from .grid import RadialField
from .ground_state import pohozaev_residuals, solve_ground_state, threshold_constants
from .potential import check_assumptions
from .propagator import evolve
from .radial import RadialCollapseConfig, evolve_radial
from .weights import MorawetzWeight

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _envelope(cfg: RunConfig, command: str, payload: dict) -> dict:
    return {
        "version": __version__, "command": command, "stamp": cfg.stamp,
        "nonconforming": list(cfg.nonconforming), "config_digest": cfg.digest(),
        "config": cfg.to_dict(), **payload,
    }


def write_json(path: Path, cfg: RunConfig, command: str, payload: dict) -> Path:
    text = json.dumps(_envelope(cfg, command, payload), indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n")
    return path


def preamble(cfg: RunConfig) -> list[str]:
    return [f"inlslab {__version__}", f"stamp {cfg.stamp}", f"config_digest {cfg.digest()}",
            f"config {cfg.echo()}"]


class Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *parts):
        if not self.quiet:
            print(*parts)


# shared pieces --------------------------------------------------------------------

def _needs_ground_state(cfg: RunConfig) -> bool:
    return cfg.initial_data.family == "ground_state_multiple"


def _sink(cfg: RunConfig, grid, V):
    w = MorawetzWeight(cfg.diagnostics.weight_R) if cfg.diagnostics.weight_R > 0 else None
    local = sorted(set(cfg.diagnostics.local_radii) | {cfg.detector_radius()})
    return dg.Diagnostics(grid, V, cfg.physics.b, cfg.physics.p, local_radii=local,
                          evacuation_radii=cfg.diagnostics.evacuation_radii, weight=w,
                          nonlinearity_on=cfg.evolve.nonlinearity_on)


def run_classification(cfg: RunConfig, gs=None, return_trajectory: bool = False):
    """Prediction from u0 plus verdicts from the 3D run and, optionally, the radial tracker.

    With ``return_trajectory`` the 3D trajectory comes back as a second value.
    """
    b, p = cfg.physics.b, cfg.physics.p
    if gs is None:
        gs = solve_ground_state(b, p)
    grid, V = cfg.make_grid(), cfg.make_potential()
    u0 = make_initial_data(cfg, grid, gs)
    report = cl.dichotomy_report(u0, V, gs, boundary_band=cfg.classify.boundary_band)
    traj = evolve(u0, V, (b, p), cfg.make_evolve_config(cfg.pullback_times()), _sink(cfg, grid, V))
    det = cl.DetectorConfig(cfg.classify.decay_factor, cfg.classify.local_mass_fraction,
                            cfg.detector_radius())
    verdict = cl.scattering_detector(traj, V, det)
    out = {"prediction": report.to_dict(), "verdict": verdict.to_dict(), "tags": traj.tags,
           "t_final": traj.t_final, "absorbed_mass": traj.absorbed_mass, "radial": None}
    if cfg.classify.radial_tracker:
        if not (_needs_ground_state(cfg) and V.is_radial and not any(cfg.initial_data.center)):
            raise ConfigError("the radial tracker needs radial data c*Q centred at the origin",
                              "classify.radial_tracker")
        c = cfg.initial_data.c
        run = evolve_radial(RadialField(gs.profile.grid, c * gs.profile.samples), b, p, V,
                            RadialCollapseConfig(t_end=cfg.evolve.t_end, max_grad_growth=cfg.evolve.max_grad_growth))
        out["radial"] = {
            "t_final": run.t_final, "max_grad_growth": run.max_grad_growth,
            "blowup": run.blowup.reason if run.blowup else None, "remeshes": run.remeshes,
            "mass_drift": run.mass_drift,
        }
        if run.blowup is not None and verdict.verdict != "blowup":
            out["verdict"]["verdict"] = "blowup"
            out["verdict"]["reasons"].append(f"radial tracker at t={run.blowup.t:.6g}: {run.blowup.reason}")
    return (out, traj) if return_trajectory else out


# subcommands ------------------------------------------------------------------------

def cmd_check_potential(cfg, out: Path, say) -> int:
    rep = check_assumptions(cfg.make_potential())
    write_json(out / "admissibility.json", cfg, "check-potential", {"report": rep.to_dict()})
    say(f"kato_norm {rep.kato_norm:.6g}  negative part {rep.kato_norm_negative_part:.6g}")
    say(f"nonneg {rep.nonneg}  repulsive {rep.repulsive} ({rep.repulsive_basis})  "
        f"theorem hypotheses {'pass' if rep.theorem_hypotheses else 'fail'}")
    for note in rep.notes:
        say(f"note: {note}")
    return EXIT_OK


def cmd_ground_state(cfg, out: Path, say) -> int:
    gs = solve_ground_state(cfg.physics.b, cfg.physics.p)
    tc = threshold_constants(gs)
    res = pohozaev_residuals(gs)
    write_json(out / "ground_state.json", cfg, "ground-state", {
        "ground_state": gs.to_dict(), "pohozaev_residuals": list(res),
        "thresholds": {"s_c": tc.s_c, "K_grad": tc.K_grad, "K_mass_energy": tc.K_mass_energy,
                       "sigma": tc.sigma},
    })
    with open(out / "ground_state.csv", "w") as fh:
        for line in preamble(cfg):
            fh.write(f"# {line}\n")
        fh.write("r,Q,dQ\n")
        for r, q, dq in zip(gs.profile.grid.r, gs.profile.samples, gs.dprofile):
            fh.write(f"{r!r},{float(q)!r},{float(dq)!r}\n")
    say(f"beta {gs.amplitude:.12g}  mass {gs.mass:.10g}  |grad Q|^2 {gs.grad_norm_sq:.10g}")
    say(f"pohozaev residuals {res[0]:.3e} {res[1]:.3e}  s_c {tc.s_c:.6g}  K_grad {tc.K_grad:.10g}")
    return EXIT_OK


def cmd_evolve(cfg, out: Path, say) -> int:
    b, p = cfg.physics.b, cfg.physics.p
    grid, V = cfg.make_grid(), cfg.make_potential()
    gs = solve_ground_state(b, p) if _needs_ground_state(cfg) else None
    u0 = make_initial_data(cfg, grid, gs)
    ck_dir = out / "checkpoints"
    if cfg.evolve.checkpoint_every:
        ck_dir.mkdir(exist_ok=True)

    def save(t, u):
        k = int(round(t / cfg.evolve.dt))
        checkpoint_write(CheckpointState(u, t, b, p, V), ck_dir / f"step{k:09d}.inls")

    traj = evolve(u0, V, (b, p), cfg.make_evolve_config(), _sink(cfg, grid, V), save)
    with open(out / "diagnostics.csv", "w") as fh:
        dg.write_csv(traj.records, fh, preamble(cfg))
    checkpoint_write(CheckpointState(traj.final, traj.t_final, b, p, V), out / "final.inls")
    blow = None if traj.blowup is None else {"t": traj.blowup.t, "reason": traj.blowup.reason}
    write_json(out / "run.json", cfg, "evolve", {
        "t_final": traj.t_final, "tags": traj.tags, "blowup": blow, "absorbed_mass": traj.absorbed_mass,
        "records": len(traj.records),
    })
    r0, r1 = traj.records[0], traj.records[-1]
    say(f"t_final {traj.t_final:.6g}  tags {','.join(traj.tags)}")
    say(f"mass drift {abs(r1.mass - r0.mass) / r0.mass:.3e}  energy drift {abs(r1.energy - r0.energy):.3e}")
    if blow:
        say(f"blow-up signal: {blow['reason']} at t={blow['t']:.6g}")
    return EXIT_OK


def cmd_classify(cfg, out: Path, say) -> int:
    res = run_classification(cfg)
    write_json(out / "classify.json", cfg, "classify", res)
    pr, vd = res["prediction"], res["verdict"]
    say(f"prediction {pr['prediction']}  ratio_grad {pr['ratio_grad']:.6g}  "
        f"ratio_mass_energy {pr['ratio_mass_energy']:.6g}")
    say(f"verdict {vd['verdict']}  total decay {vd['total_decay']:.4g}  "
        f"local mass inf {vd['local_mass_infimum']:.4g} (threshold {vd['local_mass_threshold']:.4g})")
    for reason in pr["reasons"] + vd["reasons"]:
        say(f"  {reason}")
    return EXIT_OK


VIRIAL_TOL = 1e-2
QUADRATIC_TOL = 1e-10


def cmd_virial_test(cfg, out: Path, say) -> int:
    b, p = cfg.physics.b, cfg.physics.p
    grid, V = cfg.make_grid(), cfg.make_potential()
    gs = solve_ground_state(b, p) if _needs_ground_state(cfg) else None
    u0 = make_initial_data(cfg, grid, gs)
    dt = cfg.evolve.dt
    R = cfg.diagnostics.weight_R if cfg.diagnostics.weight_R > 0 else grid.box_length / 4.0
    weight = MorawetzWeight(R)
    centres = [t for t in (cfg.evolve.snapshot_times or [0.5 * cfg.evolve.t_end]) if dt <= t <= cfg.evolve.t_end - dt]
    snaps = sorted({s for t in centres for s in (t - dt, t, t + dt)})
    traj = evolve(u0, V, (b, p), cfg.make_evolve_config(snaps))
    got = dict(traj.snapshot_list())
    rows = []
    for t in centres:
        keys = [min(got, key=lambda s: abs(s - x)) for x in (t - dt, t, t + dt)]
        fd = (dg.virial_Z(got[keys[2]], weight) - dg.virial_Z(got[keys[0]], weight)) / (keys[2] - keys[0])
        rhs, _ = dg.virial_rhs(got[keys[1]], weight, V, b, p)
        err = abs(fd - rhs) / max(abs(rhs), 1e-300)
        rows.append(("cutoff", keys[1], fd, rhs, err, VIRIAL_TOL, err < VIRIAL_TOL))
    q_eval, _ = dg.virial_rhs(u0, None, type(V).zero(), b, p)
    q_closed = dg.virial_rhs_quadratic(u0, b, p)
    q_err = abs(q_eval - q_closed) / max(abs(q_closed), 1e-300)
    rows.append(("quadratic", 0.0, q_eval, q_closed, q_err, QUADRATIC_TOL, q_err < QUADRATIC_TOL))
    with open(out / "virial.csv", "w") as fh:
        for line in preamble(cfg):
            fh.write(f"# {line}\n")
        fh.write("weight,t,lhs,rhs,rel_err,tol,pass\n")
        for w, t, a, c, e, tol, ok in rows:
            fh.write(f"{w},{t!r},{a!r},{c!r},{e!r},{tol!r},{'PASS' if ok else 'FAIL'}\n")
    say(f"{'weight':>9} {'t':>8} {'lhs':>14} {'rhs':>14} {'rel_err':>10}  result")
    for w, t, a, c, e, tol, ok in rows:
        say(f"{w:>9} {t:8.4f} {a:14.6e} {c:14.6e} {e:10.2e}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK


def _sweep_one(args):
    cfg_dict, c, b, p = args
    from .config import build_config
    raw = {k: v for k, v in cfg_dict.items() if k != "nonconforming"}
    raw["physics"] = dict(raw["physics"], b=b, p=p)
    raw["initial_data"] = dict(raw["initial_data"], family="ground_state_multiple", c=c)
    cfg = build_config(raw)
    res = run_classification(cfg)
    return cfg, res


def cmd_sweep(cfg, out: Path, say) -> int:
    sw = cfg.sweep
    jobs = [(cfg.to_dict(), float(c), float(b), float(p)) for b in sw.b for p in sw.p for c in sw.c]
    if sw.workers > 1:
        with ProcessPoolExecutor(max_workers=sw.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    root = out / "sweep"
    root.mkdir(exist_ok=True)
    lines = ["c,b,p,prediction,verdict,ratio_grad,ratio_mass_energy,t_final"]
    for (_, c, b, p), (sub, res) in zip(jobs, results):
        run_dir = root / f"c{c:g}_b{b:g}_p{p:g}"
        run_dir.mkdir(exist_ok=True)
        write_json(run_dir / "classify.json", sub, "classify", res)
        pr, vd = res["prediction"], res["verdict"]
        lines.append(f"{c!r},{b!r},{p!r},{pr['prediction']},{vd['verdict']},"
                     f"{pr['ratio_grad']!r},{pr['ratio_mass_energy']!r},{res['t_final']!r}")
        say(f"c={c:<6g} b={b:<5g} p={p:<5g} {pr['prediction']:>18} {vd['verdict']:>20}")
    with open(out / "sweep.csv", "w") as fh:
        for line in preamble(cfg):
            fh.write(f"# {line}\n")
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "check-potential": cmd_check_potential,
    "ground-state": cmd_ground_state,
    "evolve": cmd_evolve,
    "classify": cmd_classify,
    "virial-test": cmd_virial_test,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inlslab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"inlslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--quiet", action="store_true")
    return ap


def _fail(code: int, kind: str, err: Exception, key=None) -> int:
    record = {"error": kind, "message": str(err), "type": type(err).__name__, "version": __version__}
    if key is not None:
        record["key"] = key
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as err:
        return _fail(EXIT_CONFIG, "config", err, err.key)
    except OSError as err:
        return _fail(EXIT_IO, "io", err)
    out = Path(args.out if args.out is not None else cfg.out)
    say = Console(args.quiet)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.nonconforming:
            say(f"{cfg.stamp}: " + "; ".join(cfg.nonconforming))
        return COMMANDS[args.command](cfg, out, say)
    except ConfigError as err:
        return _fail(EXIT_CONFIG, "config", err, err.key)
    except (CheckpointError, OSError) as err:
        return _fail(EXIT_IO, "io", err)
    except Exception as err:  # noqa: BLE001 - every other failure is a runtime error
        return _fail(EXIT_RUNTIME, "runtime", err)


if __name__ == "__main__":
    sys.exit(main())
