"""Command-line front end.

Every subcommand loads a function (``--zoo NAME`` or ``--dsl FILE``), runs one
library operation, prints a short summary and, with ``--out DIR``, writes
CSV files plus the resolved configuration to ``DIR/config.json``.

Exit codes: 0 ok / PASS, 1 FAIL, 2 usage or parse error, 3 domain or runtime error.
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import algos, dini, scan, stability, zoo
from .dsl import parse
from .errors import (CertificationRefused, ConvstabError, DomainError, EvaluationError,
                     FeasibilityError, ParseError)
from .expr import evaluate, sign_vector
from .grid import GridSpec

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULTS = {
    "zoo": None, "dsl": None, "box": None, "out": None, "seed": 0, "jobs": None,
    "grid": None, "step": None, "zeta": 0.0, "expect": None,
    "at": None, "delta": None, "center": None, "r": None, "r1": None, "deltas": "1e-1..1e-6",
    "algo": "subgradient", "x0": None, "lam": None, "eta": None, "max_iter": 400,
    "samples": 8, "radius": None, "experiment": False, "eps": None, "starts": 20,
    "seeds": 16, "start_points": None, "delta1": None, "lam1": None, "tol": None,
    "all": False, "probes": True,
}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------

def parse_point(text):
    return np.array([float(v) for v in str(text).split(",") if v.strip()])


def parse_points(text):
    return [parse_point(p) for p in str(text).split(";") if p.strip()]


def parse_box(text):
    out = []
    for part in str(text).split(","):
        lo, _, hi = part.partition(":")
        out.append((float(lo), float(hi)))
    return out


def load_function(cfg):
    if bool(cfg["zoo"]) == bool(cfg["dsl"]):
        raise UsageError("give exactly one of --zoo NAME or --dsl FILE")
    if cfg["zoo"]:
        try:
            entry = zoo.get(cfg["zoo"])
        except KeyError as e:
            raise UsageError(str(e.args[0]))
        return entry.expr, entry
    with open(cfg["dsl"]) as fh:
        src = fh.read()
    box = parse_box(cfg["box"]) if cfg["box"] else None
    return parse(src, box), None


def resolve(args):
    """Merge flags > config file > defaults into one dict."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            filecfg = json.load(fh)
        unknown = set(filecfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(filecfg)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None and v is not False:
            cfg[k] = v
    if cfg["jobs"] is None:
        cfg["jobs"] = os.cpu_count() or 1
    cfg["command"] = args.command
    return cfg


def prepare_out(cfg):
    out = cfg["out"]
    if not out:
        return None
    os.makedirs(out, exist_ok=True)
    echo = {k: v for k, v in cfg.items() if k not in ("out", "jobs")}
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return out


def outcome(passed, cfg, label=""):
    word = "PASS" if passed else "FAIL"
    print(f"result: {word}{' ' + label if label else ''}")
    if cfg["expect"] == "fail":
        return EXIT_OK if not passed else EXIT_FAIL
    return EXIT_OK if passed else EXIT_FAIL


def make_grid(expr, cfg, lower=None, upper=None):
    lower = expr.lower if lower is None else lower
    upper = expr.upper if upper is None else upper
    zeta = float(cfg["zeta"])
    if cfg["step"]:
        return GridSpec.from_step(lower, upper, float(cfg["step"]), zeta)
    steps = int(cfg["grid"]) if cfg["grid"] else (20001 if expr.n == 1 else 201 if expr.n == 2 else 41)
    return GridSpec(lower, upper, steps, zeta)


def _center_radius(cfg, entry, expr):
    c = parse_point(cfg["center"]) if cfg["center"] is not None else (
        np.asarray(entry.center) if entry else np.zeros(expr.n))
    r = float(cfg["r"]) if cfg["r"] is not None else (entry.radius if entry else None)
    return c, r


def _fmt(v):
    return ",".join(f"{float(t):.12g}" for t in np.atleast_1d(v))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_eval(cfg):
    expr, _ = load_function(cfg)
    if cfg["at"] is None:
        raise UsageError("eval needs --at POINT")
    x = parse_point(cfg["at"])
    fx = evaluate(expr, x)
    sv = sign_vector(expr, x, float(cfg["zeta"]))
    v = dini.gf(expr, x)
    delta = float(cfg["delta"]) if cfg["delta"] else 1e-6
    verdict = dini.is_delta_stationary(expr, x, delta)
    print(f"f = {fx:.15g}")
    print(f"sign_vector = ({', '.join(f'{s:+d}' if s else '0' for s in sv.s)})"
          + (f" ambiguous={[i for i, a in enumerate(sv.ambiguous) if a]}" if any(sv.ambiguous) else ""))
    print(f"G_f = {v.gf_estimate:.15g} decisive={str(v.decisive).lower()} directions={v.directions_used}")
    if v.certificate is not None:
        print(f"f'+ = {v.certificate[0]:.15g}")
        print(f"f'- = {v.certificate[1]:.15g}")
    print(f"delta_stationary(delta={delta:g}) = {verdict}")
    return EXIT_OK


def cmd_scan(cfg):
    expr, _ = load_function(cfg)
    delta = float(cfg["delta"]) if cfg["delta"] else 1e-3
    grid = make_grid(expr, cfg)
    res = scan.delta_scan(expr, grid, delta, jobs=cfg["jobs"])
    out = prepare_out(cfg)
    if out:
        res.write_csv(os.path.join(out, "scan.csv"))
    yes = res.yes_points
    print(f"grid points = {len(res.points)}, yes = {len(yes)}, unknown = {int((res.codes == 0).sum())}")
    if len(yes):
        print(f"yes range = [{_fmt(yes.min(axis=0))}] .. [{_fmt(yes.max(axis=0))}]")
    return EXIT_OK


def cmd_profile(cfg):
    expr, entry = load_function(cfg)
    c, r = _center_radius(cfg, entry, expr)
    if cfg["r1"] is not None:
        r1 = float(cfg["r1"])
    else:
        if r is None:
            raise UsageError("profile needs --r1 (or --r for a certificate)")
        r1 = stability.certify(expr, c, r).r1
    deltas = scan.parse_ladder(cfg["deltas"])
    h = float(cfg["step"]) if cfg["step"] else r1 / (2000.0 if expr.n == 1 else 100.0)
    grid = GridSpec.centered(c, r1, h, box=expr.box, zeta=float(cfg["zeta"]))
    probes = None
    if entry is not None and entry.witness and cfg["probes"]:
        probes = scan.witness_probes(entry.witness, r1, deltas)
    prof = scan.shrinkage_profile(expr, c, r1, deltas, grid, probes, jobs=cfg["jobs"])
    out = prepare_out(cfg)
    if out:
        prof.write_csv(os.path.join(out, "profile.csv"))
    for row in prof.rows:
        print(f"delta={row.delta:.0e} sup_distance={row.sup_distance:.6g} count={row.count}")
    ok = prof.shrinks()
    return outcome(ok, cfg, "shrinks" if ok else "FAIL-to-shrink")


def cmd_certify(cfg):
    expr, entry = load_function(cfg)
    c, r = _center_radius(cfg, entry, expr)
    if r is None:
        raise UsageError("certify needs --r")
    h = float(cfg["step"]) if cfg["step"] else None
    out = prepare_out(cfg)
    try:
        cert = stability.certify(expr, c, r, h=h)
        passed = True
    except CertificationRefused as e:
        cert = e.certificate
        passed = False
        print(str(e))
    rec = cert.to_record()
    if out:
        with open(os.path.join(out, "certificate.txt"), "w") as fh:
            fh.write(rec)
    sys.stdout.write(rec)
    return outcome(passed, cfg, "certificate issued" if passed else "refused")


def _run_single(cfg, expr, entry):
    if cfg["x0"] is None:
        raise UsageError("run needs --x0 (or --experiment)")
    x0 = parse_point(cfg["x0"])
    delta = float(cfg["delta"]) if cfg["delta"] else 1e-3
    lam = float(cfg["lam"]) if cfg["lam"] else 1.0
    eta = float(cfg["eta"]) if cfg["eta"] else 0.05
    p = algos.AlgoParams(delta=delta, lam=lam, eta=eta, max_iter=int(cfg["max_iter"]),
                         seed=int(cfg["seed"]), samples=int(cfg["samples"]),
                         radius=float(cfg["radius"]) if cfg["radius"] else None)
    if cfg["algo"] not in algos.ALGORITHMS:
        raise UsageError(f"unknown algorithm {cfg['algo']!r}")
    traj = algos.ALGORITHMS[cfg["algo"]](expr, x0, p)
    rep = algos.check_contract(traj, expr, delta, lam)
    out = prepare_out(cfg)
    if out:
        traj.write_csv(os.path.join(out, "trajectory.csv"))
        with open(os.path.join(out, "contract.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["property", "holds", "witness"])
            w.writerow(["ultimately_decreasing", str(rep.ultimately_decreasing).lower(), repr(rep.decrease_gap)])
            w.writerow(["result_stationary", str(rep.result_stationary).lower(), repr(rep.worst_gf)])
            w.writerow(["path_bounded", str(rep.path_bounded).lower(), repr(rep.max_segment_value)])
            w.writerow(["contract", "PASS" if rep.ok else "FAIL", ""])
    print(f"iterations = {len(traj) - 1}, reason = {traj.reason}, final = [{_fmt(traj.final)}], "
          f"f = {traj.values[-1]:.12g}")
    print(f"decreasing={rep.ultimately_decreasing} stationary={rep.result_stationary} "
          f"(worst G_f {rep.worst_gf:.6g}) path_bounded={rep.path_bounded}")
    return outcome(rep.ok, cfg, "contract")


def _run_experiment(cfg, expr, entry):
    c, r = _center_radius(cfg, entry, expr)
    cert = None
    if cfg["r1"] is None or cfg["lam1"] is None:
        if r is None:
            raise UsageError("experiment needs --r (for a certificate) or --r1 and --lam1")
        cert = stability.certify(expr, c, r)
    r1 = float(cfg["r1"]) if cfg["r1"] is not None else None
    lam1 = float(cfg["lam1"]) if cfg["lam1"] is not None else None
    eps = float(cfg["eps"]) if cfg["eps"] else None
    starts = parse_points(cfg["start_points"]) if cfg["start_points"] else None
    res = algos.stability_experiment(
        expr, c, cert, eps, starts=int(cfg["starts"]), seeds=int(cfg["seeds"]),
        delta1=float(cfg["delta1"]) if cfg["delta1"] else None, lam1=lam1, r1=r1,
        start_points=starts, max_iter=int(cfg["max_iter"]), jobs=cfg["jobs"])
    out = prepare_out(cfg)
    if out:
        res.write_csv(os.path.join(out, "experiment.csv"))
    print(f"runs = {len(res.records)}, epsilon = {res.epsilon:.6g}, delta1 = {res.delta1:.3g}, "
          f"lam1 = {res.lam1:.6g}, max tail distance = {res.max_distance:.6g}")
    for note in res.notes:
        print(f"note: {note}")
    return outcome(res.passed, cfg, "stability experiment")


def cmd_run(cfg):
    expr, entry = load_function(cfg)
    if cfg["experiment"]:
        return _run_experiment(cfg, expr, entry)
    return _run_single(cfg, expr, entry)


def cmd_census(cfg):
    expr, _ = load_function(cfg)
    delta = float(cfg["delta"]) if cfg["delta"] else 1e-6
    if not cfg["grid"] and not cfg["step"]:
        cfg = dict(cfg, step=1e-3 if expr.n == 1 else 1e-2)
    grid = make_grid(expr, cfg)
    tol = float(cfg["tol"]) if cfg["tol"] else None
    cen = scan.value_census(expr, grid, delta, tol, jobs=cfg["jobs"])
    out = prepare_out(cfg)
    if out:
        with open(os.path.join(out, "census.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "low", "high", "members"])
            for v, lo, hi, m in cen.clusters:
                w.writerow([repr(v), repr(lo), repr(hi), m])
    print(f"stationary points = {cen.points}, clusters = {cen.count}, tolerance = {cen.tolerance:.3g}")
    for v, lo, hi, m in cen.clusters:
        print(f"  value {v:.10g} ({m} points)")
    return EXIT_OK


def cmd_verify(cfg):
    if cfg["all"]:
        names = list(zoo.NAMES)
    elif cfg["zoo"]:
        names = [cfg["zoo"]]
    else:
        raise UsageError("verify needs --zoo NAME or --all")
    tol = float(cfg["tol"]) if cfg["tol"] else 1e-9
    rows, anchored_ok = [], True
    for name in names:
        try:
            results = zoo.verify_entry(zoo.get(name), tol)
        except KeyError as e:
            raise UsageError(str(e.args[0]))
        for r in results:
            f = r.fact
            rows.append([name, f.quantity, _fmt(f.at), repr(f.reference), repr(r.value),
                         repr(r.residual), f.tag, "pass" if r.passed else "fail"])
            if f.tag == "PAPER" and not r.passed:
                anchored_ok = False
        bad = sum(not r.passed for r in results)
        print(f"{name}: {len(results) - bad}/{len(results)} facts pass")
    out = prepare_out(cfg)
    if out:
        with open(os.path.join(out, "verify.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["entry", "quantity", "at", "reference", "value", "residual", "tag", "status"])
            w.writerows(rows)
    return outcome(anchored_ok, cfg, "anchored facts")


def cmd_zoo(cfg):
    if cfg.get("action") != "list":
        raise UsageError("usage: zoo list")
    for e in zoo.entries():
        dom = " x ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in e.domain)
        print(f"{e.name:12s} n={e.expr.n} analytic={str(e.analytic).lower():5s} domain={dom}  {e.description}")
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "scan": cmd_scan, "profile": cmd_profile, "certify": cmd_certify,
            "run": cmd_run, "census": cmd_census, "verify": cmd_verify, "zoo": cmd_zoo}


def build_parser():
    ap = argparse.ArgumentParser(prog="convstab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--zoo", metavar="NAME")
    src.add_argument("--dsl", metavar="FILE")
    common.add_argument("--box", help="domain for --dsl, e.g. -1:1,-2:2")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--grid", type=int, metavar="STEPS", help="grid nodes per axis")
    common.add_argument("--step", type=float, help="grid spacing (overrides --grid)")
    common.add_argument("--zeta", type=float, help="kink band for sign classification")
    common.add_argument("--config", metavar="JSON")
    common.add_argument("--expect", choices=["pass", "fail"])

    p = sub.add_parser("eval", parents=[common], help="value, sign vector and G_f at a point")
    p.add_argument("--at", required=False)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("scan", parents=[common], help="delta-stationary grid scan")
    p.add_argument("--delta", type=float)

    p = sub.add_parser("profile", parents=[common], help="shrinkage profile over a delta ladder")
    p.add_argument("--center")
    p.add_argument("--r", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--deltas")
    p.add_argument("--no-probes", dest="probes", action="store_const", const=False, default=None)

    p = sub.add_parser("certify", parents=[common], help="(r1, lambda0) certificate")
    p.add_argument("--center")
    p.add_argument("--r", type=float)

    p = sub.add_parser("run", parents=[common], help="run an algorithm or a stability experiment")
    p.add_argument("--algo", choices=sorted(algos.ALGORITHMS))
    p.add_argument("--x0")
    p.add_argument("--delta", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--experiment", action="store_true", default=None)
    p.add_argument("--center")
    p.add_argument("--r", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--starts", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--start-points", dest="start_points", help="semicolon-separated points")
    p.add_argument("--delta1", type=float)
    p.add_argument("--lam1", type=float)

    p = sub.add_parser("census", parents=[common], help="cluster f-values of stationary points")
    p.add_argument("--delta", type=float)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("verify", parents=[common], help="check catalog facts")
    p.add_argument("--all", action="store_true", default=None)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("zoo", help="catalog commands")
    p.add_argument("action", choices=["list"])
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "zoo":
            cfg["action"] = args.action
        return COMMANDS[args.command](cfg)
    except (UsageError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, EvaluationError, FeasibilityError, ConvstabError, ValueError,
            OSError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
