"""Command-line front end: ``synth``, ``validate``, ``bench`` and ``dump``.

Exit codes (stable, scripts rely on them):

    0  success (converged and robustness >= 0; validate: SAT)
    1  finished but the trajectory does not satisfy the formula
    2  parse error or malformed input file
    3  horizon or length error
    4  subproblem failure
    5  no convergence within the iteration budget
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .ccp import (CONVERGED, MAX_ITER_EXCEEDED, MODES, SUBPROBLEM_FAILED, CcpConfig,
                  CcpError, solve)
from .dc import DecompositionError, structural_audit
from .parser import ParseError
from .pipeline import prepare
from .qp import BACKENDS, make_backend
from .robustness import UNTIL_MODES, HorizonError, Trajectory, eval_robustness_orig
from .scenarios import ScenarioError, build_scenario_spec, resolve
from .smoothers import LseMin, Mellowmin

EXIT_OK, EXIT_UNSAT, EXIT_PARSE, EXIT_HORIZON, EXIT_SUBPROBLEM, EXIT_NOCONV = range(6)
REPORT_SCHEMA = "stlccp.report/1"
SMOOTHERS = ("lse", "mellowmin", "warmstart")
BENCH_COLUMNS = ("scenario", "horizon", "mode", "smoother", "runs", "successes",
                 "success_rate", "median_robustness", "median_wall_ms",
                 "median_iterations", "failures")
RUN_COLUMNS = ("scenario", "horizon", "mode", "smoother", "seed", "status",
               "robustness_orig", "iterations", "wall_ms", "history_path", "error")

log = logging.getLogger("stlccp")


def _setup_logging():
    level = os.environ.get("STLCCP_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


# trajectory CSV ------------------------------------------------------------

def csv_header(n: int, m: int) -> list[str]:
    if (n, m) == (4, 2):
        return ["t", "px", "py", "vx", "vy", "ux", "uy"]
    return ["t"] + [f"x{i}" for i in range(n)] + [f"u{j}" for j in range(m)]


def write_trajectory_csv(traj: Trajectory, path) -> None:
    x, u = traj.states, traj.inputs
    n, m = x.shape[1], u.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n, m))
        for t in range(x.shape[0]):
            row = [str(t)] + ["%.17g" % v for v in x[t]]
            row += ["%.17g" % v for v in u[t]] if t < u.shape[0] else [""] * m
            w.writerow(row)


def read_trajectory_csv(path, n: int, m: int) -> Trajectory:
    """Parse a trajectory CSV; raises ``ValueError`` on malformed content."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty trajectory file")
    header = [h.strip() for h in rows[0]]
    if header != csv_header(n, m):
        raise ValueError(f"unexpected header {header}, want {csv_header(n, m)}")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise ValueError("trajectory has no rows")
    states, inputs = [], []
    for k, r in enumerate(body):
        if len(r) != 1 + n + m:
            raise ValueError(f"row {k + 1}: expected {1 + n + m} fields, got {len(r)}")
        if int(r[0]) != k:
            raise ValueError(f"row {k + 1}: time index {r[0]} out of sequence")
        states.append([float(v) for v in r[1:1 + n]])
        if k < len(body) - 1:
            inputs.append([float(v) for v in r[1 + n:]])
    x = np.array(states)
    u = np.array(inputs).reshape(len(body) - 1, m)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ValueError("non-finite entries in trajectory")
    return Trajectory(x, u)


# configuration -------------------------------------------------------------

def make_config(args, seed: int | None = None, smoother: str | None = None,
                mode: str | None = None) -> CcpConfig:
    smoother = smoother or args.smoother
    kind = LseMin(args.k_lse) if smoother == "lse" else Mellowmin(args.k_mellow)
    return CcpConfig(mode=mode or args.mode, decay_r=args.decay_r, smoother=kind,
                     seed=args.seed if seed is None else seed, sigma=args.sigma,
                     max_iter=args.max_iter, warm_start=smoother == "warmstart",
                     k_lse=args.k_lse, k_mellow=args.k_mellow)


def exit_code(status: str, robustness) -> int:
    if status == SUBPROBLEM_FAILED:
        return EXIT_SUBPROBLEM
    if status == MAX_ITER_EXCEEDED:
        return EXIT_NOCONV
    return EXIT_OK if robustness is not None and robustness >= 0.0 else EXIT_UNSAT


def run_one(job: dict) -> dict:
    """One synthesis run; never raises, errors go into the returned report."""
    report = {k: job.get(k) for k in ("scenario", "horizon", "mode", "smoother", "seed")}
    report.update(status=None, robustness_orig=None, iterations=0, wall_ms=0.0,
                  history_path=None, error="", exit_code=None)
    t0 = time.perf_counter()
    try:
        s = resolve(job["scenario_spec"])
        if job.get("horizon") is not None and job["horizon"] != s.T:
            s = s.with_horizon(job["horizon"])
        report["scenario"], report["horizon"] = s.name, s.T
        cfg = job["config"]
        prep = prepare(s, job.get("until", "standard"))
        res = solve(prep.program, cfg, make_backend(job.get("backend", "ipm")))
    except (ParseError, ScenarioError, json.JSONDecodeError, OSError) as exc:
        report.update(status="InputError", error=str(exc), exit_code=EXIT_PARSE)
    except (HorizonError, DecompositionError) as exc:
        report.update(status="HorizonError", error=str(exc), exit_code=EXIT_HORIZON)
    except CcpError as exc:
        tag = f"[{exc.stage}] " if exc.stage else ""
        report.update(status=SUBPROBLEM_FAILED, error=tag + str(exc),
                      exit_code=EXIT_SUBPROBLEM)
    else:
        report.update(status=res.status, robustness_orig=res.robustness_orig,
                      iterations=res.iterations, error=res.message,
                      exit_code=exit_code(res.status, res.robustness_orig),
                      certified=res.certified, sxi=res.sxi, cost=res.cost)
        if res.stage1 is not None:
            report["stage1"] = {"status": res.stage1.status,
                                "robustness_orig": res.stage1.robustness_orig,
                                "iterations": res.stage1.iterations}
            report["iterations"] = res.iterations + res.stage1.iterations
        out = job.get("out_dir")
        if out is not None:
            out = Path(out)
            out.mkdir(parents=True, exist_ok=True)
            stem = job.get("stem") or f"{s.name}_T{s.T}_{cfg.mode}_{job['smoother']}_s{cfg.seed}"
            history = "".join(
                ([] if res.stage1 is None else
                 [json.dumps({"stage": "lse", **r.to_json()}) + "\n" for r in res.stage1.history])
                + [json.dumps({"stage": res.smoother, **r.to_json()}) + "\n" for r in res.history])
            hp = out / f"{stem}.history.jsonl"
            hp.write_text(history)
            report["history_path"] = str(hp)
            if job.get("write_trajectory", True):
                tp = out / f"{stem}.csv"
                write_trajectory_csv(res.trajectory, tp)
                report["trajectory_path"] = str(tp)
            if job.get("plot"):
                from .plotting import plot_trajectory
                pp = out / f"{stem}.png"
                rho = res.robustness_orig
                title = f"{s.name}  rho={rho:.4g}" if rho is not None else s.name
                plot_trajectory(s, res.trajectory.states, pp, title)
                report["plot_path"] = str(pp)
    report["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return report


# subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = make_config(args)
    job = {"scenario_spec": args.scenario, "horizon": args.horizon, "mode": args.mode,
           "smoother": args.smoother, "seed": args.seed, "config": cfg,
           "until": args.until, "backend": args.qp_backend, "out_dir": args.out_dir,
           "plot": args.plot}
    report = run_one(job)
    code = report.pop("exit_code")
    report = {"schema": REPORT_SCHEMA, **report, "exit_code": code}
    if code in (EXIT_PARSE, EXIT_HORIZON):
        print(f"error: {report['error']}", file=sys.stderr)
        return code
    out = Path(args.out_dir)
    stem = Path(report.get("trajectory_path") or report.get("history_path") or "report").name
    stem = stem.split(".")[0]
    rp = out / f"{stem}.report.json"
    out.mkdir(parents=True, exist_ok=True)
    rp.write_text(json.dumps(report, indent=2) + "\n")
    rho = report["robustness_orig"]
    print(f"status={report['status']} robustness={rho if rho is None else f'{rho:.6g}'} "
          f"iterations={report['iterations']} wall_ms={report['wall_ms']:.0f}")
    print(f"report: {rp}")
    if report["error"]:
        print(f"message: {report['error']}", file=sys.stderr)
    return code


def cmd_validate(args) -> int:
    try:
        s = resolve(args.scenario)
        if args.horizon is not None:
            s = s.with_horizon(args.horizon)
        f = build_scenario_spec(s)
    except (ParseError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except HorizonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    try:
        traj = read_trajectory_csv(args.trajectory, s.system.n, s.system.m)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: malformed trajectory: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if traj.horizon != s.T:
        print(f"error: trajectory has T={traj.horizon}, scenario has T={s.T}", file=sys.stderr)
        return EXIT_HORIZON
    rho = eval_robustness_orig(f, traj, 0, until=args.until) + 0.0   # no "-0"
    verdict = "SAT" if rho >= 0.0 else "UNSAT"
    print(f"robustness={rho:.17g}")
    print(f"verdict={verdict}")
    return EXIT_OK if rho >= 0.0 else EXIT_UNSAT


def _median(v):
    return statistics.median(v) if v else ""


def aggregate(rows: list[dict]) -> list[dict]:
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        cells.setdefault((r["scenario"], r["horizon"], r["mode"], r["smoother"]), []).append(r)
    out = []
    for key, rs in cells.items():
        ok = [r for r in rs if r["status"] == CONVERGED and r["robustness_orig"] is not None
              and r["robustness_orig"] >= 0.0]
        rob = [r["robustness_orig"] for r in rs if r["robustness_orig"] is not None]
        out.append(dict(zip(BENCH_COLUMNS[:4], key), runs=len(rs), successes=len(ok),
                        success_rate=len(ok) / len(rs), median_robustness=_median(rob),
                        median_wall_ms=_median([r["wall_ms"] for r in rs]),
                        median_iterations=_median([r["iterations"] for r in rs]),
                        failures=sum(r["status"] != CONVERGED for r in rs)))
    return out


def _write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if r.get(k) is None else r[k] for k in columns})


def cmd_bench(args) -> int:
    horizons = args.horizon or [None]
    seeds = args.seed or list(range(args.seeds))
    jobs = []
    out = Path(args.out_dir)
    for spec, T, mode, sm, seed in itertools.product(
            args.scenario, horizons, args.mode or ["twp"], args.smoother or ["warmstart"], seeds):
        ns = argparse.Namespace(**{**vars(args), "seed": seed})
        jobs.append({"scenario_spec": spec, "horizon": T, "mode": mode, "smoother": sm,
                     "seed": seed, "config": make_config(ns, seed, sm, mode),
                     "until": args.until, "backend": args.qp_backend,
                     "out_dir": str(out / "runs"), "write_trajectory": True,
                     "stem": None})
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(run_one, jobs))
    else:
        rows = [run_one(j) for j in jobs]
    for j, r in zip(jobs, rows):
        if r["scenario"] is None:
            r["scenario"] = j["scenario_spec"]
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "runs.csv", RUN_COLUMNS, rows)
    agg = aggregate(rows)
    _write_rows(out / "bench.csv", BENCH_COLUMNS, agg)
    if args.plot:
        from .plotting import plot_bench
        plot_bench(rows, out / "bench.png")
    w = csv.DictWriter(sys.stdout, fieldnames=BENCH_COLUMNS)
    w.writeheader()
    w.writerows(agg)
    return EXIT_OK


def cmd_dump(args) -> int:
    try:
        s = resolve(args.scenario)
        if args.horizon is not None:
            s = s.with_horizon(args.horizon)
        prep = prepare(s, args.until)
    except (ParseError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (HorizonError, DecompositionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HORIZON
    audit = structural_audit(prep.program)
    doc = prep.program.to_json()
    doc["audit"] = {"counts": audit.counts, "n_concave": audit.n_concave,
                    "n_disj": audit.n_disj, "ok": audit.ok,
                    "concave_share": audit.concave_share}
    text = json.dumps(doc) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"concave={audit.n_concave} disjunctive_nodes={audit.n_disj} "
          f"share={audit.concave_share:.4f} ok={audit.ok}", file=sys.stderr)
    return EXIT_OK


# argument parser -----------------------------------------------------------

def _solver_flags(p, multi: bool):
    if multi:
        p.add_argument("--scenario", action="append", required=True,
                       help="scenario file or bundled name (repeatable)")
        p.add_argument("-T", "--horizon", type=int, action="append")
        p.add_argument("--mode", action="append", choices=MODES)
        p.add_argument("--smoother", action="append", choices=SMOOTHERS)
        p.add_argument("--seed", type=int, action="append")
        p.add_argument("--seeds", type=int, default=5, help="seeds 0..N-1 if no --seed")
        p.add_argument("--jobs", type=int, default=1)
    else:
        p.add_argument("--scenario", required=True, help="scenario file or bundled name")
        p.add_argument("-T", "--horizon", type=int)
        p.add_argument("--mode", choices=MODES, default="twp")
        p.add_argument("--smoother", choices=SMOOTHERS, default="warmstart")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry with bench")
    p.add_argument("--decay-r", type=float, default=0.2)
    p.add_argument("--k-lse", type=float, default=10.0)
    p.add_argument("--k-mellow", type=float, default=1000.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--until", choices=UNTIL_MODES, default="standard")
    p.add_argument("--qp-backend", choices=sorted(BACKENDS), default="ipm")
    p.add_argument("--plot", action="store_true", help="also write PNG figures")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlccp", description=__doc__.split("\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog=__doc__.split("\n", 2)[2])
    sub = ap.add_subparsers(dest="command", required=True)
    _solver_flags(sub.add_parser("synth", help="synthesize one trajectory"), multi=False)
    v = sub.add_parser("validate", help="exact robustness of a trajectory CSV")
    v.add_argument("trajectory")
    v.add_argument("--scenario", required=True)
    v.add_argument("-T", "--horizon", type=int)
    v.add_argument("--until", choices=UNTIL_MODES, default="standard")
    _solver_flags(sub.add_parser("bench", help="run a battery of synth runs"), multi=True)
    d = sub.add_parser("dump", help="write the DC program as JSON")
    d.add_argument("--scenario", required=True)
    d.add_argument("-T", "--horizon", type=int)
    d.add_argument("--until", choices=UNTIL_MODES, default="standard")
    d.add_argument("-o", "--output")
    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:          # argparse usage errors count as parse errors
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return {"synth": cmd_synth, "validate": cmd_validate, "bench": cmd_bench,
                "dump": cmd_dump}[args.command](args)
    except ValueError as exc:          # e.g. invalid solver parameters
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
