"""Command-line interface.

Exit codes: 0 success, 1 rejection or shortfall (inconclusive), 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import gcsc, pareto, report, sim
from .errors import (
    AllShortfall,
    CoopGameError,
    NoIndividuallyRationalPoint,
    NotHurwitz,
    NotPSD,
    NotStructured,
    RankDeficient,
    Rejection,
    Shortfall,
    ValidationError,
)
from .model import Mode, game_from_dict, gain_from_dict, problem_from_dict

EXIT_OK, EXIT_REJECT, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")


def _floats(text: str, flag: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise UsageError(flag, f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(flag, "empty list")
    return np.array(vals)


def _vector(text: str, flag: str) -> np.ndarray:
    """Inline ``a,b,c`` or a path to a one-row CSV file."""
    p = Path(text)
    if p.is_file():
        return _floats(p.read_text().replace("\n", ","), flag)
    return _floats(text, flag)


def _emit(data, out) -> None:
    if out:
        report.dump_json(data, out)
    print(json.dumps(data, indent=2, default=report._jsonable))


def _load_problem(args):
    game = game_from_dict(args.game)
    return game, problem_from_dict(args.problem, game)


def cmd_verify(args) -> int:
    game, problem = _load_problem(args)
    gain = gain_from_dict(args.gain, game)
    try:
        cert = gcsc.verify(gain, problem)
    except Rejection as exc:
        _emit({"status": exc.reason, "message": str(exc), "diagnostics": exc.diagnostics}, args.out)
        return EXIT_REJECT
    _emit({"status": "Certificate", "certificate": cert.to_dict()}, args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    game, problem = _load_problem(args)
    try:
        res = gcsc.synthesize(problem)
    except Shortfall as exc:
        _emit({"status": "Shortfall", "stage": exc.stage, "message": str(exc),
               "diagnostics": exc.diagnostics}, args.out)
        return EXIT_REJECT
    _emit({"status": "ok", **res.to_dict()}, args.out)
    return EXIT_OK


def cmd_pareto_scan(args) -> int:
    game = game_from_dict(args.game)
    if not 0 < args.grid < 1:
        raise UsageError("--grid", "step must lie in (0, 1)")
    grid = pareto.two_player_grid(args.grid) if game.N == 2 else gcsc.simplex_grid(game.N, args.grid)
    if not grid:
        raise UsageError("--grid", "step too coarse for an interior grid")
    scan = pareto.pareto_scan(game, grid, args.tol)
    if args.out:
        scan.write_csv(args.out)
        if game.N == 2:
            report.plot_scan(scan, Path(args.out).with_suffix(".png"))
    else:
        print("alpha,are_residual,sc1_residual,passes")
        for r in scan.rows:
            print(f"{list(r.alpha)},{r.are_residual:.6e},{r.sc1_residual:.6e},{str(r.passes).lower()}")
    print(json.dumps({"rows": len(scan.rows), "all_fail": scan.all_fail}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    game = game_from_dict(args.game)
    gain = gain_from_dict(args.gain, game)
    x0 = _vector(args.x0, "--x0")
    if x0.size != game.n:
        raise UsageError("--x0", f"expected {game.n} entries, got {x0.size}")
    try:
        traj = sim.simulate(game.A + game.B @ gain.F, x0, args.t_final, args.dt, gain.F)
    except ValueError as exc:
        raise UsageError("--t-final/--dt", str(exc)) from None
    traj.to_csv(args.out)
    report.plot_states(traj, Path(args.out).with_suffix(".png"), title="closed-loop states")
    print(json.dumps({"samples": int(traj.t.size), "final_norm": float(np.linalg.norm(traj.x[-1]))}))
    return EXIT_OK


def cmd_metrics(args) -> int:
    game, problem = _load_problem(args)
    gain = gain_from_dict(args.gain, game)
    if problem.x0 is None:
        raise UsageError("--problem", "metrics need x0 in the problem file")
    rep = gcsc.metrics(gain, game, problem.x0, problem.delta, problem.alpha)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_bargain(args) -> int:
    game = game_from_dict(args.game)
    if game.N != 2:
        raise UsageError("--game", "bargaining needs exactly two players")
    d = _floats(args.disagreement, "--disagreement")
    if d.size != 2 or np.any(d <= 0):
        raise UsageError("--disagreement", "expected two positive costs d1,d2")
    x0 = _vector(args.x0, "--x0")
    if x0.size != game.n:
        raise UsageError("--x0", f"expected {game.n} entries, got {x0.size}")
    res = pareto.nash_bargain_2p(game, d, x0, args.grid)
    _emit({"alpha": res.alpha, "product": res.product, "costs": res.costs}, args.out)
    if args.out:
        report.plot_frontier(res.frontier, d, res.alpha, Path(args.out).with_suffix(".png"))
    return EXIT_OK


def cmd_min_delta(args) -> int:
    game, problem = _load_problem(args)
    deltas = _floats(args.deltas, "--deltas")
    try:
        delta, res = gcsc.min_delta_search(problem, list(deltas))
    except AllShortfall as exc:
        _emit({"status": "AllShortfall", "history": exc.history}, args.out)
        return EXIT_REJECT
    _emit({"status": "ok", "delta": delta, **res.to_dict()}, args.out)
    return EXIT_OK


def cmd_case(args) -> int:
    build = {"five-agent": report.case_five_agent, "microgrid": report.case_microgrid}[args.name]
    rep = build(synthesize=not args.no_synth)
    if args.out:
        report.write_report(rep, args.out)
    print(json.dumps(rep.to_dict(), indent=2, default=report._jsonable))
    return EXIT_OK if rep.ok or (args.no_synth and rep.verify_printed.get("status") == "Certificate") else EXIT_REJECT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coopgame", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None,
                    help="reserved; all solvers are deterministic")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, problem=True, gain=False, out=True):
        p.add_argument("--game", required=True, help="game JSON file")
        if problem:
            p.add_argument("--problem", required=True, help="problem JSON file")
        if gain:
            p.add_argument("--gain", required=True, help="gain JSON file")
        if out:
            p.add_argument("--out", help="write the JSON result here as well")

    p = sub.add_parser("verify", help="certify a structured gain")
    common(p, gain=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synth", help="two-stage structured synthesis")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pareto-scan", help="weighted ARE + SC1 residual over a weight grid")
    common(p, problem=False, out=False)
    p.add_argument("--grid", type=float, required=True, help="grid step on the simplex")
    p.add_argument("--tol", type=float, default=pareto.SC1_TOL)
    p.add_argument("--out", help="CSV file (a PNG is written next to it)")
    p.set_defaults(func=cmd_pareto_scan)

    p = sub.add_parser("simulate", help="RK4 closed-loop trajectory to CSV")
    common(p, problem=False, gain=True, out=False)
    p.add_argument("--x0", required=True, help="initial state: a,b,c or a CSV file")
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="CSV file (a PNG is written next to it)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="team cost ratios of a gain")
    common(p, gain=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bargain", help="two-player Nash bargaining weight")
    common(p, problem=False)
    p.add_argument("--disagreement", required=True, help="d1,d2")
    p.add_argument("--x0", required=True, help="initial state: a,b or a CSV file")
    p.add_argument("--grid", type=float, default=1e-4)
    p.set_defaults(func=cmd_bargain)

    p = sub.add_parser("min-delta", help="smallest grid delta with a certified gain")
    common(p)
    p.add_argument("--deltas", required=True, help="ascending comma-separated list")
    p.set_defaults(func=cmd_min_delta)

    p = sub.add_parser("case", help="reproduce a worked case study")
    p.add_argument("name", choices=["five-agent", "microgrid"])
    p.add_argument("--out", help="directory for report.json, CSVs and figures")
    p.add_argument("--no-synth", action="store_true", help="skip synthesis")
    p.set_defaults(func=cmd_case)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValidationError, NotStructured, NotPSD, RankDeficient) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NotHurwitz, NoIndividuallyRationalPoint, Rejection, Shortfall) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except (CoopGameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
