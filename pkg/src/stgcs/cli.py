"""Command-line entry points: plan, validate, sweep, render, dump-scenario."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .geometry import GeometryError
from .graph import NoContainingSet
from .io import load_solution, render_svg, trajectory_from_dict, write_outputs
from .pipeline import plan
from .scenario import Scenario, ScenarioError, cluttered_scenario, dump_scenario, load_scenario
from .solver import Infeasible, NodeLimitExceeded
from .validation import validate_solution

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sample_list(text: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sample list {text!r}") from None
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError("sample counts must be non-negative integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stgcs", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    q = sub.add_parser("plan", help="generate regions, solve, validate and write outputs")
    q.add_argument("--scenario", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--samples", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--order", type=int)

    q = sub.add_parser("validate", help="re-check a solution file against a scenario")
    q.add_argument("--solution", required=True)
    q.add_argument("--scenario", required=True)
    q.add_argument("--dt", type=float, default=1e-3)
    q.add_argument("--margin", type=float, default=0.0)

    q = sub.add_parser("sweep", help="mean sets, edges, cost and time per IRIS sample count")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario")
    src.add_argument("--cluttered", action="store_true", help="fresh random obstacles per repeat seed")
    q.add_argument("--samples", type=_sample_list, required=True)
    q.add_argument("--repeats", type=int, default=1)
    q.add_argument("--first-seed", type=int, default=0)
    q.add_argument("--out", required=True)

    q = sub.add_parser("render", help="SVG top view of a solution file")
    q.add_argument("--solution", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--cross-section", type=float, dest="cross_section")

    q = sub.add_parser("dump-scenario", help="parse a scenario and write it back in canonical form")
    q.add_argument("--scenario", required=True)
    q.add_argument("--out")
    return p


def _read_scenario(path) -> Scenario:
    if not Path(path).is_file():
        raise UsageError(f"no such scenario file: {path}")
    return load_scenario(path)


def _cmd_plan(args) -> int:
    sc = _read_scenario(args.scenario)
    res = plan(sc, samples=args.samples, seed=args.seed, order=args.order)
    paths = write_outputs(res, args.out)
    sol = res.solution
    print(
        f"path {sol.path} cost {sol.cost:.6f} lower bound {sol.lower_bound:.6f} "
        f"sets {len(res.regions)} edges {res.graph.num_edges} "
        f"validation {'passed' if res.report.passed else 'FAILED'}"
    )
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    if not Path(args.solution).is_file():
        raise UsageError(f"no such solution file: {args.solution}")
    sc = _read_scenario(args.scenario)
    traj = trajectory_from_dict(load_solution(args.solution))
    rep = validate_solution(traj, sc, dt=args.dt, margin=args.margin)
    print(json.dumps(rep.to_dict(), indent=2))
    return EXIT_OK if rep.passed else EXIT_INFEASIBLE


def sweep_records(make_scenario, sample_counts, seeds) -> list[dict]:
    """One record per (sample count, seed); unsolved runs have solved=False."""
    recs = []
    for n in sample_counts:
        for seed in seeds:
            sc = make_scenario(seed)
            tic = time.perf_counter()
            rec = {"samples": n, "seed": seed, "solved": False}
            try:
                res = plan(sc, samples=n, seed=seed)
            except (Infeasible, NoContainingSet, NodeLimitExceeded, GeometryError) as exc:
                logging.getLogger(__name__).warning("samples %d seed %d: %s", n, seed, exc)
            else:
                rec.update(
                    solved=True,
                    sets=len(res.regions),
                    edges=res.graph.num_edges,
                    cost=res.solution.cost,
                    lower_bound=res.solution.lower_bound,
                    node_limit_hit=res.solution.node_limit_hit,
                    passed=res.report.passed,
                    collisions=len(res.report.collision_events),
                )
            rec["time"] = time.perf_counter() - tic
            recs.append(rec)
    return recs


def summarize(records: list[dict], common_seeds: bool = False) -> list[dict]:
    """Mean sets, edges, cost and time per sample count over solved runs.

    With ``common_seeds`` only seeds solved at every sample count are kept,
    so the cost means compare the same environments.
    """
    counts = sorted({r["samples"] for r in records})
    solved = [r for r in records if r["solved"]]
    if common_seeds:
        keep = set.intersection(*({r["seed"] for r in solved if r["samples"] == n} for n in counts))
        solved = [r for r in solved if r["seed"] in keep]
    rows = []
    for n in counts:
        sel = [r for r in solved if r["samples"] == n]
        mean = (lambda k: float(np.mean([r[k] for r in sel])) if sel else float("nan"))  # noqa: E731
        rows.append({"samples": n, "sets": mean("sets"), "edges": mean("edges"), "cost": mean("cost"), "time": mean("time")})
    return rows


def _cmd_sweep(args) -> int:
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    seeds = range(args.first_seed, args.first_seed + args.repeats)
    if args.cluttered:
        make = cluttered_scenario
    else:
        base = _read_scenario(args.scenario)
        make = lambda seed: base  # noqa: E731
    rows = summarize(sweep_records(make, args.samples, seeds))
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["samples", "sets", "edges", "cost", "time"])
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"{r['samples']:>6} sets {r['sets']:.2f} edges {r['edges']:.2f} cost {r['cost']:.4f} time {r['time']:.2f}s")
    return EXIT_OK


def _cmd_render(args) -> int:
    if not Path(args.solution).is_file():
        raise UsageError(f"no such solution file: {args.solution}")
    Path(args.out).write_text(render_svg(load_solution(args.solution), cross_section=args.cross_section))
    return EXIT_OK


def _cmd_dump(args) -> int:
    text = dump_scenario(_read_scenario(args.scenario), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "plan": _cmd_plan,
    "validate": _cmd_validate,
    "sweep": _cmd_sweep,
    "render": _cmd_render,
    "dump-scenario": _cmd_dump,
}


def run_cli(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.cmd](args)
    except (UsageError, ScenarioError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Infeasible, NoContainingSet, NodeLimitExceeded) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
