"""Plan the three scenario fixtures and write their outputs.

    python3 scripts/fixed_scenarios.py --out results/fixtures
"""
import argparse
from pathlib import Path

from stgcs.io import write_outputs
from stgcs.pipeline import plan
from stgcs.scenario import load_scenario

ROOT = Path(__file__).resolve().parents[1]
NAMES = ("static_rectangle", "spacetime_rectangle", "moving_square")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/fixtures")
    args = ap.parse_args()
    print(f"{'scenario':<22} {'cost':>9} {'bound':>9} {'sets':>5} {'edges':>6} {'iris s':>7} {'solve s':>8} valid")
    for name in NAMES:
        res = plan(load_scenario(ROOT / "scenarios" / f"{name}.json"))
        write_outputs(res, Path(args.out) / name)
        sol = res.solution
        print(
            f"{name:<22} {sol.cost:>9.6f} {sol.lower_bound:>9.6f} {len(res.regions):>5} "
            f"{res.graph.num_edges:>6} {res.iris_time:>7.2f} {res.solve_time:>8.2f} {res.report.passed}"
        )


if __name__ == "__main__":
    main()
