"""Cluttered-environment sweep: mean sets, edges, cost and time per IRIS
sample count over random constant-velocity obstacle fields.

    python3 scripts/cluttered_sweep.py --samples 80,250,1000 --seeds 20
"""
import argparse
import json
import logging
from pathlib import Path

from stgcs.cli import summarize, sweep_records
from stgcs.scenario import cluttered_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", default="80,250,1000")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--out", default="results/cluttered_sweep.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    counts = [int(s) for s in args.samples.split(",")]
    recs = []
    for seed in range(args.seeds):
        for r in sweep_records(cluttered_scenario, counts, [seed]):
            recs.append(r)
            print(json.dumps(r), flush=True)
    rows = summarize(recs)
    common = summarize(recs, common_seeds=True)
    print(f"{'samples':>8} {'sets':>7} {'edges':>8} {'cost':>7} {'time':>7}")
    for r in rows:
        print(f"{r['samples']:>8} {r['sets']:>7.2f} {r['edges']:>8.2f} {r['cost']:>7.3f} {r['time']:>7.2f}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps({"records": recs, "summary": rows, "summary_common_seeds": common}, indent=2) + "\n")


if __name__ == "__main__":
    main()
