"""Routed vs. baseline speed-up on a mixed synthetic dataset.

    python3 scripts/routing_efficiency.py --n 30 --out results/routing
"""

import argparse
import tempfile
from pathlib import Path

from eohazard import bench
from eohazard.experiments import build_dataset, routing_efficiency_preset, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transport", choices=["inprocess", "http"], default="inprocess")
    p.add_argument("--out", default="results/routing")
    args = p.parse_args()

    preset = routing_efficiency_preset(args.n, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        manifest = build_dataset(preset.scenes, tmp)
        records = run_experiment(manifest, out_path=out / "records.jsonl", cfg=preset.cfg, cost=preset.cost,
                                 transport=args.transport)
    samples = bench.compute_speedups(*bench.split_records(records))
    stats = bench.group_stats(samples)
    corr = bench.stratified_correlation(samples)
    print(bench.text_table(stats, corr), end="")
    for kind, path in bench.emit_report(stats, corr, out, samples).items():
        print(f"{kind}: {path}")


if __name__ == "__main__":
    main()
