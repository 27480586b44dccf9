"""Speed-up vs. scene area, per group and pooled, on the two-regime dataset.

The pooled correlation is expected to be weak even though each group is
strongly correlated: quiet scenes are smaller but gain more from routing.
"""

import argparse
import tempfile
from pathlib import Path

from eohazard import bench
from eohazard.experiments import area_correlation_preset, build_dataset, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=sorted(bench.CORRELATORS), default="pearson")
    p.add_argument("--out", default="results/area")
    args = p.parse_args()

    preset = area_correlation_preset(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        manifest = build_dataset(preset.scenes, tmp)
        records = run_experiment(manifest, out_path=out / "records.jsonl", cfg=preset.cfg, cost=preset.cost)
    samples = bench.compute_speedups(*bench.split_records(records))
    stats = bench.group_stats(samples)
    corr = bench.stratified_correlation(samples, args.method)
    print(bench.text_table(stats, corr), end="")
    bench.emit_report(stats, corr, out, samples)


if __name__ == "__main__":
    main()
