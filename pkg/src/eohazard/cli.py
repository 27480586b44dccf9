"""Command-line entry point.

Exit codes: 0 success, 1 at least one workflow stage failed, 2 bad usage or
unreadable input, 3 statistics could not be computed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
from pathlib import Path

from . import bench
from .experiments import (
    CostModel,
    area_correlation_preset,
    build_dataset,
    deployment,
    make_backends,
    mixed_scenes,
)
from .orchestrator import Mode, Orchestrator, WorkflowConfig, read_records, run_dataset
from .scene_store import SceneError, load_manifest
from .spectral import ThresholdConfig
from .transport import (
    DATASET_ROOT_ENV,
    HttpTransport,
    NodeRole,
    SceneResolver,
    SimNet,
    SimNetConfig,
    build_nodes,
    serve_node,
)

EXIT_OK, EXIT_STAGE_FAILURE, EXIT_USAGE, EXIT_STATS = 0, 1, 2, 3

log = logging.getLogger("eohazard")


def _dataset_root(args) -> Path:
    root = args.dataset_root or os.environ.get(DATASET_ROOT_ENV)
    if root is None:
        if args.manifest:
            return Path(args.manifest).resolve().parent
        raise SystemExit(f"no dataset root: pass --dataset-root or set {DATASET_ROOT_ENV}")
    return Path(root)


def _manifest(args):
    path = Path(args.manifest) if args.manifest else _dataset_root(args)
    return load_manifest(path)


def _modes(text: str) -> list[Mode]:
    try:
        return [Mode(m.strip()) for m in text.split(",") if m.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _workflow(args) -> WorkflowConfig | None:
    return WorkflowConfig.load(args.config) if args.config else None


def cmd_run(args) -> int:
    manifest = _manifest(args)
    wf = _workflow(args)
    cfg = wf.thresholds if wf else ThresholdConfig()
    if args.thresholds:
        cfg = ThresholdConfig.load(args.thresholds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records_path = out / "records.jsonl"
    if wf and all(d.endpoint for d in wf.nodes.values()):
        # externally hosted nodes
        records = run_dataset(manifest, Orchestrator(wf, HttpTransport()), args.modes, records_path)
    else:
        simnet = None
        if args.simnet:
            simnet_doc = json.loads(Path(args.simnet).read_text())
            simnet_doc.setdefault("seed", args.seed)
            simnet = SimNet(SimNetConfig.from_dict(simnet_doc))
        cost = CostModel(args.early_warning_ms, args.per_tile_ms, args.decision_ms)
        root = manifest.root if manifest.root is not None else _dataset_root(args)
        with deployment(root, manifest, cfg, cost, args.transport, simnet) as orch:
            if wf:
                orch.cfg.timeout_ms = wf.timeout_ms
                orch.cfg.parallel_specialists = wf.parallel_specialists
            records = run_dataset(manifest, orch, args.modes, records_path)
    failed = [r for r in records if not r.ok]
    print(f"{len(records)} records -> {records_path} ({len(failed)} failed)")
    for r in failed:
        print(f"  {r.scene_id} [{r.mode.value}] {r.error['stage']}: {r.error['code']}", file=sys.stderr)
    return EXIT_STAGE_FAILURE if failed else EXIT_OK


def _stats(args):
    records = read_records(args.records)
    samples = bench.compute_speedups(*bench.split_records(records))
    return samples, bench.group_stats(samples), bench.stratified_correlation(samples, args.method)


def cmd_stats(args) -> int:
    try:
        _, stats, corr = _stats(args)
    except bench.BenchError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_STATS
    print(bench.text_table(stats, corr), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        samples, stats, corr = _stats(args)
    except bench.BenchError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_STATS
    paths = bench.emit_report(stats, corr, args.out, samples)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    root = _dataset_root(args)
    manifest = _manifest(args) if (args.manifest or (root / "manifest.json").exists()) else None
    cfg = ThresholdConfig.load(args.thresholds) if args.thresholds else ThresholdConfig()
    backends, ew, dec = make_backends(CostModel(), cfg)
    node = build_nodes(SceneResolver(root, manifest), cfg, backends, ew, dec)[NodeRole(args.role)]
    running = serve_node(node.descriptor, node, args.host, args.port)
    print(f"{args.role} node listening on {running.url}", flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    finally:
        running.close()
    return EXIT_OK


def cmd_make_dataset(args) -> int:
    if args.kind == "mixed":
        scenes = mixed_scenes(args.n, args.seed)
    else:
        scenes = area_correlation_preset(args.seed).scenes
    manifest = build_dataset(scenes, args.out)
    print(f"{len(manifest)} scenes -> {Path(args.out) / 'manifest.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eohazard", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def dataset_args(sp):
        sp.add_argument("--manifest", help="manifest.json (default: <dataset root>/manifest.json)")
        sp.add_argument("--dataset-root", help=f"scene directory root (env {DATASET_ROOT_ENV})")

    run = sub.add_parser("run", help="run the dataset under each workflow mode")
    dataset_args(run)
    run.add_argument("--config", help="WorkflowConfig JSON")
    run.add_argument("--thresholds", help="ThresholdConfig JSON (overrides the config's thresholds)")
    run.add_argument("--modes", type=_modes, default=[Mode.baseline, Mode.routed])
    run.add_argument("--out", required=True, help="output directory for records.jsonl")
    run.add_argument("--transport", choices=["inprocess", "http"], default="inprocess")
    run.add_argument("--simnet", help="SimNetConfig JSON (in-process transport only)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--early-warning-ms", type=float, default=0.0, help="injected early-warning cost")
    run.add_argument("--per-tile-ms", type=float, default=0.0, help="injected segmentation cost per tile")
    run.add_argument("--decision-ms", type=float, default=0.0, help="injected decision cost")
    run.set_defaults(fn=cmd_run)

    for name, fn, helptext in (("stats", cmd_stats, "print the speed-up table"),
                               ("report", cmd_report, "write JSON, text and CSV reports")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--records", required=True, help="records.jsonl from `run`")
        sp.add_argument("--method", choices=sorted(bench.CORRELATORS), default="pearson")
        if name == "report":
            sp.add_argument("--out", required=True)
        sp.set_defaults(fn=fn)

    serve = sub.add_parser("serve", help="run one agent node over HTTP")
    dataset_args(serve)
    serve.add_argument("--role", choices=[r.value for r in NodeRole], required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--thresholds", help="ThresholdConfig JSON")
    serve.set_defaults(fn=cmd_serve)

    mk = sub.add_parser("make-dataset", help="write a synthetic dataset")
    mk.add_argument("--out", required=True)
    mk.add_argument("--kind", choices=["mixed", "two-regime"], default="mixed")
    mk.add_argument("-n", type=int, default=27)
    mk.add_argument("--seed", type=int, default=0)
    mk.set_defaults(fn=cmd_make_dataset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (SceneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
