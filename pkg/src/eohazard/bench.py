"""Efficiency statistics over run records: speed-ups, grouping, correlation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .agents import EventType
from .orchestrator import Mode, RunRecord

# Reference testbench figures (27 samples, onboard ARM CPU). Kept for side-by-side
# display only; desk runs are not expected to match them.
REFERENCE_TARGETS = {
    "no_event": {"speedup_mean": 4.78, "speedup_std": 2.54, "reduction_mean": 73.2, "reduction_std": 14.1},
    "event": {"speedup_mean": 1.3, "speedup_std": 0.45, "reduction_mean": 13.5, "reduction_std": 30.8},
    "correlation": {"global": 0.08, "no_event": 0.99, "event": 0.92},
}
GROUPS = ("no_event", "event")


class BenchError(ValueError):
    code = "bench-error"


class SceneSetMismatch(BenchError):
    code = "scene-set-mismatch"


class ZeroRoutedTime(BenchError):
    code = "zero-routed-time"


@dataclass(frozen=True)
class SpeedupSample:
    scene_id: str
    group: str
    area_km2: Optional[float]
    baseline_ms: float
    routed_ms: float
    speedup: float
    reduction_pct: float


@dataclass(frozen=True)
class SpeedupStats:
    group: str
    n: int
    speedup_mean: float
    speedup_std: float
    reduction_mean: float
    reduction_std: float
    single_sample: bool = False


@dataclass
class CorrelationReport:
    method: str
    global_rho: Optional[float]
    no_event_rho: Optional[float]
    event_rho: Optional[float]
    pairs: list[tuple[float, float, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def group_of(label: Optional[EventType]) -> str:
    if label is None:
        raise BenchError("record has no ground-truth label")
    return "no_event" if EventType(label) is EventType.none else "event"


def compute_speedups(baseline: Sequence[RunRecord], routed: Sequence[RunRecord]) -> list[SpeedupSample]:
    """Per-scene baseline/routed time ratios, ordered by scene_id."""
    base = {r.scene_id: r for r in baseline if r.ok}
    rout = {r.scene_id: r for r in routed if r.ok}
    if set(base) != set(rout):
        only_b, only_r = sorted(set(base) - set(rout)), sorted(set(rout) - set(base))
        raise SceneSetMismatch(f"baseline-only {only_b}, routed-only {only_r}")
    samples = []
    for sid in sorted(base):
        b, r = base[sid].total_ms, rout[sid].total_ms
        if not r > 0:
            raise ZeroRoutedTime(f"scene {sid} has routed time {r}")
        label = base[sid].label if base[sid].label is not None else rout[sid].label
        samples.append(
            SpeedupSample(
                scene_id=sid,
                group=group_of(label),
                area_km2=base[sid].scene_area_km2,
                baseline_ms=b,
                routed_ms=r,
                speedup=b / r,
                reduction_pct=100.0 * (1.0 - r / b),
            )
        )
    return samples


def split_records(records: Sequence[RunRecord]) -> tuple[list[RunRecord], list[RunRecord]]:
    return [r for r in records if r.mode is Mode.baseline], [r for r in records if r.mode is Mode.routed]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


def group_stats(samples: Sequence[SpeedupSample]) -> list[SpeedupStats]:
    """Mean and sample std per group. Empty groups are omitted (see ``missing_groups``)."""
    out = []
    for group in GROUPS:
        members = [s for s in samples if s.group == group]
        if not members:
            continue
        sp_mean, sp_std = _mean_std([s.speedup for s in members])
        rd_mean, rd_std = _mean_std([s.reduction_pct for s in members])
        out.append(SpeedupStats(group, len(members), sp_mean, sp_std, rd_mean, rd_std, len(members) == 1))
    return out


def missing_groups(stats: Sequence[SpeedupStats]) -> list[str]:
    present = {s.group for s in stats}
    return [g for g in GROUPS if g not in present]


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation; None when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("x and y differ in length")
    if x.size < 2:
        return None
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def spearman(x, y) -> Optional[float]:
    return pearson(rankdata(x), rankdata(y))


CORRELATORS = {"pearson": pearson, "spearman": spearman}


def stratified_correlation(samples: Sequence[SpeedupSample], method: str = "pearson") -> CorrelationReport:
    if method not in CORRELATORS:
        raise BenchError(f"unknown correlation method {method!r}")
    corr = CORRELATORS[method]
    usable = [s for s in samples if s.area_km2 is not None]
    report = CorrelationReport(method, None, None, None, [(s.area_km2, s.speedup, s.group) for s in usable])
    if len(usable) < len(samples):
        report.notes.append(f"{len(samples) - len(usable)} samples lack a scene area and were skipped")
    strata = {"global": usable, **{g: [s for s in usable if s.group == g] for g in GROUPS}}
    for name, members in strata.items():
        if len(members) < 2:
            report.notes.append(f"{name}: insufficient samples ({len(members)}) for correlation")
            continue
        rho = corr([s.area_km2 for s in members], [s.speedup for s in members])
        if rho is None:
            report.notes.append(f"{name}: insufficient variance for correlation")
            continue
        setattr(report, "global_rho" if name == "global" else f"{name}_rho", rho)
    return report


# --- reporting ---------------------------------------------------------------


def report_dict(stats: Sequence[SpeedupStats], corr: CorrelationReport,
                samples: Sequence[SpeedupSample] = ()) -> dict:
    return {
        "groups": [asdict(s) for s in stats],
        "missing_groups": missing_groups(stats),
        "correlation": {
            "method": corr.method,
            "global_rho": corr.global_rho,
            "no_event_rho": corr.no_event_rho,
            "event_rho": corr.event_rho,
            "notes": list(corr.notes),
        },
        "samples": [asdict(s) for s in samples],
        "reference_targets": REFERENCE_TARGETS,
    }


def stats_from_report(doc: dict) -> tuple[list[SpeedupStats], CorrelationReport]:
    stats = [SpeedupStats(**g) for g in doc["groups"]]
    c = doc["correlation"]
    corr = CorrelationReport(c["method"], c["global_rho"], c["no_event_rho"], c["event_rho"], notes=list(c["notes"]))
    return stats, corr


def _rho(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:+.2f}"


def text_table(stats: Sequence[SpeedupStats], corr: Optional[CorrelationReport] = None) -> str:
    names = {"no_event": "No event", "event": "Event (wildfire or flood)"}
    rows = [("Event", "n", "Speed-up", "Reduction (%)")]
    for s in stats:
        flag = " *" if s.single_sample else ""
        rows.append((
            names[s.group],
            str(s.n),
            f"{s.speedup_mean:.2f} ± {s.speedup_std:.2f}{flag}",
            f"{s.reduction_mean:.1f} ± {s.reduction_std:.1f}",
        ))
    for g in missing_groups(stats):
        rows.append((names[g], "0", "-", "-"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if any(s.single_sample for s in stats):
        lines.append("* single sample: std reported as 0")
    if corr is not None:
        lines.append("")
        lines.append(
            f"{corr.method} rho(area, speed-up): global {_rho(corr.global_rho)}, "
            f"no event {_rho(corr.no_event_rho)}, event {_rho(corr.event_rho)}"
        )
        lines.extend(f"note: {n}" for n in corr.notes)
    return "\n".join(lines) + "\n"


def emit_report(stats: Sequence[SpeedupStats], corr: CorrelationReport, out_dir,
                samples: Sequence[SpeedupSample] = ()) -> dict[str, Path]:
    """Write report.json, report.txt and plot_data.csv into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "report.json", "text": out / "report.txt", "csv": out / "plot_data.csv"}
    paths["json"].write_text(json.dumps(report_dict(stats, corr, samples), indent=2, sort_keys=True) + "\n")
    paths["text"].write_text(text_table(stats, corr))
    with paths["csv"].open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["area_km2", "speedup", "group"])
        for area, speedup, group in corr.pairs:
            writer.writerow([repr(float(area)), repr(float(speedup)), group])
    return paths
