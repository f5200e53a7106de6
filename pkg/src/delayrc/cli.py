"""Command-line front end: ``delayrc {run,sweep,validate,mc} <config>``.

Exit codes: 0 success, 1 at least one grid point failed, 2 invalid config.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import (OUT_ENV, ExperimentConfig, Point, build_dataset, build_reservoir, data_seed,
                     regime_note)
from .errors import DelayRCError
from .experiment import METRIC_NAMES, evaluate_task
from .reservoir import Mode
from .training import ProbeSettings, memory_capacity

EXIT_OK, EXIT_FAILED_ROWS, EXIT_CONFIG = 0, 1, 2


@dataclass
class ResultRecord:
    grid_index: int
    fingerprint: str
    seed: int
    swept: Dict[str, object]
    status: str = "ok"
    metrics: Dict[str, float] = field(default_factory=dict)
    message: str = ""
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def evaluate_point(point: Point, base_dir: Optional[Path] = None) -> ResultRecord:
    """Generate data, run the reservoir, train and score one grid point.

    Library errors (divergence, singular readout, ...) mark the record as
    failed instead of propagating.
    """
    record = ResultRecord(point.index, point.fingerprint, point.seed, dict(point.swept))
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            config = build_reservoir(point.settings)
            training = point.settings["training"]
            if point.settings["task"]["name"] == "mc":
                t = point.settings["task"]
                probe = ProbeSettings(t["n_train"], t["n_test"], t["max_lag"], data_seed(point.settings),
                                      training["lambda"], training["bias"])
                record.metrics = memory_capacity(config, probe).as_dict()
            else:
                dataset = build_dataset(point.settings, base_dir)
                record.metrics = evaluate_task(config, dataset, lam=training["lambda"],
                                               bias=training["bias"], folds=training["folds"],
                                               train_fraction=training["train_fraction"])
    except DelayRCError as exc:
        record.status = "failed"
        record.message = f"{type(exc).__name__}: {exc}"
    record.wall_time = time.perf_counter() - start
    return record


def _evaluate_indexed(args):
    return evaluate_point(*args)


def execute(config: ExperimentConfig, threads: int = 1) -> List[ResultRecord]:
    """Evaluate every grid point; records come back sorted by grid index."""
    points = config.points()
    base = config.source.parent if config.source is not None else None
    jobs = [(p, base) for p in points]
    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(points))) as pool:
            records = list(pool.map(_evaluate_indexed, jobs))
    else:
        records = [_evaluate_indexed(j) for j in jobs]
    return sorted(records, key=lambda r: r.grid_index)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(records: Sequence[ResultRecord], swept_names: Sequence[str], path: Path) -> None:
    """Single writer: one row per grid point, in grid-index order."""
    header = ["grid_index", "fingerprint", "seed", *swept_names, "status", *METRIC_NAMES, "message"]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in sorted(records, key=lambda r: r.grid_index):
            row = [str(r.grid_index), r.fingerprint, str(r.seed)]
            row += [_fmt(r.swept[name]) for name in swept_names]
            row += [r.status] + [_fmt(r.metrics.get(m)) for m in METRIC_NAMES] + [r.message]
            writer.writerow(row)


def write_log(records: Sequence[ResultRecord], path: Path) -> None:
    with open(path, "w") as fh:
        for r in sorted(records, key=lambda r: r.grid_index):
            fh.write(json.dumps({"grid_index": r.grid_index, "fingerprint": r.fingerprint, "seed": r.seed,
                                 "swept": r.swept, "status": r.status, "metrics": r.metrics,
                                 "message": r.message, "wall_time_s": r.wall_time}) + "\n")


def output_dir(args, config: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if config.output["dir"]:
        return Path(config.output["dir"])
    return Path("results")


def validate_report(config: ExperimentConfig) -> List[str]:
    """Dry-run every grid point's reservoir construction; return human-readable notes.

    Raises:
        DelayRCError: the first invalid grid point.
    """
    notes = [f"{config.n_points} grid point(s); task {config.task['name']}"]
    seen = set()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for point in config.points():
            try:
                rc = build_reservoir(point.settings)
            except DelayRCError as exc:
                where = f" at grid point {point.index} {point.swept}" if point.swept else ""
                raise type(exc)(f"{exc}{where}") from None
            r = point.settings["reservoir"]
            lines = [regime_note(r["response_time_ns"], r["node_duration_ns"])]
            if rc.mode is Mode.DISCRETE_MAP and r["node_duration_ns"] < 50 * r["response_time_ns"]:
                lines.append("map engine ignores inertia coupling outside the instantaneous regime")
            if rc.mode is Mode.ELM and r["beta"] != 0:
                lines.append("ELM engine: feedback gain beta is ignored (open loop)")
            for line in lines:
                if line not in seen:
                    seen.add(line)
                    notes.append(line)
        if config.task["name"] == "santa_fe":
            build_dataset(config.points()[0].settings, config.source.parent if config.source else None)
    for w in caught:
        text = f"warning: {w.message}"
        if text not in seen:
            seen.add(text)
            notes.append(text)
    return notes


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delayrc", description="Delay-based reservoir computing experiments.")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("run", "run an experiment (all grid points)"),
                        ("sweep", "alias of run for configs with a sweep grid"),
                        ("validate", "check a config without running it"),
                        ("mc", "memory-capacity report for the configured reservoir")):
        s = sub.add_parser(verb, help=help_)
        s.add_argument("config", help="YAML experiment config")
        s.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, then output.dir, then ./results)")
        s.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
        s.add_argument("--engine", choices=[m.value for m in Mode], help="reservoir engine override")
        s.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes for sweeps (default: available cores)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise DelayRCError("--seed must be an unsigned 64-bit integer")
        config = ExperimentConfig.load(args.config)
        task = {"name": "mc"} if args.verb == "mc" else None
        config = config.with_overrides(engine=args.engine, master_seed=args.seed, task=task)
        if args.verb == "validate":
            for line in validate_report(config):
                print(line)
            print("config OK")
            return EXIT_OK
        validate_report(config)
    except DelayRCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    records = execute(config, max(1, args.threads))
    out = output_dir(args, config)
    stem = Path(args.config).stem + ("_mc" if args.verb == "mc" else "")
    names = [name for name, _, _ in config.sweep]
    write_csv(records, names, out / f"{stem}.csv")
    if config.output["log"]:
        write_log(records, out / f"{stem}.jsonl")
    for r in records:
        label = " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.swept.items())
        if r.ok:
            metrics = " ".join(f"{k}={v:.6g}" for k, v in r.metrics.items())
            print(f"[{r.grid_index}] {label} {metrics}".replace("  ", " "))
        else:
            print(f"[{r.grid_index}] {label} FAILED {r.message}".replace("  ", " "), file=sys.stderr)
    print(f"wrote {out / (stem + '.csv')}")
    return EXIT_OK if all(r.ok for r in records) else EXIT_FAILED_ROWS


if __name__ == "__main__":
    sys.exit(main())
