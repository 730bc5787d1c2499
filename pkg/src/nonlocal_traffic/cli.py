"""Command line entry point: ``nonlocal-traffic run --config PATH`` and ``nonlocal-traffic list``.

Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 on errors
(bad configuration, numerical failure).  Artifacts are staged in a temporary
directory and only moved into place once the experiment has finished, so a
failed invocation leaves nothing behind.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile

import numpy as np

from . import __version__
from .diagnostics import write_csv
from .errors import ConfigError, NonlocalTrafficError
from .experiments import CATALOG, KINDS, config_label, make_tasks, reduce, run_tasks, validate_config

log = logging.getLogger("nonlocal_traffic")

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def _dump(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def write_artifacts(directory: str, cfg: dict, result) -> None:
    series_dir = os.path.join(directory, "series")
    snap_dir = os.path.join(directory, "snapshots")
    os.makedirs(series_dir)
    os.makedirs(snap_dir)
    for name, (header, rows) in sorted(result.tables.items()):
        write_csv(os.path.join(series_dir, f"{name}.csv"), header, rows)
    mode = cfg["snapshots"]["write"]
    runs = []
    for r in result.runs:
        traj = r["trajectory"]
        if mode != "none":
            idx = range(len(traj)) if mode == "all" else sorted({0, len(traj) - 1})
            x = traj.grid.centers
            for i in idx:
                write_csv(os.path.join(snap_dir, f"{r['run_id']}__t_{i:05d}.csv"), ["x_center", "u", "w"],
                          zip(x, traj.u[i], traj.w[i]))
        runs.append({"run_id": r["run_id"], **traj.manifest()})
    manifest = {
        "package_version": __version__,
        "experiment": cfg["experiment"],
        "label": config_label(cfg),
        "resolved_config": cfg,
        "runs": runs,
        "csv_columns": {"series/tv_*": ["t", "tv_w", "tv_u", "neg_part"],
                        "series/rate_*": ["epsilon", "l1_error"],
                        "snapshots/*": ["x_center", "u", "w"]},
    }
    _dump(os.path.join(directory, "manifest.json"), manifest)
    _dump(os.path.join(directory, "verdicts.json"), result.verdicts)


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = validate_config(raw)
        if args.label:
            cfg["label"] = args.label
        tasks = make_tasks(cfg)
    except (ConfigError, NonlocalTrafficError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    label = config_label(cfg)
    target = os.path.join(cfg["output_dir"], cfg["experiment"], label)
    log.info("running %s (%d runs) into %s", cfg["experiment"], len(tasks), target)
    try:
        results = run_tasks(tasks, args.jobs)
        result = reduce(cfg, results)
    except (NonlocalTrafficError, ValueError, FloatingPointError, AssertionError) as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_ERROR

    parent = os.path.dirname(target)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=parent)
    try:
        write_artifacts(staging, cfg, result)
        if os.path.exists(target):
            shutil.rmtree(target)
        os.replace(staging, target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if not args.quiet:
        print(f"{cfg['experiment']} [{label}]: {result.verdicts['verdict']}  ->  {target}")
    return EXIT_OK if result.passed else EXIT_VERDICT


def list_experiments() -> list:
    return [{"kind": k, **CATALOG[k]} for k in KINDS]


def cmd_list(args) -> int:
    cat = list_experiments()
    if args.json:
        print(json.dumps(cat, indent=2))
        return EXIT_OK
    for entry in cat:
        print(entry["kind"])
        print(f"  {entry['description']}")
        print(f"  anchor:   {entry['anchor']}")
        print(f"  required: {', '.join(entry['required'])}")
        defaults = ", ".join(f"{k}={v}" for k, v in entry["defaults"].items())
        print(f"  defaults: {defaults}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal-traffic",
                                description="Experiments on nonlocal traffic models and their local limit.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--label", default=None, metavar="NAME", help="output subdirectory name")
    r.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel workers for sweeps")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list experiment kinds")
    ls.add_argument("--json", action="store_true", help="machine-readable catalog")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
