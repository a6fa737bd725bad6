"""Execute a scenario: expand the sweep, run points, write outputs and a manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import multiprocessing as mp
import os
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from .config import ConfigError, ScenarioConfig, sweep_points, validate
from .experiments import SUMMARY_FUNCTIONS, PointResult, run_point

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    scenario: str
    anchor: str
    config_hash: str
    versions: dict
    wall_time: float
    outputs: list[dict] = field(default_factory=list)
    failed_points: list[dict] = field(default_factory=list)
    status: str = "complete"
    deterministic: bool = True
    threads: int = 1
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def output_hashes(self) -> dict[str, str]:
        return {o["path"]: o["sha256"] for o in self.outputs}


def versions() -> dict:
    return {
        "spinctrl": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("SPINCTRL_THREADS", "1"))
    if threads < 1:
        raise ValueError("threads must be at least 1")
    return threads


# --- writing -----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_table(path: Path, header: list[str], names: list[str], rows: list[list]) -> None:
    """Atomic CSV write with ``# `` header lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(names)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    tmp.replace(path)


def write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True))
    tmp.replace(path)


def _columns_to_rows(columns: list) -> list[list]:
    cols = [np.asarray(c) for c in columns]
    return [list(r) for r in zip(*cols)]


def point_tag(point: dict) -> str:
    parts = []
    for k, v in point.items():
        if k == "block":
            continue
        if isinstance(v, float):
            v = f"{v:g}"
        parts.append(f"{k}{v}")
    tag = "_".join(parts)
    for bad, good in (("/", "-"), (":", "-"), (",", "-"), (" ", "")):
        tag = tag.replace(bad, good)
    return tag


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def gnuplot_script(name: str, csv_name: str, x: str, ys: list[str], names: list[str]) -> str:
    lines = [
        f"# plot {csv_name}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{x}'",
        f"set terminal pngcairo size 900,600",
        f"set output '{name}.png'",
    ]
    cols = [names.index(y) + 1 for y in ys]
    xi = names.index(x) + 1
    plots = ", ".join(f"'{csv_name}' using {xi}:{c} with linespoints" for c in cols)
    lines.append(f"plot {plots}")
    return "\n".join(lines) + "\n"


# --- execution -------------------------------------------------------------------


def _execute(args: tuple[int, dict, ScenarioConfig]) -> tuple[int, PointResult | None, str | None]:
    index, point, cfg = args
    overrides = {k: v for k, v in point.items() if k != "block"}
    try:
        return index, run_point(cfg.with_overrides(overrides)), None
    except Exception:  # reported in the manifest, run continues
        return index, None, traceback.format_exc()


def run(
    cfg: ScenarioConfig,
    out: str | Path = "results",
    threads: int | None = None,
    deterministic: bool = True,
) -> RunManifest:
    """Run ``cfg`` and write ``<out>/<name>/...``; returns the manifest."""
    diagnostics = validate(cfg)
    errors = [d for d in diagnostics if d.level == "error"]
    if errors:
        raise ConfigError("; ".join(str(d) for d in errors))
    threads = resolve_threads(threads)
    chash = cfg.hash()
    header = [f"config_hash: {chash}", f"scenario: {cfg.name}", f"anchor: {cfg.anchor}"]
    outdir = Path(out) / cfg.name
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    points = sweep_points(cfg)
    jobs = [(i, p, cfg) for i, p in enumerate(points)]
    results: dict[int, PointResult] = {}
    failed = []
    if threads == 1 or len(jobs) == 1:
        outcomes = map(_execute, jobs)
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        pool = ProcessPoolExecutor(max_workers=threads, mp_context=ctx)
        outcomes = pool.map(_execute, jobs)
    for index, res, err in outcomes:
        if res is None:
            logger.error("point %d failed:\n%s", index, err)
            failed.append({"index": index, "point": points[index], "error": err.strip().splitlines()[-1]})
        else:
            results[index] = res
    if threads > 1 and len(jobs) > 1:
        pool.shutdown()

    written: list[Path] = []
    # summary table, ordered by grid index
    axis_names: list[str] = []
    for p in points:
        for k in p:
            if k not in axis_names:
                axis_names.append(k)
    value_names: list[str] = []
    for i in sorted(results):
        for k in results[i].row:
            if k not in value_names:
                value_names.append(k)
    rows = []
    for i, p in enumerate(points):
        row = results.get(i).row if i in results else {}
        rows.append([i] + [p.get(a) for a in axis_names] + [row.get(k, "") for k in value_names] + [int(i in results)])
    names = ["point"] + axis_names + value_names + ["ok"]
    main = outdir / f"{cfg.name}.csv"
    write_table(main, header, names, rows)
    written.append(main)

    multi = len(points) > 1
    for i in sorted(results):
        tag = point_tag(points[i]) if multi else ""
        for tname, (cols, data) in results[i].tables.items():
            path = outdir / (f"{tname}_{tag}.csv" if tag else f"{tname}.csv")
            write_table(path, header, cols, _columns_to_rows(data))
            written.append(path)
        for jname, payload in results[i].json.items():
            path = outdir / (f"{jname}_{tag}.json" if tag else f"{jname}.json")
            write_json(path, {"config_hash": chash, **payload})
            written.append(path)

    if cfg.kind in SUMMARY_FUNCTIONS:
        extra = SUMMARY_FUNCTIONS[cfg.kind](cfg)
        for tname, (cols, data) in extra.tables.items():
            path = outdir / f"{tname}.csv"
            write_table(path, header, cols, _columns_to_rows(data))
            written.append(path)

    if "gnuplot" in cfg.outputs and value_names:
        x = next((a for a in axis_names if a != "block"), "point")
        ys = [k for k in value_names if k in cfg.analysis.get("plot", value_names[:2])]
        gp = outdir / f"{cfg.name}.gp"
        gp.write_text(gnuplot_script(cfg.name, main.name, x, ys, names))
        written.append(gp)

    manifest = RunManifest(
        scenario=cfg.name,
        anchor=cfg.anchor,
        config_hash=chash,
        versions=versions(),
        wall_time=time.perf_counter() - t0,
        outputs=[{"path": p.name, "sha256": _sha256(p)} for p in written],
        failed_points=failed,
        status="partial" if failed else "complete",
        deterministic=deterministic,
        threads=threads,
        warnings=[str(d) for d in diagnostics],
    )
    write_json(outdir / "manifest.json", json.loads(manifest.to_json()))
    return manifest
