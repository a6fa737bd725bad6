"""Print the main table of every scenario found under a results directory.

    python3 scripts/summarize.py results [--columns fidelity F_avg concurrence]
"""

import argparse
import csv
import json
from pathlib import Path

DEFAULT_COLUMNS = ["fidelity", "concurrence", "F_avg", "F_avg_agnostic", "F_unsync", "F_sync", "n_peaks", "iterations"]


def read_table(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _short(text: str) -> str:
    try:
        return f"{float(text):.6g}"
    except ValueError:
        return text


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("results", type=Path)
    ap.add_argument("--columns", nargs="*", default=DEFAULT_COLUMNS)
    args = ap.parse_args(argv)

    for manifest_path in sorted(args.results.glob("*/manifest.json")):
        manifest = json.loads(manifest_path.read_text())
        name = manifest["scenario"]
        rows = read_table(manifest_path.parent / f"{name}.csv")
        print(f"\n{name} ({manifest['anchor']}): {manifest['status']}, config hash {manifest['config_hash']}")
        if not rows:
            continue
        names = list(rows[0])
        # the runner writes point, sweep axes, values, ok; axes are the columns before the first value
        first_value = next((i for i, c in enumerate(names) if c in args.columns or c in DEFAULT_COLUMNS), len(names) - 1)
        axes = [c for c in names[1:first_value] if c != "block"]
        shown = axes + [c for c in args.columns if c in names]
        print("  " + "  ".join(f"{c:>14s}" for c in shown))
        for r in rows:
            print("  " + "  ".join(f"{_short(r[c]):>14s}" for c in shown))


if __name__ == "__main__":
    main()
