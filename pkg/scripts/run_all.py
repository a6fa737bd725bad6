"""Run built-in scenarios one after another and print a status line for each.

    python3 scripts/run_all.py --out results
    python3 scripts/run_all.py --out results --only fig2_closed_not table1_bell --threads 4
"""

import argparse
import sys
import time

from spinctrl.scenarios import built_in_scenarios, run

# cheapest first so a partial session still produces the quick figures
ORDER = [
    "fig1bcd_transitions",
    "fig1e_rabi_sync",
    "figS1_phase",
    "figS2_cnot_closed",
    "figS4_ising_not",
    "fig2_closed_not",
    "figS3_bell_closed",
    "table1_bell",
    "fig6_three_qubit_cnot",
    "fig5_spectrum_vs_noise",
    "fig3_noise_maps",
    "figS5_lambda_sweep",
    "figS6_S7_seed_spectra",
    "figS8_noise_informed_vs_agnostic",
    "fig4_bell_maps",
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--only", nargs="*", default=None, help="scenario names to run")
    args = ap.parse_args(argv)

    cfgs = {c.name: c for c in built_in_scenarios()}
    names = args.only or sorted(cfgs, key=lambda n: ORDER.index(n) if n in ORDER else len(ORDER))
    unknown = [n for n in names if n not in cfgs]
    if unknown:
        ap.error(f"unknown scenarios: {', '.join(unknown)}")
    status = 0
    for name in names:
        t0 = time.perf_counter()
        manifest = run(cfgs[name], args.out, threads=args.threads)
        print(f"{name:34s} {manifest.status:9s} {time.perf_counter() - t0:8.1f} s", flush=True)
        if manifest.status != "complete":
            status = 2
    return status


if __name__ == "__main__":
    sys.exit(main())
