"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (shown in the terminal summary)
before asserting, so a failing criterion still reports its numbers. The
scenario-level checks run the built-in scenario configs through the same
point functions the CLI uses.
"""

import json
import time
from functools import lru_cache

import numpy as np
import pytest
import scipy.linalg

from spinctrl.krotov import OpenGateObjective, encoded_states, open_functional
from spinctrl.metrics import average_gate_fidelity, concurrence, liouville_basis_outputs
from spinctrl.operators import is_unitary, kron, ket, projector, trace_distance
from spinctrl.propagate import (
    CollapseChannel,
    build_collapse_operators,
    lindblad_propagate,
    liouvillian,
    noise_channels,
    trajectory_diagnostics,
    trotter_propagator,
    unvec,
)
from spinctrl.pulses import SampledPulse
from spinctrl.scenarios import get_scenario
from spinctrl.scenarios.config import sweep_points
from spinctrl.scenarios.experiments import run_point
from spinctrl.spin import SpinSystem, thermal_state, two_qubit_analytic

from .conftest import ACCEPTANCE_LINES, random_density, random_unitary

pytestmark = pytest.mark.slow

# monotonicity flags of every Krotov run made here, checked by criterion 11
KROTOV_RUNS: dict[str, bool] = {}


def record(number: int, title: str, passed: bool, detail: str, started: float) -> None:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail} ({time.perf_counter() - started:.1f} s)"
    ACCEPTANCE_LINES[number] = line
    print(line)


@lru_cache(maxsize=None)
def scenario_points(name: str, sweep_json: str | None = None) -> tuple:
    """Run every grid point of a built-in scenario; optional replacement sweep."""
    cfg = get_scenario(name)
    if sweep_json is not None:
        cfg.sweep = json.loads(sweep_json)
    out = []
    for point in sweep_points(cfg):
        res = run_point(cfg.with_overrides({k: v for k, v in point.items() if k != "block"}))
        if "monotonic" in res.row:
            KROTOV_RUNS[f"{name} {point}"] = bool(res.row["monotonic"])
        out.append((point, res))
    return tuple(out)


def test_criterion_01_analytic_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240101)
    worst_e = worst_v = 0.0
    for _ in range(50):
        # the closed-form labels assume the first qubit has the larger splitting
        w2 = rng.uniform(5, 100)
        w1 = w2 + rng.uniform(1, 100)
        j = rng.uniform(0.05, 20)
        s = SpinSystem.two_qubit(w1, w2, j)
        a = two_qubit_analytic(w1, w2, j)
        worst_e = max(worst_e, np.abs(np.sort(a.energies) - s.eigen.energies).max())
        for label, vec in a.eigenstates.items():
            # equal up to a global phase <=> |<a|n>| == 1
            worst_v = max(worst_v, abs(1 - abs(np.vdot(vec, s.eigenstate(label)))))
    ok = worst_e < 1e-9 and worst_v < 1e-8
    record(1, "analytic oracle", ok, f"max |dE| = {worst_e:.1e}, max eigenvector phase-free error = {worst_v:.1e}", t0)
    assert ok


def test_criterion_02_hybridization(reference_system):
    t0 = time.perf_counter()
    w = reference_system.label_basis
    major, minor = abs(w[1, 1]), abs(w[2, 1])
    ok = abs(major - 0.992) < 1e-3 and abs(minor - 0.129) < 1e-3 and abs(abs(w[2, 2]) - major) < 1e-12
    record(2, "hybridization", ok, f"|~01> = {major:.4f}|01> - {minor:.4f}|10>", t0)
    assert ok


def test_criterion_03_rabi_sync():
    t0 = time.perf_counter()
    pts = scenario_points("fig1e_rabi_sync")
    rows = {p["J"]: r.row for p, r in pts}
    ratio = abs(rows[5.0]["ratio"])
    js = sorted(j for j in rows if 1.0 <= j <= 10.0)
    unsync = np.array([rows[j]["F_unsync"] for j in js])
    sync = np.array([rows[j]["F_sync"] for j in js])
    (_, ref), = scenario_points("fig1e_rabi_sync", json.dumps([{"J": [0.01]}]))
    f0 = ref.row["F_sync"]
    drift = np.abs(sync - f0).max()
    ok = abs(ratio - 1.3) <= 0.05 and bool(np.all(np.diff(unsync) < 0)) and drift <= 0.02
    record(
        3,
        "Rabi synchronization",
        ok,
        f"ratio {ratio:.4f}; unsync {unsync[0]:.4f} -> {unsync[-1]:.4f} "
        f"(monotone: {bool(np.all(np.diff(unsync) < 0))}); sync max deviation from J->0 ({f0:.4f}) = {drift:.4f}",
        t0,
    )
    assert ok


def test_criterion_04_closed_not():
    t0 = time.perf_counter()
    pts = scenario_points("fig2_closed_not")
    rows = {p["J"]: r.row for p, r in pts}
    fid = {j: rows[j]["fidelity"] for j in rows}
    iters = {j: rows[j]["iterations"] for j in rows}
    main = rows[5.0]
    spectral = main["n_peaks"] == 4 and main["peaks_on_transitions"] == 1
    ok = all(f >= 0.999 for f in fid.values()) and all(i <= 600 for i in iters.values()) and spectral
    detail = ", ".join(f"J={j:g}: F={fid[j]:.6f} in {iters[j]} it" for j in sorted(fid))
    detail += f"; spectrum {main['n_peaks']} peaks, on transitions: {bool(main['peaks_on_transitions'])}"
    record(4, "closed-system NOT", ok, detail, t0)
    assert ok


def test_criterion_05_lindblad_sanity(reference_system):
    t0 = time.perf_counter()
    qubit = SpinSystem(np.array([2.0]), np.zeros((1, 1)))
    zero = SampledPulse(np.zeros(1001))
    (l1,) = build_collapse_operators([CollapseChannel(0, "relaxation", 5.0)], qubit)
    decay = lindblad_propagate(qubit.drift, qubit.control, zero, [l1], projector(ket("1")))
    err_t1 = np.abs(decay.states[:, 1, 1].real - np.exp(-decay.times / 5.0)).max()
    (lphi,) = build_collapse_operators([CollapseChannel(0, "dephasing", 4.0)], qubit)
    plus = (ket("0") + ket("1")) / np.sqrt(2)
    deph = lindblad_propagate(qubit.drift, qubit.control, zero, [lphi], plus)
    err_phi = np.abs(np.abs(deph.states[:, 0, 1]) - 0.5 * np.exp(-deph.times / 4.0)).max()
    worst_td = 0.0
    for temperature in (0.1, 0.4, 1.0, 2.0):
        c = build_collapse_operators(noise_channels(2, [150.0, 120.0], [300.0, 200.0], temperature), reference_system)
        null = scipy.linalg.null_space(liouvillian(reference_system.drift, c))
        rho = unvec(null[:, 0])
        rho = rho / np.trace(rho)
        worst_td = max(worst_td, trace_distance(rho, thermal_state(reference_system, temperature)))
    ok = err_t1 < 1e-4 and err_phi < 1e-4 and worst_td < 1e-3
    record(5, "Lindblad sanity", ok, f"T1 err {err_t1:.1e}, Tphi err {err_phi:.1e}, steady-state trace distance {worst_td:.1e}", t0)
    assert ok


TABLE_I = {"phi+": (0.9849, 0.9712), "phi-": (0.9878, 0.9760), "psi+": (0.9816, 0.9719), "psi-": (0.9853, 0.9782)}


def test_criterion_06_table_one():
    t0 = time.perf_counter()
    pts = scenario_points("table1_bell")
    parts, ok = [], True
    for p, r in pts:
        name = p["target"].split(":")[1]
        f_ref, c_ref = TABLE_I[name]
        f, c = r.row["fidelity"], r.row["concurrence"]
        good = abs(f - f_ref) <= 0.01 and abs(c - c_ref) <= 0.01 and bool(r.row["bound_holds"]) and r.row["iterations"] <= 200
        ok &= good
        parts.append(f"{name} F={f:.4f}/{f_ref} C={c:.4f}/{c_ref}{'' if good else ' x'}")
    record(6, "Table I Bell states", ok, "; ".join(parts), t0)
    assert ok


def test_criterion_07_bell_maps():
    t0 = time.perf_counter()
    pts = scenario_points("fig4_bell_maps")
    temps = sorted({p["temperature"] for p, _ in pts})
    f = {(p["temperature"], p["T1"]): r.row["fidelity"] for p, r in pts}
    c = {(p["temperature"], p["T1"]): r.row["concurrence"] for p, r in pts}
    p1 = {p["temperature"]: r.row["p1"] for p, r in pts}
    spread_f = max(np.ptp([f[k] for k in f if k[0] == t]) for t in temps)
    spread_c = max(np.ptp([c[k] for k in c if k[0] == t]) for t in temps)
    mean_f = np.array([np.mean([f[k] for k in f if k[0] == t]) for t in temps])
    track = np.abs(mean_f - np.array([p1[t] for t in temps])).max()
    varies = np.ptp(mean_f) > 0.02
    ok = spread_f < 0.02 and spread_c < 0.02 and track <= 0.03 and varies
    record(
        7,
        "Fig. 4 maps",
        ok,
        f"max spread over T1: F {spread_f:.4f}, C {spread_c:.4f}; max |F - p1| = {track:.4f}; "
        f"F over T: {np.round(mean_f, 4).tolist()}; "
        f"C spread per T: {[round(float(np.ptp([c[k] for k in c if k[0] == t])), 4) for t in temps]}",
        t0,
    )
    assert ok


def _lowest_energy_skew(payload: dict, n_low: int = 2) -> bool:
    diag = np.diag(np.array(payload["diagonal"]))
    order = np.argsort(diag)[::-1]
    return sorted(order[:n_low].tolist()) == list(range(n_low))


def test_criterion_08_three_qubit_cnot():
    t0 = time.perf_counter()
    pts = scenario_points("fig6_three_qubit_cnot")
    rows = {p["T1_1"]: r for p, r in pts}
    dc = rows[1000.0].row["F_avg"]
    on = rows[10.0].row["F_avg"]
    # labels are ordered 000, 001, ...; with omega_1 > omega_2 > omega_3 these are the two lowest energies
    skew = _lowest_energy_skew(rows[10.0].json["fidelity_breakdown"])
    ok = abs(dc - 0.887) <= 0.02 and abs(on - 0.446) <= 0.03 and skew
    record(
        8,
        "three-qubit CNOT",
        ok,
        f"DC pulsing F_avg {dc:.4f} (0.887 +- 0.02); always-on F_avg {on:.4f} (0.446 +- 0.03); "
        f"noise-agnostic {rows[1000.0].row['F_avg_agnostic']:.4f} / {rows[10.0].row['F_avg_agnostic']:.4f}; "
        f"diagonal skewed to |000>,|001>: {skew}",
        t0,
    )
    assert ok


def _non_decreasing(values, slack=1e-9) -> bool:
    return bool(np.all(np.diff(values) >= -slack))


def test_criterion_09_spectral_trends():
    t0 = time.perf_counter()
    pts = scenario_points("fig5_spectrum_vs_noise")
    checks, parts = [], []
    for axis in ("T1", "Tphi"):
        sel = sorted(((p[axis], r.row) for p, r in pts if axis in p), key=lambda x: -x[0])  # increasing rate 1/T
        for peak in ("RF1", "RF2"):
            width = [r[f"fwhm_{peak}"] for _, r in sel]
            centers = np.array([r[f"center_{peak}"] for _, r in sel])
            res = sel[0][1]["resolution"]
            w_ok = _non_decreasing(width)
            c_ok = np.ptp(centers) <= res
            checks += [w_ok, c_ok]
            parts.append(f"{axis} {peak} fwhm {np.round(width, 4).tolist()}{'' if w_ok else ' x'}")
            if not c_ok:
                parts.append(f"{axis} {peak} center drift {np.ptp(centers):.3f} > {res:.3f}")
            if axis == "Tphi":
                height = [r[f"height_{peak}"] for _, r in sel]
                h_ok = _non_decreasing(height)
                checks.append(h_ok)
                parts.append(f"Tphi {peak} height {np.round(height, 4).tolist()}{'' if h_ok else ' x'}")
    ok = all(checks)
    record(9, "Fig. 5 spectral trends", ok, "; ".join(parts), t0)
    assert ok


def test_criterion_10_phase_study():
    t0 = time.perf_counter()
    pts = scenario_points("figS1_phase")
    dphi = np.array([p["dphi"] for p, _ in pts])
    f = np.array([r.row["F_unsync"] for _, r in pts])
    step = np.min(np.diff(np.sort(dphi)))
    best = dphi[np.argmax(f)]
    ok = abs(best) <= step + 1e-12
    record(10, "Fig. S1 phase study", ok, f"max F = {f.max():.4f} at dphi = {best:+.4f} (grid step {step:.4f}); F(0) = {f[np.argmin(np.abs(dphi))]:.4f}", t0)
    assert ok


def test_noise_informed_not_worse_than_agnostic():
    """Optimizing under the actual noise should never lose to the closed-system seed."""
    sweep = json.dumps([{"pulse_kind": ["flattop"], "T1": [10.0, 100.0, 1000.0]}])
    pts = scenario_points("figS8_noise_informed_vs_agnostic", sweep)
    pairs = {p["T1"]: (r.row["F_avg"], r.row["F_avg_agnostic"]) for p, r in pts}
    print("noise-informed vs agnostic F_avg:", {k: (round(a, 4), round(b, 4)) for k, (a, b) in pairs.items()})
    assert all(a >= b - 1e-9 for a, b in pairs.values())


def test_criterion_11_property_suites(reference_system):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    failures = []
    for _ in range(20):
        u = trotter_propagator(reference_system.drift, reference_system.control, SampledPulse(rng.normal(size=201) * 4))
        if not is_unitary(u, 1e-8):
            failures.append("trotter unitarity")
            break
    for _ in range(10):
        c = build_collapse_operators(noise_channels(2, rng.uniform(1, 100, 2), rng.uniform(1, 100, 2), rng.uniform(0, 2)), reference_system)
        traj = lindblad_propagate(reference_system.drift, reference_system.control, SampledPulse(rng.normal(size=201) * 4), c, random_density(rng, 4))
        d = trajectory_diagnostics(traj)
        if d["trace_error"] > 1e-8 or d["hermiticity_error"] > 1e-8 or d["min_eigenvalue"] < -1e-7:
            failures.append("GKSL trace/positivity")
            break
    for _ in range(20):
        x = rng.normal(size=int(rng.integers(4, 500)))
        spec = np.fft.fft(x) * 0.01
        if abs(np.sum(np.abs(spec) ** 2) / (len(x) * 0.01) - np.sum(x**2) * 0.01) > 1e-8 * np.sum(x**2) * 0.01:
            failures.append("Parseval")
            break
    for _ in range(20):
        rho = random_density(rng, 4, rank=int(rng.integers(1, 5)))
        local = kron(random_unitary(rng, 2), random_unitary(rng, 2))
        if abs(concurrence(local @ rho @ local.conj().T) - concurrence(rho)) > 1e-8:
            failures.append("concurrence invariance")
            break
    for n in (4, 8):
        f = average_gate_fidelity(liouville_basis_outputs(lambda r: r, np.eye(n)), np.eye(n)).f_avg
        if abs(f - 1) > 1e-12:
            failures.append("identity map fidelity")
    enc = encoded_states(reference_system.label_basis)
    if abs(open_functional(enc, enc, np.eye(4), (20, 1, 1))) > 1e-12:
        failures.append("open functional perfect map")
    # Krotov monotonicity over every optimization this module ran (plus a fresh one if none)
    if not KROTOV_RUNS:
        scenario_points("figS2_cnot_closed")
    non_monotone = [k for k, v in KROTOV_RUNS.items() if not v]
    if non_monotone:
        failures.append(f"Krotov monotonicity ({len(non_monotone)} runs: {'; '.join(non_monotone)})")
    ok = not failures
    record(
        11,
        "property suites",
        ok,
        f"{len(KROTOV_RUNS)} Krotov runs monotone: {not non_monotone}; " + ("all green" if ok else "failed: " + ", ".join(failures)),
        t0,
    )
    assert ok
