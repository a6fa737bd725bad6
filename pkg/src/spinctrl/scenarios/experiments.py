"""Single-point computations behind every scenario kind.

Each ``point_<kind>`` takes a fully resolved config (sweep overrides already
applied) and returns a :class:`PointResult`: one summary row plus any
per-point tables (pulses, spectra, traces) and JSON blobs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..krotov import (
    GateObjective,
    OpenGateObjective,
    OptimizationProblem,
    OptimizationResult,
    StateObjective,
    default_update_shape,
    optimize,
)
from ..metrics import (
    average_gate_fidelity,
    bell_states,
    concurrence,
    controlled_not,
    fidelity_concurrence_bound,
    fidelity_trace,
    lab_frame_target,
    not_gate,
    outputs_from_superoperator,
)
from ..propagate import (
    bloch_vector,
    build_collapse_operators,
    noise_channels,
    process_superoperator,
    propagate_ket,
    to_interaction_picture,
    Trajectory,
    trotter_propagator,
    unvec,
)
from ..pulses import (
    SampledPulse,
    Tone,
    TonePulse,
    flattop,
    prominent_peaks,
    spectrum,
    synchronize_rabi,
)
from ..spin import (
    SpinSystem,
    boltzmann_populations,
    thermal_state,
    transition_frequencies,
    two_qubit_analytic,
)
from .config import ScenarioConfig, parse_target

logger = logging.getLogger(__name__)

Table = tuple[list[str], list]


@dataclass
class PointResult:
    row: dict
    tables: dict[str, Table] = field(default_factory=dict)
    json: dict[str, dict] = field(default_factory=dict)


# --- builders -----------------------------------------------------------------------


def build_system(cfg: ScenarioConfig) -> SpinSystem:
    return cfg.system.build()


def named_transitions(sys: SpinSystem) -> dict[str, float]:
    """RF1, RF2, ... in the canonical order (last-qubit flips first)."""
    return {f"RF{i + 1}": t.frequency for i, t in enumerate(transition_frequencies(sys))}


def _resolve_frequency(value, sys: SpinSystem) -> float:
    if isinstance(value, str):
        return named_transitions(sys)[value]
    return float(value)


def build_tone_pulse(cfg: ScenarioConfig, sys: SpinSystem, duration: float | None = None) -> TonePulse:
    p = cfg.pulse
    tau = p.tau if duration is None else duration
    rise = p.rise_time  # tone pulses carry an envelope only when asked
    if p.kind == "synchronized":
        rf = named_transitions(sys)
        analytic = two_qubit_analytic(*sys.larmor, sys.coupling[0, 1])
        amp = p.sync_amplitude
        if amp is None:
            amp = np.pi / (tau * abs(analytic.factor2))
        phases = list(p.phases) + [0.0] * (2 - len(p.phases))
        raw = TonePulse((Tone(amp, rf["RF1"], phases[0]), Tone(amp, rf["RF2"], phases[1])), tau, rise)
        return synchronize_rabi(raw, analytic)
    if p.kind == "tones":
        tones = tuple(
            Tone(float(t["amplitude"]), _resolve_frequency(t["frequency"], sys), float(t.get("phase", 0.0)))
            for t in p.tones
        )
        return TonePulse(tones, tau, rise)
    raise ValueError(f"pulse kind {p.kind!r} is not a tone pulse")


def build_guess(cfg: ScenarioConfig, sys: SpinSystem) -> SampledPulse:
    p = cfg.pulse
    if p.kind == "flattop":
        return flattop(p.tau, p.amplitude, p.rise(), p.dt)
    return build_tone_pulse(cfg, sys).sample(p.dt)


def build_collapse(cfg: ScenarioConfig, sys: SpinSystem) -> list[np.ndarray]:
    n = sys.n_qubits
    nz = cfg.noise
    channels = noise_channels(n, nz.per_qubit("T1", n), nz.per_qubit("Tphi", n), nz.temperature)
    return build_collapse_operators(channels, sys, nz.collapse_basis, nz.boltzmann)


def gate_matrix(cfg: ScenarioConfig, n_qubits: int) -> np.ndarray:
    kind, args = parse_target(cfg.optimizer.target, n_qubits)
    if kind == "not":
        return not_gate(args[0], n_qubits)
    if kind == "cnot":
        return controlled_not(args[0], args[1], n_qubits)
    raise ValueError(f"{cfg.optimizer.target} is not a gate target")


def _update_shape(cfg: ScenarioConfig) -> SampledPulse:
    return default_update_shape(cfg.pulse.tau, cfg.pulse.dt, cfg.optimizer.update_rise_time)


def closed_gate_problem(cfg: ScenarioConfig, sys: SpinSystem, guess: SampledPulse, lambda_a=None, iterations=None):
    o = cfg.optimizer
    obj = GateObjective(lab_frame_target(gate_matrix(cfg, sys.n_qubits), sys, cfg.pulse.tau), sys.label_basis)
    return OptimizationProblem(
        system=sys,
        objective=obj,
        guess=guess,
        lambda_a=o.lambda_a if lambda_a is None else lambda_a,
        update_shape=_update_shape(cfg),
        max_iter=o.iterations if iterations is None else iterations,
        stop_tolerance=1e-6 if o.stop_tolerance is None else o.stop_tolerance,
        on_nonmonotonic=o.on_nonmonotonic,
    )


_SEED_CACHE: dict[str, tuple[SampledPulse, OptimizationResult | None]] = {}


def seed_pulse(cfg: ScenarioConfig, sys: SpinSystem) -> tuple[SampledPulse, OptimizationResult | None]:
    """Guess pulse after the seed policy (raw, or closed-system optimized).

    Closed-system seeds are memoized per (system, pulse, target, seed settings).
    """
    guess = build_guess(cfg, sys)
    o = cfg.optimizer
    if o.seed_policy == "raw":
        return guess, None
    key = json.dumps(
        [cfg.to_dict()["system"], cfg.to_dict()["pulse"], o.target, o.seed_lambda_a, o.seed_iterations, o.update_rise_time],
        sort_keys=True,
    )
    if key not in _SEED_CACHE:
        problem = closed_gate_problem(cfg, sys, guess, o.seed_lambda_a, o.seed_iterations)
        res = optimize(problem)
        _SEED_CACHE[key] = (res.pulse, res)
    return _SEED_CACHE[key]


# --- shared outputs -------------------------------------------------------------------


def convergence_table(res: OptimizationResult) -> Table:
    it = np.arange(len(res.J_T))
    return ["iteration", "J_T", "fidelity", "max_update"], [it, res.J_T, res.fidelity, res.max_update]


def pulse_table(pulse: SampledPulse) -> Table:
    return ["t_ns", "amplitude"], [pulse.times, pulse.samples]


def spectrum_rows(cfg: ScenarioConfig, sys: SpinSystem, pulse: SampledPulse, prefix: str = "") -> tuple[dict, Table]:
    """Peak summary (per named transition) and the spectrum table of ``pulse``."""
    rf = named_transitions(sys)
    names = cfg.analysis.get("peaks", list(rf))
    centers = [rf[n] for n in names]
    report = spectrum(pulse, centers, pad=int(cfg.analysis.get("pad", 8)))
    row = {}
    by_center = {}
    for n, c in zip(names, centers):
        match = [pk for pk in report.peaks if abs(pk.center - c) <= 20 * report.resolution]
        by_center[n] = min(match, key=lambda pk: abs(pk.center - c)) if match else None
    for n in names:
        pk = by_center[n]
        row[f"{prefix}center_{n}"] = pk.center if pk else np.nan
        row[f"{prefix}height_{n}"] = pk.height if pk else np.nan
        row[f"{prefix}fwhm_{n}"] = pk.fwhm if pk and pk.fwhm is not None else np.nan
    freqs = list(rf.values())
    band = cfg.analysis.get("peak_band", [0.5 * min(freqs), 1.5 * max(freqs)])
    sep = float(cfg.analysis.get("peak_separation", 1.0))
    found = prominent_peaks(report, float(cfg.analysis.get("peak_rel_height", 0.1)), tuple(band), sep)
    row[f"{prefix}n_peaks"] = len(found)
    row[f"{prefix}peaks_on_transitions"] = int(
        len(found) == len(freqs) and all(np.min(np.abs(np.asarray(freqs) - f)) <= report.resolution for f in found)
    )
    row[f"{prefix}resolution"] = report.resolution
    m = report.frequencies <= float(cfg.analysis.get("spectrum_max", 2 * max(freqs)))
    return row, (["omega_rad_per_ns", "magnitude"], [report.frequencies[m], report.magnitudes[m]])


def _optimizer_row(res: OptimizationResult) -> dict:
    return {
        "J_T": res.J_T[-1],
        "fidelity": res.fidelity[-1],
        "iterations": res.iterations_run,
        "converged": int(res.converged),
        "best_iteration": res.best_iteration,
        "stop_reason": res.stop_reason,
        "monotonic": int(bool(np.all(np.diff(res.J_T) <= 1e-9))),
    }


# --- kinds --------------------------------------------------------------------------------


def point_transitions(cfg: ScenarioConfig) -> PointResult:
    """Eigen-energies, transition frequencies and drive factors of the drift."""
    sys = build_system(cfg)
    row = {}
    for lab, e in zip(range(sys.dim), sys.label_energies):
        row[f"E_{lab:0{sys.n_qubits}b}"] = e
    for i, t in enumerate(transition_frequencies(sys)):
        row[f"RF{i + 1}"] = t.frequency
        row[f"factor_RF{i + 1}"] = abs(t.factor)
    if sys.n_qubits == 2:
        w = sys.label_basis
        row["c_01_major"] = abs(w[1, 1])
        row["c_01_minor"] = abs(w[2, 1])
        row["c_10_major"] = abs(w[2, 2])
        row["c_10_minor"] = abs(w[1, 2])
    return PointResult(row)


def summary_transitions(cfg: ScenarioConfig) -> PointResult:
    """Populations of the dressed states under a synchronized NOT drive."""
    sys = build_system(cfg)
    if sys.n_qubits != 2:
        return PointResult({})
    omega = float(cfg.analysis.get("omega", np.pi / 50))
    c = cfg.with_overrides({"pulse_kind": "synchronized", "pulse.sync_amplitude": omega})
    analytic = two_qubit_analytic(*sys.larmor, sys.coupling[0, 1])
    tau = np.pi / abs(omega * analytic.factor2)
    dt = cfg.pulse.dt
    tau = round(tau / dt) * dt
    pulse = build_tone_pulse(c, sys, tau).sample(dt)
    tables = {}
    for start in ("00", "10"):
        traj = propagate_ket(sys.drift, sys.control, pulse, sys.eigenstate(start))
        pops = np.abs(traj.states @ sys.label_basis.conj()) ** 2
        names = ["t_ns"] + [f"p_{b:02b}" for b in range(4)]
        tables[f"populations_from_{start}"] = (names, [traj.times] + [pops[:, b] for b in range(4)])
    return PointResult({}, tables)


def _max_fidelity(sys: SpinSystem, pulse: SampledPulse, gate: np.ndarray) -> tuple[float, float]:
    times, us = trotter_propagator(sys.drift, sys.control, pulse, store=True)
    f = fidelity_trace(us, gate, sys, times)
    k = int(np.argmax(f))
    return float(f[k]), float(times[k])


def point_rabi_sync(cfg: ScenarioConfig) -> PointResult:
    """Best NOT fidelity within a time window for a bichromatic drive.

    analysis: omega (second-tone amplitude, rad/ns), window (ns),
    modes (subset of ["unsync", "sync"]).
    """
    sys = build_system(cfg)
    omega = float(cfg.analysis.get("omega", np.pi / 50))
    window = float(cfg.analysis.get("window", 100.0))
    modes = cfg.analysis.get("modes", ["unsync", "sync"])
    gate = gate_matrix(cfg, sys.n_qubits)
    analytic = two_qubit_analytic(*sys.larmor, sys.coupling[0, 1])
    rf = named_transitions(sys)
    phases = list(cfg.pulse.phases) + [0.0, 0.0]
    row = {"ratio": analytic.factor2 / analytic.factor1}
    for mode in modes:
        tones = (Tone(omega, rf["RF1"], phases[0]), Tone(omega, rf["RF2"], phases[1]))
        pulse = TonePulse(tones, window, cfg.pulse.rise_time)
        if mode == "sync":
            pulse = synchronize_rabi(pulse, analytic)
        f, t = _max_fidelity(sys, pulse.sample(cfg.pulse.dt), gate)
        row[f"F_{mode}"] = f
        row[f"t_{mode}"] = t
    return PointResult(row)


def point_closed_gate(cfg: ScenarioConfig) -> PointResult:
    sys = build_system(cfg)
    guess, _ = seed_pulse(cfg, sys) if cfg.optimizer.seed_policy != "raw" else (build_guess(cfg, sys), None)
    problem = closed_gate_problem(cfg, sys, guess)
    res = optimize(problem)
    row = _optimizer_row(res)
    peaks, spec = spectrum_rows(cfg, sys, res.pulse)
    row.update(peaks)
    tables = {
        "convergence": convergence_table(res),
        "pulse_guess": pulse_table(guess),
        "pulse_optimized": pulse_table(res.pulse),
        "spectrum_optimized": spec,
    }
    if "fidelity_vs_time" in cfg.outputs or "bloch" in cfg.outputs:
        times, us = trotter_propagator(sys.drift, sys.control, res.pulse, store=True)
        gate = gate_matrix(cfg, sys.n_qubits)
        stride = int(cfg.analysis.get("stride", 10))
        f = fidelity_trace(us[::stride], gate, sys, times[::stride])
        tables["fidelity_vs_time"] = (["t_ns", "fidelity"], [times[::stride], f])
        if "bloch" in cfg.outputs:
            kind, args = parse_target(cfg.optimizer.target, sys.n_qubits)
            qubit = args[-1]
            for b in range(sys.dim):
                label = f"{b:0{sys.n_qubits}b}"
                traj = propagate_ket(sys.drift, sys.control, res.pulse, sys.label_basis[:, b])
                traj = Trajectory(traj.times[::stride], traj.states[::stride])
                traj = to_interaction_picture(traj, sys.drift)
                # express in the dressed basis so the Bloch vector refers to the qubit labels
                traj = replace(traj, states=traj.states @ sys.label_basis.conj())
                r = bloch_vector(traj, qubit, sys.n_qubits)
                tables[f"bloch_{label}"] = (["t_ns", "x", "y", "z"], [traj.times, r[:, 0], r[:, 1], r[:, 2]])
    return PointResult(row, tables)


def point_bell(cfg: ScenarioConfig) -> PointResult:
    """Thermal state -> Bell state under (optional) relaxation and dephasing."""
    sys = build_system(cfg)
    _, args = parse_target(cfg.optimizer.target, sys.n_qubits)
    target = bell_states(sys)[args[0]]
    rho0 = thermal_state(sys, cfg.noise.temperature, cfg.noise.boltzmann)
    c_ops = build_collapse(cfg, sys)
    guess = build_guess(cfg, sys)
    o = cfg.optimizer
    problem = OptimizationProblem(
        system=sys,
        objective=StateObjective(rho0, target),
        guess=guess,
        lambda_a=o.lambda_a,
        update_shape=_update_shape(cfg),
        max_iter=o.iterations,
        stop_tolerance=0.0 if o.stop_tolerance is None else o.stop_tolerance,
        collapse_ops=c_ops,
        on_nonmonotonic=o.on_nonmonotonic,
    )
    res = optimize(problem, store_final_states=True)
    conc = [concurrence(unvec(x[0]), sys) for x in res.final_states]
    bound = all(fidelity_concurrence_bound(f, c) for f, c in zip(res.fidelity, conc))
    p = boltzmann_populations(sys.eigen.energies, cfg.noise.temperature, cfg.noise.boltzmann)
    row = _optimizer_row(res)
    row.update({"concurrence": conc[-1], "bound_holds": int(bound), "p1": p[0]})
    names, cols = convergence_table(res)
    tables = {
        "convergence": (names + ["concurrence"], cols + [conc]),
        "pulse_optimized": pulse_table(res.pulse),
    }
    return PointResult(row, tables)


def gate_breakdown(sys: SpinSystem, pulse: SampledPulse, c_ops, gate: np.ndarray, tau: float):
    sup = process_superoperator(sys.drift, sys.control, pulse, c_ops)
    basis = sys.label_basis
    outputs = outputs_from_superoperator(sup, basis)
    return average_gate_fidelity(outputs, lab_frame_target(gate, sys, tau), basis)


def point_open_gate(cfg: ScenarioConfig) -> PointResult:
    """Gate optimization on the Lindblad dynamics with three encoded states.

    analysis.compare_agnostic: also report the seed pulse's F_avg under noise.
    """
    sys = build_system(cfg)
    c_ops = build_collapse(cfg, sys)
    seed, seed_res = seed_pulse(cfg, sys)
    gate = gate_matrix(cfg, sys.n_qubits)
    o = cfg.optimizer
    obj = OpenGateObjective(lab_frame_target(gate, sys, cfg.pulse.tau), sys.label_basis, tuple(o.weights), o.normalization)
    problem = OptimizationProblem(
        system=sys,
        objective=obj,
        guess=seed,
        lambda_a=o.lambda_a,
        update_shape=_update_shape(cfg),
        max_iter=o.iterations,
        stop_tolerance=o.stop_tolerance,
        collapse_ops=c_ops,
        on_nonmonotonic=o.on_nonmonotonic,
    )
    res = optimize(problem)
    breakdown = gate_breakdown(sys, res.pulse, c_ops, gate, cfg.pulse.tau)
    row = _optimizer_row(res)
    row["F_avg"] = breakdown.f_avg
    row["F_coh"] = breakdown.f_coh.real
    row["F_dia"] = breakdown.f_dia
    if seed_res is not None:
        row["seed_closed_fidelity"] = seed_res.fidelity[-1]
    if cfg.analysis.get("compare_agnostic", False):
        row["F_avg_agnostic"] = gate_breakdown(sys, seed, c_ops, gate, cfg.pulse.tau).f_avg
    peaks, spec = spectrum_rows(cfg, sys, res.pulse)
    row.update(peaks)
    labels = [f"{b:0{sys.n_qubits}b}" for b in range(sys.dim)]
    tables = {
        "convergence": convergence_table(res),
        "pulse_optimized": pulse_table(res.pulse),
        "spectrum_optimized": spec,
        # row: output basis state i, column: input basis state j
        "diagonal_fidelity": (
            ["output"] + [f"in_{lab}" for lab in labels],
            [np.arange(sys.dim)] + [breakdown.diagonal[:, j] for j in range(sys.dim)],
        ),
        "coherent_fidelity": (
            ["i"] + [f"re_{lab}" for lab in labels] + [f"im_{lab}" for lab in labels],
            [np.arange(sys.dim)]
            + [breakdown.coherent[:, j].real for j in range(sys.dim)]
            + [breakdown.coherent[:, j].imag for j in range(sys.dim)],
        ),
    }
    payload = json.loads(breakdown.to_json(labels=labels))
    return PointResult(row, tables, {"fidelity_breakdown": payload})


POINT_FUNCTIONS = {
    "transitions": point_transitions,
    "rabi_sync": point_rabi_sync,
    "closed_gate": point_closed_gate,
    "bell": point_bell,
    "open_gate": point_open_gate,
}

SUMMARY_FUNCTIONS = {"transitions": summary_transitions}


def run_point(cfg: ScenarioConfig) -> PointResult:
    return POINT_FUNCTIONS[cfg.kind](cfg)
