"""Scenario configuration: schema, YAML I/O, hashing and validation.

The dataclass defaults below are the complete schema; ``export-defaults``
prints a built-in scenario with every field filled in, so nothing is implied
by code outside this file.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..spin import BOLTZMANN, INTERACTIONS, SpinSystem

KINDS = ("transitions", "rabi_sync", "closed_gate", "bell", "open_gate")
PULSE_KINDS = ("flattop", "tones", "synchronized")
OBJECTIVES = ("gate", "state", "open_gate")
SEED_POLICIES = ("raw", "closed_optimized")
INF = math.inf


@dataclass
class SystemSpec:
    """Drift parameters.

    ``angular: true`` means ``larmor`` is quoted in units of pi rad/ns (the
    "20 pi GHz" style); ``false`` means the numbers enter the Hamiltonian
    verbatim. ``coupling`` is a scalar J for two qubits, a list
    [J12, J23, J13] for three qubits, or a full symmetric matrix.
    """

    larmor: list[float] = field(default_factory=lambda: [20.0, 14.0])
    coupling: Any = 5.0
    angular: bool = True
    interaction: str = "heisenberg"

    @property
    def n_qubits(self) -> int:
        return len(self.larmor)

    def larmor_rad(self) -> np.ndarray:
        w = np.asarray(self.larmor, dtype=float)
        return w * np.pi if self.angular else w

    def coupling_matrix(self) -> np.ndarray:
        n = self.n_qubits
        c = self.coupling
        if np.isscalar(c):
            if n != 2:
                raise ValueError("scalar coupling only valid for two qubits")
            return np.array([[0.0, c], [c, 0.0]], dtype=float)
        arr = np.asarray(c, dtype=float)
        if arr.ndim == 1 and n == 3 and len(arr) == 3:
            j12, j23, j13 = arr
            return np.array([[0, j12, j13], [j12, 0, j23], [j13, j23, 0]], dtype=float)
        if arr.shape != (n, n):
            raise ValueError(f"coupling must be scalar, [J12, J23, J13] or {n}x{n}")
        return arr

    def build(self) -> SpinSystem:
        return SpinSystem(self.larmor_rad(), self.coupling_matrix(), self.interaction)


@dataclass
class NoiseSpec:
    """Per-qubit lifetimes (ns; a scalar applies to all qubits; null = infinite)."""

    T1: Any = None
    Tphi: Any = None
    temperature: float = 0.0
    collapse_basis: str = "eigen"
    boltzmann: float = BOLTZMANN

    def per_qubit(self, attr: str, n: int) -> list[float]:
        v = getattr(self, attr)
        if v is None:
            return [INF] * n
        if np.isscalar(v):
            return [float(v)] * n
        if len(v) != n:
            raise ValueError(f"{attr} needs {n} entries")
        return [INF if x is None else float(x) for x in v]

    def is_noisy(self, n: int) -> bool:
        return any(np.isfinite(self.per_qubit("T1", n))) or any(np.isfinite(self.per_qubit("Tphi", n)))


@dataclass
class PulseSpec:
    """Guess / drive pulse.

    kind: ``flattop`` (constant ``amplitude`` with Blackman ramps), ``tones``
    (explicit list of {amplitude, frequency, phase}; frequency may be a
    transition name such as "RF1"), or ``synchronized`` (two tones at RF1/RF2
    with the first amplitude rescaled for equal Rabi rates). ``amplitude``
    is the flattop level; ``sync_amplitude`` is the second tone's amplitude
    for synchronized pulses, null meaning a pi rotation over tau. Tone
    pulses get a flattop envelope only when ``rise_time`` is set.
    """

    kind: str = "flattop"
    tau: float = 50.0
    dt: float = 0.01
    amplitude: float = 1.0
    sync_amplitude: float | None = None
    rise_time: float | None = None
    tones: list[dict] = field(default_factory=list)
    phases: list[float] = field(default_factory=lambda: [0.0, 0.0])

    def rise(self) -> float:
        return self.tau / 10 if self.rise_time is None else self.rise_time


@dataclass
class OptimizerSpec:
    """Krotov settings.

    target: ``not:Q`` | ``cnot:C,T`` (1-indexed qubits) | ``bell:phi+`` etc.
    stop_tolerance: null picks 1e-6 (closed) or 1e-3 (open); 0 runs every
    iteration. seed_policy ``closed_optimized`` first optimizes the guess on
    the closed system with ``seed_lambda_a`` / ``seed_iterations``.
    """

    objective: str = "gate"
    target: str = "not:2"
    lambda_a: float = 10.0
    iterations: int = 600
    stop_tolerance: float | None = None
    seed_policy: str = "raw"
    seed_lambda_a: float = 10.0
    seed_iterations: int = 600
    weights: list[float] = field(default_factory=lambda: [20.0, 1.0, 1.0])
    normalization: str = "purity"
    update_rise_time: float | None = None
    on_nonmonotonic: str = "raise"


@dataclass
class ScenarioConfig:
    name: str
    anchor: str
    kind: str
    description: str = ""
    system: SystemSpec = field(default_factory=SystemSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    pulse: PulseSpec = field(default_factory=PulseSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    sweep: list[dict] = field(default_factory=list)
    analysis: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=lambda: ["csv"])

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def hash(self) -> str:
        return config_hash(self)

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        cfg = copy.deepcopy(self)
        for key, value in overrides.items():
            apply_override(cfg, key, value)
        return cfg


_SECTIONS = {"system": SystemSpec, "noise": NoiseSpec, "pulse": PulseSpec, "optimizer": OptimizerSpec}


class ConfigError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            value = value or {}
            sec_known = {f.name for f in fields(cls)}
            bad = set(value) - sec_known
            if bad:
                raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
            kwargs[key] = cls(**value)
        else:
            kwargs[key] = value
    for required in ("name", "anchor", "kind"):
        if required not in kwargs:
            raise ConfigError(f"missing required key {required!r}")
    if isinstance(kwargs.get("sweep"), dict):
        kwargs["sweep"] = [kwargs["sweep"]]
    return ScenarioConfig(**kwargs)


def load_config(path: str | Path) -> ScenarioConfig:
    with Path(path).open() as fh:
        return from_dict(yaml.safe_load(fh))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def config_hash(cfg: ScenarioConfig) -> str:
    text = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# --- sweeps ------------------------------------------------------------------------


def apply_override(cfg: ScenarioConfig, key: str, value) -> None:
    """Apply one sweep axis value.

    Axes: ``J`` (two-qubit coupling), ``T1`` / ``Tphi`` (all qubits),
    ``T1_k`` / ``Tphi_k`` (qubit k, 1-indexed), ``temperature``, ``lambda_a``,
    ``dphi`` (phase of the second tone), ``target``, ``pulse_kind``, or any
    dotted path such as ``pulse.tau``.
    """
    n = cfg.system.n_qubits
    if key == "J":
        cfg.system.coupling = float(value)
    elif key in ("T1", "Tphi"):
        setattr(cfg.noise, key, value)
    elif key.startswith(("T1_", "Tphi_")):
        attr, idx = key.split("_")
        vals = cfg.noise.per_qubit(attr, n)
        vals[int(idx) - 1] = INF if value is None else float(value)
        setattr(cfg.noise, attr, [None if math.isinf(v) else v for v in vals])
    elif key == "temperature":
        cfg.noise.temperature = float(value)
    elif key == "lambda_a":
        cfg.optimizer.lambda_a = float(value)
    elif key == "dphi":
        cfg.pulse.phases = [0.0, float(value)]
    elif key == "target":
        cfg.optimizer.target = str(value)
    elif key == "pulse_kind":
        cfg.pulse.kind = str(value)
    elif "." in key:
        section, attr = key.split(".", 1)
        obj = getattr(cfg, section)
        if not hasattr(obj, attr):
            raise ConfigError(f"unknown sweep axis {key!r}")
        setattr(obj, attr, value)
    else:
        raise ConfigError(f"unknown sweep axis {key!r}")


def sweep_points(cfg: ScenarioConfig) -> list[dict]:
    """Every grid point as an ordered override dict; blocks are concatenated."""
    if not cfg.sweep:
        return [{}]
    points = []
    for block_index, block in enumerate(cfg.sweep):
        axes = list(block.items())
        grids = np.meshgrid(*[np.arange(len(v)) for _, v in axes], indexing="ij")
        for idx in zip(*(g.ravel() for g in grids)):
            point = {"block": block_index}
            point.update({name: values[i] for (name, values), i in zip(axes, idx)})
            points.append(point)
    return points


# --- validation ---------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


def validate(cfg: ScenarioConfig | dict) -> list[Diagnostic]:
    """Human-readable problems with a config; an empty list means valid."""
    out: list[Diagnostic] = []
    err = lambda m: out.append(Diagnostic("error", m))  # noqa: E731
    warn = lambda m: out.append(Diagnostic("warning", m))  # noqa: E731
    if isinstance(cfg, dict):
        try:
            cfg = from_dict(cfg)
        except (ConfigError, TypeError) as exc:
            return [Diagnostic("error", str(exc))]

    if cfg.kind not in KINDS:
        err(f"kind must be one of {KINDS}")
    if not cfg.anchor:
        err("anchor (figure/table id) is required")

    s = cfg.system
    if s.interaction not in INTERACTIONS:
        err(f"interaction must be one of {INTERACTIONS}")
    if s.n_qubits < 1:
        err("need at least one Larmor frequency")
    if any(w <= 0 for w in s.larmor):
        err("Larmor frequencies must be positive")
    if s.angular and any(w > 200 for w in s.larmor):
        warn("angular: true multiplies larmor by pi; values above 200 look pre-multiplied")
    try:
        s.build()
    except ValueError as exc:
        err(f"system: {exc}")

    nz = cfg.noise
    for attr in ("T1", "Tphi"):
        try:
            vals = nz.per_qubit(attr, s.n_qubits)
        except (ValueError, TypeError) as exc:
            err(f"noise.{attr}: {exc}")
            continue
        if any(v <= 0 for v in vals):
            err(f"noise.{attr} must be positive (null for no noise)")
    if nz.temperature < 0:
        err("temperature must be non-negative")
    if nz.collapse_basis not in ("eigen", "product"):
        err("collapse_basis must be 'eigen' or 'product'")
    if nz.boltzmann <= 0:
        err("boltzmann must be positive")

    p = cfg.pulse
    if p.kind not in PULSE_KINDS:
        err(f"pulse.kind must be one of {PULSE_KINDS}")
    if p.tau <= 0 or p.dt <= 0:
        err("pulse tau and dt must be positive")
    else:
        n = round(p.tau / p.dt)
        if abs(n * p.dt - p.tau) > 1e-9 * max(1.0, p.tau):
            err(f"dt={p.dt} does not divide tau={p.tau}")
        if p.kind == "flattop" and not 0 < 2 * p.rise() <= p.tau:
            err("flattop rise_time must satisfy 0 < 2*rise_time <= tau")
    if p.kind == "tones" and not p.tones:
        err("pulse.kind 'tones' needs a tones list")
    if p.kind == "synchronized" and s.n_qubits != 2:
        err("synchronized pulses are defined for two qubits only")

    o = cfg.optimizer
    if o.objective not in OBJECTIVES:
        err(f"optimizer.objective must be one of {OBJECTIVES}")
    if o.lambda_a <= 0 or o.seed_lambda_a <= 0:
        err("lambda_a must be positive")
    if o.iterations < 0 or o.seed_iterations < 0:
        err("iteration counts must be non-negative")
    if o.seed_policy not in SEED_POLICIES:
        err(f"seed_policy must be one of {SEED_POLICIES}")
    if o.normalization not in ("purity", "trace"):
        err("normalization must be 'purity' or 'trace'")
    if len(o.weights) != 3 or any(w < 0 for w in o.weights):
        err("weights must be three non-negative numbers")
    try:
        parse_target(o.target, s.n_qubits)
    except ValueError as exc:
        err(f"optimizer.target: {exc}")

    for block in cfg.sweep:
        if not isinstance(block, dict):
            err("each sweep block must be a mapping of axis -> values")
            continue
        for axis, values in block.items():
            if not isinstance(values, list) or not values:
                err(f"sweep axis {axis!r} needs a non-empty list")
                continue
            try:
                apply_override(copy.deepcopy(cfg), axis, values[0])
            except (ConfigError, ValueError, IndexError) as exc:
                err(str(exc))
            if axis.startswith(("T1", "Tphi")) and any(v is not None and v <= 0 for v in values):
                err(f"sweep axis {axis} has non-positive lifetimes")
    return out


def parse_target(target: str, n_qubits: int) -> tuple[str, tuple]:
    """``not:2`` -> ("not", (1,)), ``cnot:2,3`` -> ("cnot", (1, 2)), ``bell:phi+``."""
    kind, _, arg = target.partition(":")
    if kind == "not":
        q = int(arg) - 1
        if not 0 <= q < n_qubits:
            raise ValueError(f"qubit {arg} out of range")
        return kind, (q,)
    if kind == "cnot":
        c, t = (int(x) - 1 for x in arg.split(","))
        if not (0 <= c < n_qubits and 0 <= t < n_qubits) or c == t:
            raise ValueError(f"bad control/target {arg}")
        return kind, (c, t)
    if kind == "bell":
        if n_qubits != 2 or arg not in ("phi+", "phi-", "psi+", "psi-"):
            raise ValueError("bell targets are phi+/phi-/psi+/psi- on two qubits")
        return kind, (arg,)
    raise ValueError(f"unknown target {target!r}")
