"""First-order Krotov optimization of a single control field.

All functionals here are linear in the final states,

    J_T = 1 - sum_k c_k Re <target_k | x_k(T)>,

where x_k are kets (closed gate) or vectorized density matrices (state
transfer, open-system gate). The co-states start from
chi_k(T) = (c_k / 2) target_k, and the sequential update on interval n is

    du_n = S(t_n) / lambda_a * Im sum_k <chi_k(t_n)| mu |x_k(t_n)>,

using the already-updated forward states. mu = dH/du for kets and the
commutator superoperator [Hc, .] for density matrices.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .operators import dag, expm_hermitian, projector
from .propagate import commutator_superop, liouvillian, vec
from .pulses import SampledPulse, flattop
from .spin import SpinSystem

logger = logging.getLogger(__name__)


class NonMonotonicError(RuntimeError):
    """J_T increased between iterations; usually lambda_a is too small."""


# --- objectives -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GateObjective:
    """Closed-system gate: every basis ket must reach U_target |phi_k>.

    With traceless drift and control the evolution stays in SU(d), but a
    target such as CNOT has det = -1 and the phase-sensitive Re-overlap
    functional then cannot reach zero. ``special_unitary`` rescales the
    target by det^(-1/d) (a global phase, so the gate itself is unchanged).
    """

    target: np.ndarray
    basis: np.ndarray
    special_unitary: bool = True

    density = False

    def initial_states(self) -> np.ndarray:
        return self.basis.T.astype(complex)

    def targets(self) -> np.ndarray:
        u = np.asarray(self.target, dtype=complex)
        if self.special_unitary:
            u = u * np.linalg.det(u) ** (-1.0 / u.shape[0])
        return (u @ self.basis).T

    def coefficients(self) -> np.ndarray:
        n = self.basis.shape[1]
        return np.full(n, 1.0 / n)

    def fidelity(self, final: np.ndarray, targets: np.ndarray) -> float:
        d = self.basis.shape[0]
        overlap = np.sum(np.sum(final.conj() * targets, axis=1))
        return float((abs(overlap) ** 2 + d) / (d * (d + 1)))


@dataclass(frozen=True, eq=False)
class StateObjective:
    """Density-matrix transfer rho0 -> |target><target|; J_T = 1 - <target|rho(T)|target>."""

    rho0: np.ndarray
    target: np.ndarray

    density = True

    def initial_states(self) -> np.ndarray:
        rho0 = np.asarray(self.rho0, dtype=complex)
        if rho0.ndim == 1:
            rho0 = projector(rho0)
        return vec(rho0)[None, :]

    def targets(self) -> np.ndarray:
        return vec(projector(self.target))[None, :]

    def coefficients(self) -> np.ndarray:
        return np.ones(1)

    def fidelity(self, final: np.ndarray, targets: np.ndarray) -> float:
        return float(np.real(np.vdot(targets[0], final[0])))


def encoded_states(basis: np.ndarray) -> list[np.ndarray]:
    """Three density matrices that certify a gate on the span of ``basis``.

    rho1: diagonal, weights 2(d+1-i)/(d(d+1)); rho2: uniform full coherence
    (1/d) sum_ij |i><j|; rho3: identity / d.
    """
    d = basis.shape[1]
    p = np.array([2.0 * (d + 1 - i) / (d * (d + 1)) for i in range(1, d + 1)])
    rho1 = (basis * p) @ dag(basis)
    psi = basis.sum(axis=1) / np.sqrt(d)
    rho2 = np.outer(psi, psi.conj())
    rho3 = basis @ dag(basis) / d
    return [rho1, rho2, rho3]


@dataclass(frozen=True, eq=False)
class OpenGateObjective:
    """Gate under dissipation, certified on three encoded density matrices.

    J_T = 1 - sum_i w_i / n_i Re Tr[U rho_i(0) U^dag rho_i(T)] with weights
    normalized to sum 1. ``normalization="purity"`` uses n_i = Tr[rho_i(0)^2],
    which makes a perfect map score exactly zero; ``"trace"`` uses
    n_i = Tr[rho_i(0)] (= 1).
    """

    target: np.ndarray
    basis: np.ndarray
    weights: Sequence[float] = (20.0, 1.0, 1.0)
    normalization: str = "purity"

    density = True

    def __post_init__(self):
        if len(self.weights) != 3:
            raise ValueError("need exactly three weights")
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        if self.normalization not in ("purity", "trace"):
            raise ValueError("normalization must be 'purity' or 'trace'")

    def encoded(self) -> list[np.ndarray]:
        return encoded_states(self.basis)

    def initial_states(self) -> np.ndarray:
        return np.array([vec(r) for r in self.encoded()])

    def targets(self) -> np.ndarray:
        u = self.target
        return np.array([vec(u @ r @ dag(u)) for r in self.encoded()])

    def coefficients(self) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        w = w / w.sum()
        if self.normalization == "purity":
            norms = np.array([np.trace(r @ r).real for r in self.encoded()])
        else:
            norms = np.array([np.trace(r).real for r in self.encoded()])
        return w / norms

    def fidelity(self, final: np.ndarray, targets: np.ndarray) -> float:
        return 1.0 - functional(final, targets, self.coefficients())


def functional(final: np.ndarray, targets: np.ndarray, coefficients: np.ndarray) -> float:
    """1 - sum_k c_k Re <target_k|x_k>."""
    overlaps = np.sum(targets.conj() * final, axis=1)
    return float(1.0 - np.sum(coefficients * overlaps.real))


def gate_functional_closed(states_at_tau: np.ndarray, targets: np.ndarray) -> float:
    """1 - (1/N) Re sum_k <target_k|phi_k(tau)> for kets stacked as rows."""
    states_at_tau = np.atleast_2d(states_at_tau)
    n = len(states_at_tau)
    return functional(states_at_tau, np.atleast_2d(targets), np.full(n, 1.0 / n))


def open_functional(
    encoded_initial: Sequence[np.ndarray],
    encoded_final: Sequence[np.ndarray],
    U_target: np.ndarray,
    weights: Sequence[float],
    normalization: str = "purity",
) -> float:
    """Three-state open-system gate functional (see :class:`OpenGateObjective`)."""
    if len(encoded_initial) != len(weights) or len(encoded_final) != len(weights):
        raise ValueError("one weight per encoded state required")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    total = 0.0
    for wi, r0, rt in zip(w, encoded_initial, encoded_final):
        norm = np.trace(r0 @ r0).real if normalization == "purity" else np.trace(r0).real
        total += wi / norm * np.real(np.trace(U_target @ r0 @ dag(U_target) @ rt))
    return float(1.0 - total)


def state_to_state_functional(rho_final: np.ndarray, target: np.ndarray) -> float:
    return float(1.0 - np.real(np.conj(target) @ rho_final @ target))


# --- convergence ------------------------------------------------------------------


def convergence_monitor(trace: Sequence[float], tolerance: float) -> tuple[int, bool]:
    """(best_iteration, converged) for a J_T trace indexed by iteration.

    Converged at the first iteration i >= 1 with |J_i - J_{i-1}| < tolerance.
    Otherwise the best iteration is the earliest one within ``tolerance`` of
    the minimum.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.size == 0:
        raise ValueError("empty trace")
    steps = np.abs(np.diff(trace))
    hits = np.flatnonzero(steps < tolerance)
    if hits.size:
        return int(hits[0] + 1), True
    best = int(np.flatnonzero(trace <= trace.min() + tolerance)[0])
    return best, False


# --- problem / result ---------------------------------------------------------------


def default_update_shape(duration: float, dt: float, rise_time: float | None = None) -> SampledPulse:
    rise = duration / 10 if rise_time is None else rise_time
    return flattop(duration, 1.0, rise, dt)


@dataclass(eq=False)
class OptimizationProblem:
    system: SpinSystem
    objective: GateObjective | StateObjective | OpenGateObjective
    guess: SampledPulse
    lambda_a: float
    update_shape: SampledPulse | None = None
    max_iter: int = 100
    stop_tolerance: float | None = None
    collapse_ops: Sequence[np.ndarray] = ()
    control_op: np.ndarray | None = None
    on_nonmonotonic: str = "raise"  # "raise" | "stop" | "ignore"
    monotonic_slack: float = 1e-9

    def __post_init__(self):
        if self.lambda_a <= 0:
            raise ValueError("lambda_a must be positive")
        if self.update_shape is None:
            self.update_shape = default_update_shape(self.guess.duration, self.guess.dt)
        s = self.update_shape.samples
        if len(s) != len(self.guess.samples):
            raise ValueError("update shape must share the guess pulse grid")
        if abs(s[0]) > 1e-12 or abs(s[-1]) > 1e-12:
            raise ValueError("update shape must vanish at t = 0 and t = tau")
        if np.any(s < -1e-12) or np.any(s > 1 + 1e-12):
            raise ValueError("update shape must lie in [0, 1]")
        if self.stop_tolerance is None:
            self.stop_tolerance = 1e-3 if self.objective.density and self.collapse_ops else 1e-6
        if self.on_nonmonotonic not in ("raise", "stop", "ignore"):
            raise ValueError("on_nonmonotonic must be 'raise', 'stop' or 'ignore'")

    @property
    def control(self) -> np.ndarray:
        return self.system.control if self.control_op is None else self.control_op


@dataclass(eq=False)
class OptimizationResult:
    pulse: SampledPulse
    guess: SampledPulse
    J_T: list[float] = field(default_factory=list)
    fidelity: list[float] = field(default_factory=list)
    max_update: list[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    stop_reason: str = ""
    best_iteration: int = 0
    wall_time: float = 0.0
    final_states: list[np.ndarray] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "best_iteration": self.best_iteration,
            "wall_time_s": self.wall_time,
            "J_T": self.J_T,
            "fidelity": self.fidelity,
            "max_update": self.max_update,
        }


# --- propagation kernels -------------------------------------------------------------


class _KetDynamics:
    def __init__(self, H0: np.ndarray, Hc: np.ndarray, dt: float):
        self.H0, self.Hc, self.dt = H0, Hc, dt
        self.mu = Hc

    def step(self, u: float) -> np.ndarray:
        return expm_hermitian(self.H0 + u * self.Hc, -1j * self.dt)

    def all_steps(self, u: np.ndarray) -> np.ndarray:
        return expm_hermitian(self.H0[None] + u[:, None, None] * self.Hc[None], -1j * self.dt)


class _DensityDynamics:
    def __init__(self, H0: np.ndarray, Hc: np.ndarray, c_ops: Sequence[np.ndarray], dt: float):
        self.dt = dt
        self.L0 = liouvillian(H0, list(c_ops)) * dt
        self.mu = commutator_superop(Hc)
        self.Lc = -1j * self.mu * dt

    def step(self, u: float) -> np.ndarray:
        return scipy.linalg.expm(self.L0 + u * self.Lc)

    def all_steps(self, u: np.ndarray) -> np.ndarray:
        return np.array([self.step(x) for x in u])


def _dynamics(problem: OptimizationProblem):
    H0 = problem.system.drift
    Hc = problem.control
    dt = problem.guess.dt
    if problem.objective.density:
        return _DensityDynamics(H0, Hc, problem.collapse_ops, dt)
    if len(problem.collapse_ops):
        raise ValueError("collapse operators need a density-matrix objective")
    return _KetDynamics(H0, Hc, dt)


def forward_final(problem: OptimizationProblem, pulse: SampledPulse | None = None) -> np.ndarray:
    """Final states for ``pulse`` (default: the guess), rows as in the objective."""
    dyn = _dynamics(problem)
    u = (pulse or problem.guess).samples
    x = problem.objective.initial_states()
    for p in dyn.all_steps(u[:-1]):
        x = x @ p.T
    return x


def evaluate(problem: OptimizationProblem, pulse: SampledPulse) -> tuple[float, float]:
    """(J_T, fidelity) of ``pulse`` from a fresh forward propagation."""
    obj = problem.objective
    final = forward_final(problem, pulse)
    targets = obj.targets()
    return functional(final, targets, obj.coefficients()), obj.fidelity(final, targets)


def optimize(
    problem: OptimizationProblem,
    callback: Callable[[int, float, float], None] | None = None,
    store_final_states: bool = False,
) -> OptimizationResult:
    """Run sequential first-order Krotov iterations until converged or max_iter.

    With ``store_final_states`` the propagated states at tau of every
    iteration (rows as in the objective) are kept in ``final_states``.
    """
    t0 = time.perf_counter()
    obj = problem.objective
    dyn = _dynamics(problem)
    x0 = obj.initial_states()
    targets = obj.targets()
    coeffs = obj.coefficients()
    chi_T = 0.5 * coeffs[:, None] * targets
    u = problem.guess.samples.copy()
    n_steps = len(u) - 1
    shape = problem.update_shape.samples
    mu_t = dyn.mu.T

    props = dyn.all_steps(u[:-1])
    x = x0
    for p in props:
        x = x @ p.T
    result = OptimizationResult(pulse=problem.guess, guess=problem.guess)
    result.J_T.append(functional(x, targets, coeffs))
    result.fidelity.append(obj.fidelity(x, targets))
    result.max_update.append(0.0)
    if store_final_states:
        result.final_states.append(x.copy())
    if callback:
        callback(0, result.J_T[0], result.fidelity[0])

    chi = np.empty((n_steps,) + chi_T.shape, dtype=complex)
    stop_reason = "max_iter"
    for it in range(1, problem.max_iter + 1):
        c = chi_T
        for n in range(n_steps - 1, -1, -1):
            c = c @ props[n].conj()
            chi[n] = c
        u_new = u.copy()
        x = x0.copy()
        max_du = 0.0
        for n in range(n_steps):
            if shape[n] != 0.0:
                grad = np.sum(chi[n].conj() * (x @ mu_t)).imag
                du = shape[n] / problem.lambda_a * grad
                u_new[n] += du
                max_du = max(max_du, abs(du))
            p = dyn.step(u_new[n])
            props[n] = p
            x = x @ p.T
        j_new = functional(x, targets, coeffs)
        f_new = obj.fidelity(x, targets)
        j_old = result.J_T[-1]
        u = u_new
        result.J_T.append(j_new)
        result.fidelity.append(f_new)
        result.max_update.append(max_du)
        result.iterations_run = it
        if store_final_states:
            result.final_states.append(x.copy())
        if callback:
            callback(it, j_new, f_new)
        if j_new > j_old + problem.monotonic_slack:
            msg = f"J_T increased at iteration {it}: {j_old:.3e} -> {j_new:.3e}"
            if problem.on_nonmonotonic == "raise":
                raise NonMonotonicError(msg)
            if problem.on_nonmonotonic == "stop":
                logger.warning(msg)
                stop_reason = "non_monotonic"
                break
        if abs(j_new - j_old) < problem.stop_tolerance:
            stop_reason = "converged"
            break
    result.pulse = problem.guess.with_samples(u)
    result.stop_reason = stop_reason
    result.best_iteration, result.converged = convergence_monitor(result.J_T, problem.stop_tolerance)
    result.wall_time = time.perf_counter() - t0
    return result
