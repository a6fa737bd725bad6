"""Closed and open time evolution under a piecewise-constant control.

The control enters as H(t) = H0 + u(t) Hc with u held at ``samples[n]`` over
[t_n, t_n + dt). Density matrices are vectorized row-major, so
vec(A rho B) = (A kron B^T) vec(rho).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.special import expit

from .operators import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    embed_single_site,
    expm_hermitian,
    partial_trace,
)
from .spin import BOLTZMANN, SpinSystem, dominant_transition_energy

logger = logging.getLogger(__name__)


def _samples(pulse) -> np.ndarray:
    s = np.asarray(getattr(pulse, "samples", pulse), dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("pulse samples must be finite")
    return s


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a time grid; ``states`` holds kets (n, d) or density matrices (n, d, d)."""

    times: np.ndarray
    states: np.ndarray
    frame: str = "lab"

    @property
    def is_density(self) -> bool:
        return self.states.ndim == 3

    def density_matrices(self) -> np.ndarray:
        if self.is_density:
            return self.states
        return np.einsum("ti,tj->tij", self.states, self.states.conj())

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# --- closed systems -----------------------------------------------------------


def step_unitaries(H0: np.ndarray, Hc: np.ndarray, samples: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i (H0 + u_n Hc) dt) for every propagation interval, shape (N, d, d)."""
    u = _samples(samples)[:-1]
    hs = H0[None, :, :] + u[:, None, None] * Hc[None, :, :]
    return expm_hermitian(hs, -1j * dt)


def trotter_propagator(H0, Hc, pulse, dt: float | None = None, store: bool = False):
    """U(tau) = prod_n exp(-i H(t_n) dt).

    With ``store=True`` returns (times, U(t_n) for n = 0..N) instead.
    """
    dt = getattr(pulse, "dt", dt) if dt is None else dt
    if dt is None or dt <= 0:
        raise ValueError("dt must be positive")
    steps = step_unitaries(np.asarray(H0), np.asarray(Hc), pulse, dt)
    d = steps.shape[-1]
    u = np.eye(d, dtype=complex)
    if not store:
        for s in steps:
            u = s @ u
        return u
    out = np.empty((len(steps) + 1, d, d), dtype=complex)
    out[0] = u
    for n, s in enumerate(steps):
        u = s @ u
        out[n + 1] = u
    return np.arange(len(out)) * dt, out


def propagate_ket(H0, Hc, pulse, psi0, dt: float | None = None) -> Trajectory:
    dt = getattr(pulse, "dt", dt) if dt is None else dt
    steps = step_unitaries(np.asarray(H0), np.asarray(Hc), pulse, dt)
    psi = np.asarray(psi0, dtype=complex)
    out = np.empty((len(steps) + 1, len(psi)), dtype=complex)
    out[0] = psi
    for n, s in enumerate(steps):
        psi = s @ psi
        out[n + 1] = psi
    return Trajectory(np.arange(len(out)) * dt, out)


# --- collapse operators -------------------------------------------------------


@dataclass(frozen=True)
class CollapseChannel:
    """Relaxation (T1) or pure dephasing (T_phi) acting on one qubit.

    ``time`` may be ``np.inf`` (channel switched off). ``transition_energy``
    defaults to the qubit's flip energy out of the ground state.
    """

    qubit: int
    kind: str
    time: float
    transition_energy: float | None = None
    temperature: float = 0.0

    def __post_init__(self):
        if self.kind not in ("relaxation", "dephasing"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not self.time > 0:
            raise ValueError("T1 / T_phi must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


def relaxation_rates(T1: float, transition_energy: float, temperature: float, kb: float = BOLTZMANN) -> tuple[float, float]:
    """(Gamma_up, Gamma_down) with Gamma_up + Gamma_down = 1/T1 and Boltzmann balance."""
    total = 0.0 if np.isinf(T1) else 1.0 / T1
    if temperature == 0:
        frac_up = 0.0
    else:
        frac_up = float(expit(-transition_energy / (kb * temperature)))
    return total * frac_up, total * (1.0 - frac_up)


def build_collapse_operators(
    channels: Sequence[CollapseChannel],
    sys: SpinSystem,
    basis: str = "eigen",
    kb: float = BOLTZMANN,
) -> list[np.ndarray]:
    """L_relax = sqrt(G+) s+ + sqrt(G-) s-, L_dephase = sqrt(1/(2 T_phi)) s_z.

    ``basis="eigen"`` conjugates each operator with the label basis so it acts
    on dressed eigenstates instead of bare product states. There, unless a
    channel fixes ``transition_energy``, every transition of the qubit gets
    the up/down split of its own energy gap (exact detailed balance).
    """
    if basis not in ("eigen", "product"):
        raise ValueError("basis must be 'eigen' or 'product'")
    n = sys.n_qubits
    ops = []
    for ch in channels:
        if not 0 <= ch.qubit < n:
            raise IndexError(f"qubit {ch.qubit} out of range")
        if np.isinf(ch.time):
            continue
        if ch.kind == "relaxation" and basis == "eigen" and ch.transition_energy is None:
            op = _resolved_relaxation(sys, ch, kb)
        elif ch.kind == "relaxation":
            de = ch.transition_energy
            if de is None:
                de = dominant_transition_energy(sys, ch.qubit)
            g_up, g_down = relaxation_rates(ch.time, de, ch.temperature, kb)
            local = np.sqrt(g_up) * SIGMA_PLUS + np.sqrt(g_down) * SIGMA_MINUS
            op = embed_single_site(local, ch.qubit, n)
        else:
            op = embed_single_site(np.sqrt(1.0 / (2.0 * ch.time)) * SIGMA_Z, ch.qubit, n)
        if basis == "eigen":
            w = sys.label_basis
            op = w @ op @ w.conj().T
        ops.append(op)
    return ops


def _resolved_relaxation(sys: SpinSystem, ch: CollapseChannel, kb: float) -> np.ndarray:
    """Flip operator of one qubit in label space, each transition weighted by its own energy.

    Every pair (bit k = 0, bit k = 1) relaxes at total rate 1/T1 with the
    Boltzmann up/down split of that pair's energy gap, so the undriven
    evolution thermalizes exactly to exp(-H0 / k_B T) / Z. Returned in
    label space; the caller conjugates with the label basis.
    """
    n = sys.n_qubits
    e = sys.label_energies
    op = np.zeros((sys.dim, sys.dim), dtype=complex)
    bit = 1 << (n - 1 - ch.qubit)
    for lower in range(sys.dim):
        if lower & bit:
            continue
        upper = lower | bit
        g_up, g_down = relaxation_rates(ch.time, e[upper] - e[lower], ch.temperature, kb)
        op[lower, upper] = np.sqrt(g_down)
        op[upper, lower] = np.sqrt(g_up)
    return op


def noise_channels(
    n_qubits: int,
    T1: Sequence[float] | float = np.inf,
    Tphi: Sequence[float] | float = np.inf,
    temperature: float = 0.0,
    transition_energies: Sequence[float | None] | None = None,
) -> list[CollapseChannel]:
    T1 = np.broadcast_to(np.asarray(T1, dtype=float), (n_qubits,))
    Tphi = np.broadcast_to(np.asarray(Tphi, dtype=float), (n_qubits,))
    energies = transition_energies or [None] * n_qubits
    out = []
    for k in range(n_qubits):
        out.append(CollapseChannel(k, "relaxation", float(T1[k]), energies[k], temperature))
        out.append(CollapseChannel(k, "dephasing", float(Tphi[k]), None, temperature))
    return out


# --- Liouville space ------------------------------------------------------------


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Matrix of rho -> [h, rho] on row-major vec(rho)."""
    d = h.shape[0]
    eye = np.eye(d)
    return np.kron(h, eye) - np.kron(eye, h.T)


def dissipator(c_ops: Sequence[np.ndarray], d: int) -> np.ndarray:
    eye = np.eye(d)
    out = np.zeros((d * d, d * d), dtype=complex)
    for L in c_ops:
        ldl = L.conj().T @ L
        out += np.kron(L, L.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
    return out


def liouvillian(H: np.ndarray, c_ops: Sequence[np.ndarray] = ()) -> np.ndarray:
    return -1j * commutator_superop(H) + dissipator(c_ops, H.shape[0])


def vec(rho: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(rho).reshape(-1)


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[-1])))
    return v.reshape(v.shape[:-1] + (d, d))


class LindbladStepper:
    """Exact exponentials exp((L0 + u Lc) dt) of the piecewise-constant generator."""

    def __init__(self, H0: np.ndarray, Hc: np.ndarray, c_ops: Sequence[np.ndarray], dt: float):
        self.d = H0.shape[0]
        self.dt = dt
        self.L0 = liouvillian(np.asarray(H0), list(c_ops))
        self.Lc = -1j * commutator_superop(np.asarray(Hc))

    def __call__(self, u: float) -> np.ndarray:
        return scipy.linalg.expm((self.L0 + u * self.Lc) * self.dt)


def lindblad_propagate(
    H0,
    Hc,
    pulse,
    c_ops: Sequence[np.ndarray],
    rho0: np.ndarray,
    dt: float | None = None,
    method: str = "expm",
    rtol: float = 1e-6,
    atol: float = 1e-8,
    store: bool = True,
) -> Trajectory:
    """Integrate the GKSL master equation on the pulse grid.

    ``method="expm"`` (deterministic, default) multiplies exact per-interval
    exponentials of the Liouvillian. ``method="adaptive"`` integrates each
    interval with DOP853 at the given tolerances.
    """
    dt = getattr(pulse, "dt", dt) if dt is None else dt
    u = _samples(pulse)
    H0, Hc = np.asarray(H0, dtype=complex), np.asarray(Hc, dtype=complex)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    d = H0.shape[0]
    n = len(u) - 1
    x = vec(rho0).copy()
    states = np.empty((n + 1 if store else 1, d * d), dtype=complex)
    states[0] = x
    if method == "expm":
        step = LindbladStepper(H0, Hc, c_ops, dt)
        for k in range(n):
            x = step(u[k]) @ x
            if store:
                states[k + 1] = x
    elif method == "adaptive":
        L0 = liouvillian(H0, list(c_ops))
        Lc = -1j * commutator_superop(Hc)
        for k in range(n):
            gen = L0 + u[k] * Lc
            sol = solve_ivp(lambda t, y: gen @ y, (0.0, dt), x, method="DOP853", rtol=rtol, atol=atol)
            if not sol.success:
                raise RuntimeError(f"integrator failed at step {k}: {sol.message}")
            x = sol.y[:, -1]
            if store:
                states[k + 1] = x
    else:
        raise ValueError(f"unknown method {method!r}")
    if not store:
        states[0] = x
        return Trajectory(np.array([n * dt]), unvec(states))
    return Trajectory(np.arange(n + 1) * dt, unvec(states))


def process_superoperator(H0, Hc, pulse, c_ops: Sequence[np.ndarray], dt: float | None = None) -> np.ndarray:
    """Superoperator of the whole evolution, acting on row-major vec(rho)."""
    dt = getattr(pulse, "dt", dt) if dt is None else dt
    u = _samples(pulse)
    step = LindbladStepper(np.asarray(H0, dtype=complex), np.asarray(Hc, dtype=complex), c_ops, dt)
    total = np.eye(step.d**2, dtype=complex)
    for k in range(len(u) - 1):
        total = step(u[k]) @ total
    return total


def apply_superoperator(sup: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(sup @ vec(rho))


# --- frames and observables -------------------------------------------------------


def to_interaction_picture(traj: Trajectory, H0: np.ndarray) -> Trajectory:
    """rho_I(t) = exp(i H0 t) rho(t) exp(-i H0 t) (kets: exp(i H0 t) psi)."""
    e, v = np.linalg.eigh(H0)
    phases = np.exp(1j * np.outer(traj.times, e))  # (n, d)
    us = np.einsum("ij,tj,kj->tik", v, phases, v.conj())
    if traj.is_density:
        states = us @ traj.states @ np.swapaxes(us.conj(), -1, -2)
    else:
        states = np.einsum("tij,tj->ti", us, traj.states)
    frame = "interaction" if traj.frame == "lab" else "lab"
    return Trajectory(traj.times, states, frame)


def bloch_vector(traj: Trajectory, qubit: int, n_qubits: int | None = None) -> np.ndarray:
    """(n_times, 3) expectation values of sigma^x, sigma^y, sigma^z on one qubit."""
    rhos = traj.density_matrices()
    d = rhos.shape[-1]
    n = n_qubits or int(round(np.log2(d)))
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range")
    out = np.empty((len(rhos), 3))
    for t, rho in enumerate(rhos):
        r = partial_trace(rho, [qubit], [2] * n)
        out[t] = [np.trace(p @ r).real for p in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    return out


def trajectory_diagnostics(traj: Trajectory) -> dict[str, float]:
    """Worst trace, Hermiticity and positivity deviations along a trajectory."""
    rhos = traj.density_matrices()
    tr = np.abs(np.trace(rhos, axis1=1, axis2=2) - 1).max()
    herm = np.abs(rhos - np.swapaxes(rhos.conj(), -1, -2)).max()
    min_eig = np.linalg.eigvalsh((rhos + np.swapaxes(rhos.conj(), -1, -2)) / 2).min()
    return {"trace_error": float(tr), "hermiticity_error": float(herm), "min_eigenvalue": float(min_eig)}
