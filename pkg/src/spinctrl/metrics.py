"""Figures of merit: gate fidelities, state fidelity, concurrence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .operators import SIGMA_Y, dag, expm_hermitian, kron, projector
from .spin import SpinSystem

NOT_2 = kron(np.eye(2), np.array([[0, 1], [1, 0]])).astype(complex)
CNOT_12 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def controlled_not(control: int, target: int, n_qubits: int) -> np.ndarray:
    """CNOT as a permutation of computational labels (qubit 0 leftmost)."""
    d = 2**n_qubits
    out = np.zeros((d, d), dtype=complex)
    for b in range(d):
        bits = [(b >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)]
        if bits[control]:
            bits[target] ^= 1
        out[int("".join(map(str, bits)), 2), b] = 1.0
    return out


def not_gate(qubit: int, n_qubits: int) -> np.ndarray:
    factors = [np.eye(2)] * n_qubits
    factors[qubit] = np.array([[0, 1], [1, 0]])
    return kron(*factors).astype(complex)


def lab_frame_target(gate: np.ndarray, sys: SpinSystem, t: float) -> np.ndarray:
    """Gate on eigenstate labels, dressed with the drift phase of each output.

    ``gate`` is written in computational labels; e.g. NOT on qubit 2 maps the
    eigenstate labelled 00 to the one labelled 01. The result is
    exp(-i H0 t) W gate W^dagger, so every outgoing eigenstate carries
    exp(-i E_out t).
    """
    w = sys.label_basis
    static = w @ gate @ dag(w)
    if t == 0:
        return static
    return expm_hermitian(sys.drift, -1j * t) @ static


def closed_gate_fidelity(U: np.ndarray, U_target: np.ndarray) -> float:
    """(|Tr(U^dagger U_target)|^2 + d) / (d (d + 1))."""
    if U.shape != U_target.shape:
        raise ValueError(f"dimension mismatch {U.shape} vs {U_target.shape}")
    d = U.shape[0]
    overlap = np.trace(dag(U) @ U_target)
    return float((abs(overlap) ** 2 + d) / (d * (d + 1)))


def fidelity_trace(us: np.ndarray, gate: np.ndarray, sys: SpinSystem, times: np.ndarray) -> np.ndarray:
    """Closed gate fidelity of U(t_n) against the lab-frame target at each t_n."""
    w = sys.label_basis
    static = w @ gate @ dag(w)
    e, v = np.linalg.eigh(sys.drift)
    # Tr(U^dag exp(-iH0 t) G) = sum_k exp(-i e_k t) (v^dag G U^dag v)_kk
    g_in_eig = dag(v) @ static
    diag = np.einsum("ka,tab,bk->tk", g_in_eig, np.swapaxes(us.conj(), -1, -2), v)
    overlaps = np.sum(np.exp(-1j * np.outer(times, e)) * diag, axis=1)
    d = us.shape[-1]
    return (np.abs(overlaps) ** 2 + d) / (d * (d + 1))


@dataclass(frozen=True, eq=False)
class FidelityBreakdown:
    f_avg: float
    f_coh: complex
    f_dia: float
    coherent: np.ndarray  # (i, j): <phi_i|U^dag rho_ij U|phi_j>
    diagonal: np.ndarray  # (i, j): <phi_i|U^dag rho_jj U|phi_i>

    def to_json(self, path: str | Path | None = None, labels: list[str] | None = None) -> str:
        payload = {
            "f_avg": self.f_avg,
            "f_coh": [self.f_coh.real, self.f_coh.imag],
            "f_dia": self.f_dia,
            "labels": labels,
            "coherent_real": self.coherent.real.tolist(),
            "coherent_imag": self.coherent.imag.tolist(),
            "diagonal": self.diagonal.tolist(),
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def average_gate_fidelity(outputs: np.ndarray, U_target: np.ndarray, basis: np.ndarray | None = None) -> FidelityBreakdown:
    """Coherent/diagonal decomposition of the average gate fidelity.

    Args:
        outputs: array (N, N, d, d) with outputs[i, j] = E(|phi_i><phi_j|).
        U_target: target unitary in the physical basis.
        basis: columns |phi_i>; defaults to the computational basis.
    """
    outputs = np.asarray(outputs)
    n = outputs.shape[0]
    if outputs.shape[:2] != (n, n) or outputs.shape[2] != U_target.shape[0]:
        raise ValueError("outputs must have shape (N, N, d, d) matching the target")
    if basis is None:
        basis = np.eye(n, dtype=complex)
    tb = U_target @ basis  # column i: U|phi_i>
    # m[i, j, a, b] = <phi_a|U^dag rho_ij U|phi_b>
    m = np.einsum("ka,ijkl,lb->ijab", tb.conj(), outputs, tb)
    idx = np.arange(n)
    coherent = m[idx[:, None], idx[None, :], idx[:, None], idx[None, :]]
    # diagonal[i, j] = <phi_i|U^dag rho_jj U|phi_i>
    diagonal = m[idx, idx][:, idx, idx].T.real
    f_coh = complex(coherent.sum())
    f_dia = float(diagonal.sum())
    f_avg = (f_coh.real + f_dia) / (n * (n + 1))
    return FidelityBreakdown(float(f_avg), f_coh, f_dia, coherent, diagonal)


def liouville_basis_outputs(channel: Callable[[np.ndarray], np.ndarray], basis: np.ndarray) -> np.ndarray:
    """E(|phi_i><phi_j|) for all i, j using only density-matrix inputs.

    Off-diagonal elements follow from linearity:
    |i><j| = P(i+j) + i P(i+ij) - (1+i)/2 (P(i) + P(j)).
    """
    n = basis.shape[1]
    d = basis.shape[0]
    diag = [channel(projector(basis[:, i])) for i in range(n)]
    out = np.empty((n, n, d, d), dtype=complex)
    for i in range(n):
        out[i, i] = diag[i]
        for j in range(i + 1, n):
            plus = channel(projector((basis[:, i] + basis[:, j]) / np.sqrt(2)))
            plus_i = channel(projector((basis[:, i] + 1j * basis[:, j]) / np.sqrt(2)))
            out[i, j] = plus + 1j * plus_i - (1 + 1j) / 2 * (diag[i] + diag[j])
            out[j, i] = dag(out[i, j])  # E is Hermiticity preserving
    return out


def outputs_from_superoperator(sup: np.ndarray, basis: np.ndarray) -> np.ndarray:
    d = basis.shape[0]
    n = basis.shape[1]
    # vec(|i><j|) row-major = kron(phi_i, conj(phi_j))
    ins = np.einsum("ai,bj->ijab", basis, basis.conj()).reshape(n, n, d * d)
    return (ins @ sup.T).reshape(n, n, d, d)


def state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """<psi|rho|psi> (rho may also be a ket)."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        return float(abs(np.vdot(psi, rho)) ** 2)
    return float(np.real(psi.conj() @ rho @ psi))


def _psd_sqrt(a: np.ndarray, clamp: float = 1e-9) -> np.ndarray:
    e, v = np.linalg.eigh((a + dag(a)) / 2)
    if e.min() < -clamp:
        raise ValueError(f"matrix not positive semidefinite (min eigenvalue {e.min():.3g})")
    # round-off eigenvalues of a rank-deficient state would otherwise become O(1e-8) after the root
    e = np.where(e > 1e-14 * max(e.max(), 1.0), e, 0.0)
    return (v * np.sqrt(e)) @ dag(v)


def concurrence(rho: np.ndarray, basis: np.ndarray | SpinSystem | None = None) -> float:
    """Wootters concurrence, with the spin flip taken in ``basis``.

    ``basis`` holds the logical states as columns (or a SpinSystem, whose
    labelled eigenstates are used); ``None`` means the product basis.
    The eigenvalues of R = sqrt(sqrt(rho) rho~ sqrt(rho)) are computed as the
    singular values of sqrt(rho) sqrt(rho~), which avoids a second root.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = projector(rho)
    if rho.shape != (4, 4):
        raise ValueError("concurrence needs a two-qubit density matrix")
    if isinstance(basis, SpinSystem):
        basis = basis.label_basis
    if basis is not None:
        rho = dag(basis) @ rho @ basis
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    sq = _psd_sqrt(rho)
    sq_tilde = yy @ sq.conj() @ yy
    lam = np.linalg.svd(sq @ sq_tilde, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity_concurrence_bound(f: float, c: float, slack: float = 1e-9) -> bool:
    """True when F <= (1 + C) / 2 (+ slack)."""
    return f <= (1 + c) / 2 + slack


def bell_states(sys: SpinSystem | None = None) -> dict[str, np.ndarray]:
    """The four Bell states on (dressed) two-qubit basis states."""
    w = np.eye(4, dtype=complex) if sys is None else sys.label_basis
    s = 1 / np.sqrt(2)
    return {
        "phi+": s * (w[:, 0] + w[:, 3]),
        "phi-": s * (w[:, 0] - w[:, 3]),
        "psi+": s * (w[:, 1] + w[:, 2]),
        "psi-": s * (w[:, 1] - w[:, 2]),
    }
