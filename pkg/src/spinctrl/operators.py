"""Dense complex-matrix helpers for few-qubit systems.

Operators are plain ``numpy`` arrays. Functions that need the tensor
structure take ``dims``, the list of local dimensions (all 2 for qubits),
ordered with qubit 1 as the leftmost (most significant) factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.linalg

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
# |0> is spin-up, the lower Zeeman level under -w S^z.
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|, raises energy
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, lowers energy

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and column eigenvectors of a Hermitian matrix."""

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.energies)

    def to_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ op @ self.vectors

    def from_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors @ op @ self.vectors.conj().T


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product of the given operators, left factor most significant."""
    if not ops:
        raise ValueError("kron needs at least one operator")
    return reduce(np.kron, ops)


def embed_single_site(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Place a 2x2 operator on ``site`` with identities elsewhere."""
    if not 0 <= site < n_sites:
        raise IndexError(f"site {site} out of range for {n_sites} sites")
    factors = [IDENTITY_2] * n_sites
    factors[site] = np.asarray(op, dtype=complex)
    return kron(*factors)


def partial_trace(rho: np.ndarray, keep: Sequence[int], dims: Sequence[int] | None = None) -> np.ndarray:
    """Reduced operator on the subsystems listed in ``keep``.

    The kept subsystems appear in ascending order regardless of the order in
    ``keep``.
    """
    rho = np.asarray(rho)
    if dims is None:
        n = int(round(np.log2(rho.shape[0])))
        if 2**n != rho.shape[0]:
            raise ValueError("dims required for non-qubit operators")
        dims = [2] * n
    dims = list(dims)
    n = len(dims)
    if rho.shape != (int(np.prod(dims)),) * 2:
        raise ValueError(f"operator shape {rho.shape} does not match dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"invalid subsystem indices {keep} for {n} subsystems")
    traced = [k for k in range(n) if k not in keep]
    t = rho.reshape(dims + dims)
    # trace out from the highest index down so remaining axis numbers stay valid
    for k in reversed(traced):
        m = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + m)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximant)."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("expm argument has non-finite entries")
    return scipy.linalg.expm(a)


def expm_hermitian(h: np.ndarray, factor: complex) -> np.ndarray:
    """``exp(factor * h)`` for Hermitian ``h`` via its eigendecomposition.

    Also accepts a stack of matrices with shape ``(..., d, d)``.
    """
    e, v = np.linalg.eigh(h)
    return (v * np.exp(factor * e)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # Make the largest-magnitude component of every column real-positive
    # (earliest index wins ties), so hybridized states continue smoothly into
    # the product states they reduce to at zero coupling.
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        k = int(np.argmax(mags > mags.max() * (1 - 1e-9)))
        out[:, j] = col * (abs(col[k]) / col[k])
    return out


def eigh(h: np.ndarray, tol: float = 1e-10) -> EigenDecomposition:
    """Hermitian eigendecomposition with ascending energies and fixed phases."""
    h = np.asarray(h)
    if np.max(np.abs(h - dag(h)), initial=0.0) > tol:
        raise ValueError("eigh requires a Hermitian matrix")
    energies, vectors = np.linalg.eigh(h)
    return EigenDecomposition(energies=energies, vectors=_fix_phases(vectors))


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(a - dag(a)), initial=0.0) <= tol)


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(dag(u) @ u - np.eye(u.shape[0]))) <= tol)


def is_positive(rho: np.ndarray, tol: float = 1e-10) -> bool:
    return is_hermitian(rho, tol) and float(np.linalg.eigvalsh((rho + dag(rho)) / 2).min()) >= -tol


def ket(label: str | Sequence[int]) -> np.ndarray:
    """Product-basis state vector from a bit string such as ``"01"``."""
    bits = [int(b) for b in label]
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(map(str, bits)), 2) if bits else 0] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = (a - b + dag(a - b)) / 2
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
