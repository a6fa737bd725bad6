"""Exchange-coupled spin-1/2 qubits: drift and control Hamiltonians.

Units: hbar = 1, times in ns, frequencies and energies in rad/ns. Literature-style
values such as "20 pi GHz" are stored as the angular number 20*pi; couplings
quoted in GHz enter the Hamiltonian unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.optimize import linear_sum_assignment

from .operators import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    EigenDecomposition,
    eigh,
    embed_single_site,
)

# Boltzmann constant in Hamiltonian units per kelvin. This is k_B/h = 20.837
# GHz/K applied directly to the Hamiltonian entries, which is the convention
# that reproduces the reported thermal Bell-state fidelities.
BOLTZMANN = 20.837
# The strictly angular alternative, k_B/hbar in rad/ns per kelvin.
BOLTZMANN_ANGULAR = 2 * np.pi * 20.837

INTERACTIONS = ("heisenberg", "ising")


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """N spin-1/2 qubits with Zeeman splittings and static exchange.

    Attributes:
        larmor: Larmor frequencies, one per qubit (rad/ns).
        coupling: symmetric exchange matrix with zero diagonal (rad/ns).
        interaction: ``"heisenberg"`` (S_i . S_j) or ``"ising"`` (S_i^z S_j^z).
    """

    larmor: np.ndarray
    coupling: np.ndarray
    interaction: str = "heisenberg"

    def __post_init__(self):
        larmor = np.atleast_1d(np.asarray(self.larmor, dtype=float))
        n = len(larmor)
        if n < 1:
            raise ValueError("need at least one qubit")
        coupling = np.zeros((n, n)) if self.coupling is None else np.asarray(self.coupling, dtype=float)
        if coupling.shape != (n, n):
            raise ValueError(f"coupling must be {n}x{n}, got {coupling.shape}")
        if not np.allclose(coupling, coupling.T, atol=1e-12):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.abs(np.diag(coupling)) > 0):
            raise ValueError("coupling matrix must have zero diagonal")
        if self.interaction not in INTERACTIONS:
            raise ValueError(f"interaction must be one of {INTERACTIONS}")
        object.__setattr__(self, "larmor", larmor)
        object.__setattr__(self, "coupling", coupling)

    @classmethod
    def two_qubit(cls, omega1: float, omega2: float, J: float, interaction: str = "heisenberg") -> "SpinSystem":
        return cls(np.array([omega1, omega2]), np.array([[0.0, J], [J, 0.0]]), interaction)

    @property
    def n_qubits(self) -> int:
        return len(self.larmor)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def dims(self) -> list[int]:
        return [2] * self.n_qubits

    @cached_property
    def drift(self) -> np.ndarray:
        return drift_hamiltonian(self)

    @cached_property
    def control(self) -> np.ndarray:
        """Drive coupling sum_i sigma_i^x."""
        return sum(embed_single_site(SIGMA_X, i, self.n_qubits) for i in range(self.n_qubits))

    @cached_property
    def eigen(self) -> EigenDecomposition:
        return eigh(self.drift)

    @cached_property
    def labels(self) -> list[tuple[int, ...]]:
        """Computational label of each eigenvector (in ascending-energy order)."""
        return eigen_labels(self.eigen, self.n_qubits)

    @cached_property
    def label_basis(self) -> np.ndarray:
        """Unitary whose column b is the eigenstate carrying computational label b.

        Conjugating a product-basis operator with this matrix expresses the
        same action on dressed eigenstates (e.g. sigma^- on a hybridized qubit).
        """
        w = np.zeros((self.dim, self.dim), dtype=complex)
        for col, lab in enumerate(self.labels):
            w[:, _label_index(lab)] = self.eigen.vectors[:, col]
        return w

    @cached_property
    def label_energies(self) -> np.ndarray:
        """Eigenenergies indexed by computational label."""
        e = np.zeros(self.dim)
        for col, lab in enumerate(self.labels):
            e[_label_index(lab)] = self.eigen.energies[col]
        return e

    def eigenstate(self, label: str) -> np.ndarray:
        return self.label_basis[:, int(label, 2)].copy()


def _label_index(label: tuple[int, ...]) -> int:
    return int("".join(str(b) for b in label), 2)


def spin_operators(n_qubits: int) -> dict[str, list[np.ndarray]]:
    """S_i^alpha = sigma_i^alpha / 2 for every qubit."""
    return {
        a: [embed_single_site(p / 2, i, n_qubits) for i in range(n_qubits)]
        for a, p in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z))
    }


def drift_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """-sum_i w_i S_i^z + sum_{j>i} J_ij (S_i . S_j  or  S_i^z S_j^z)."""
    n = sys.n_qubits
    s = spin_operators(n)
    h = np.zeros((sys.dim, sys.dim), dtype=complex)
    for i in range(n):
        h -= sys.larmor[i] * s["z"][i]
    axes = ("x", "y", "z") if sys.interaction == "heisenberg" else ("z",)
    for i in range(n):
        for j in range(i + 1, n):
            if sys.coupling[i, j] == 0:
                continue
            for a in axes:
                h += sys.coupling[i, j] * (s[a][i] @ s[a][j])
    return h


def eigen_labels(eig: EigenDecomposition, n_qubits: int) -> list[tuple[int, ...]]:
    """Assign each eigenvector the product state it overlaps most with."""
    weights = np.abs(eig.vectors) ** 2  # rows: product states, cols: eigenvectors
    rows, cols = linear_sum_assignment(-weights)
    labels: list[tuple[int, ...]] = [()] * eig.dim
    basis = list(product((0, 1), repeat=n_qubits))
    for r, c in zip(rows, cols):
        labels[c] = basis[r]
    return labels


@dataclass(frozen=True)
class TwoQubitAnalytic:
    """Closed-form eigenstructure of the two-qubit Heisenberg drift.

    ``eigenstates`` use the same phase convention as :func:`operators.eigh`
    (dominant component positive), which differs from the textbook mixing form
    only by an overall sign on the lower hybridized state.
    """

    alpha: float
    xi1: float
    xi2: float
    energies: np.ndarray
    eigenstates: dict[str, np.ndarray] = field(repr=False)

    @property
    def factor1(self) -> float:
        """Drive matrix element <00|sum sigma^x|~01> (magnitude cos xi1 - sin xi1)."""
        return float(np.sin(self.xi1) - np.cos(self.xi1))

    @property
    def factor2(self) -> float:
        """Drive matrix element <~10|sum sigma^x|11> (= cos xi2 + sin xi2)."""
        return float(np.cos(self.xi2) + np.sin(self.xi2))

    @property
    def transition_frequencies(self) -> tuple[float, float, float, float]:
        e1, e2, e3, e4 = self.energies
        return (e2 - e1, e4 - e3, e3 - e1, e4 - e2)


def two_qubit_analytic(omega1: float, omega2: float, J: float) -> TwoQubitAnalytic:
    if J == 0:
        raise ValueError("analytic mixing angles degenerate at J = 0; diagonalize numerically")
    alpha = (omega1 - omega2) / J
    root = np.sqrt(alpha**2 + 1)
    xi1 = np.arctan(alpha + root)
    xi2 = np.arctan(-alpha + root)
    dw = (omega1 - omega2) / 2
    energies = np.array(
        [
            J / 4 - (omega1 + omega2) / 2,
            dw * np.cos(2 * xi1) - J / 4 * (1 + 2 * np.sin(2 * xi1)),
            dw * np.cos(2 * xi2) + J / 4 * (-1 + 2 * np.sin(2 * xi2)),
            J / 4 + (omega1 + omega2) / 2,
        ]
    )
    e = np.eye(4, dtype=complex)
    states = {
        "00": e[0],
        "01": np.sin(xi1) * e[1] - np.cos(xi1) * e[2],
        "10": np.sin(xi2) * e[1] + np.cos(xi2) * e[2],
        "11": e[3],
    }
    return TwoQubitAnalytic(alpha=alpha, xi1=xi1, xi2=xi2, energies=energies, eigenstates=states)


@dataclass(frozen=True)
class Transition:
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    frequency: float
    factor: float  # <lower| sum sigma^x |upper>, real for real drift

    @property
    def flipped(self) -> list[int]:
        return [i for i, (a, b) in enumerate(zip(self.lower, self.upper)) if a != b]


def transition_frequencies(sys: SpinSystem, threshold: float = 1e-10) -> list[Transition]:
    """All drive-allowed transitions between drift eigenstates.

    For two qubits the order is (00,~01), (~10,11), (00,~10), (~01,11), i.e.
    the second-qubit flips first.
    """
    eig = sys.eigen
    c = eig.to_eigenbasis(sys.control)
    out = []
    for a in range(eig.dim):
        for b in range(a + 1, eig.dim):
            if abs(c[a, b]) > threshold:
                out.append(
                    Transition(
                        lower=sys.labels[a],
                        upper=sys.labels[b],
                        frequency=float(eig.energies[b] - eig.energies[a]),
                        factor=float(c[a, b].real),
                    )
                )

    def order(t: Transition):
        # single flips of the last qubit first, then by lower-state energy
        return (-max(t.flipped), sum(t.lower), t.lower)

    return sorted(out, key=order)


def rabi_sync_ratio(analytic: TwoQubitAnalytic) -> float:
    """Omega_1 / Omega_2 that equalizes the two NOT-gate effective Rabi rates."""
    if abs(analytic.factor1) < 1e-12:
        raise ZeroDivisionError("first transition is not drivable")
    return analytic.factor2 / analytic.factor1


def dominant_transition_energy(sys: SpinSystem, qubit: int) -> float:
    """Energy for flipping ``qubit`` out of the ground manifold |0...0>."""
    ground = (0,) * sys.n_qubits
    excited = tuple(1 if i == qubit else 0 for i in range(sys.n_qubits))
    e = sys.label_energies
    return float(e[_label_index(excited)] - e[_label_index(ground)])


def boltzmann_populations(energies: np.ndarray, temperature: float, kb: float = BOLTZMANN) -> np.ndarray:
    energies = np.asarray(energies, dtype=float)
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    shifted = energies - energies.min()
    if temperature == 0:
        p = (shifted <= 1e-9 * max(1.0, np.abs(energies).max())).astype(float)
    else:
        p = np.exp(-shifted / (kb * temperature))
    return p / p.sum()


def thermal_state(sys: SpinSystem, temperature: float, kb: float = BOLTZMANN) -> np.ndarray:
    """exp(-H0 / k_B T) / Z; T = 0 gives the (equal-weight) ground-space projector."""
    eig = sys.eigen
    p = boltzmann_populations(eig.energies, temperature, kb)
    return (eig.vectors * p) @ eig.vectors.conj().T
