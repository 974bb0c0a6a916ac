"""Finite-dimensional states, effects, and Bloch-sphere helpers.

All values are immutable after construction (arrays are frozen) and every
operation is a pure function, so concurrent use is safe.  Hermitian
eigendecomposition via ``numpy.linalg.eigh`` (eigenvalues ascending) is the
backbone primitive; its deterministic ordering keeps optimum extraction and
region classification reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ATOL_ENTRY = 1e-12   # entrywise checks: hermiticity, normalization
ATOL_EIG = 1e-10     # eigenvalue slack for positive semidefiniteness
ATOL_POVM = 1e-8     # completeness slack for solver-produced POVMs


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=complex)
    out.setflags(write=False)
    return out


def hermitian_deviation(matrix: np.ndarray) -> float:
    """Largest entrywise deviation from Hermiticity."""
    m = np.asarray(matrix)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def hermitize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().T) / 2


def _check_square(matrix: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}.")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError(f"{name} contains non-finite entries.")
    return m


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm complex state vector of dimension >= 2."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size < 2:
            raise ValueError("PureState needs dimension >= 2.")
        if not np.all(np.isfinite(amp.view(float))):
            raise ValueError("PureState amplitudes contain non-finite entries.")
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > ATOL_ENTRY:
            raise ValueError(f"PureState norm {norm} deviates from 1 by more than {ATOL_ENTRY}.")
        object.__setattr__(self, "amplitudes", _frozen(amp))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    @classmethod
    def from_density(cls, rho: "DensityMatrix", purity_atol: float = 1e-8) -> "PureState":
        """Principal eigenvector of a (near-)pure density matrix."""
        defect = abs(rho.purity() - 1.0)
        if defect > purity_atol:
            raise ValueError(f"density matrix is not pure: purity defect {defect:.3e} > {purity_atol}.")
        eigvals, eigvecs = np.linalg.eigh(rho.entries)
        vec = eigvecs[:, -1]
        # canonical global phase: largest-magnitude amplitude made real positive
        k = int(np.argmax(np.abs(vec)))
        vec = vec * np.exp(-1j * np.angle(vec[k]))
        return cls(vec / np.linalg.norm(vec))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = _check_square(self.entries, "DensityMatrix")
        if m.shape[0] < 2:
            raise ValueError("DensityMatrix needs dimension >= 2.")
        dev = hermitian_deviation(m)
        if dev > ATOL_ENTRY:
            raise ValueError(f"DensityMatrix deviates from Hermitian by {dev:.3e} > {ATOL_ENTRY}.")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > ATOL_ENTRY:
            raise ValueError(f"DensityMatrix trace {tr} deviates from 1 by more than {ATOL_ENTRY}.")
        lo = float(np.linalg.eigvalsh(hermitize(m))[0])
        if lo < -ATOL_EIG:
            raise ValueError(f"DensityMatrix has eigenvalue {lo:.3e} < -{ATOL_EIG}.")
        object.__setattr__(self, "entries", _frozen(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def bloch_vector(self) -> np.ndarray:
        """Real Bloch vector (x, y, z); qubits only."""
        if self.dim != 2:
            raise ValueError("Bloch vector is defined for dimension 2 only.")
        m = self.entries
        return np.array(
            [
                2 * float(np.real(m[0, 1])),
                2 * float(np.imag(m[1, 0])),
                float(np.real(m[0, 0] - m[1, 1])),
            ]
        )


def validate_povm(effects: Sequence[np.ndarray], atol: float = ATOL_POVM) -> None:
    """Raise ValueError unless `effects` is a POVM within `atol`."""
    if len(effects) == 0:
        raise ValueError("POVM needs at least one effect.")
    mats = [_check_square(e, f"effect {k}") for k, e in enumerate(effects)]
    dim = mats[0].shape[0]
    for k, m in enumerate(mats):
        if m.shape[0] != dim:
            raise ValueError(f"effect {k} has dimension {m.shape[0]}, expected {dim}.")
        dev = hermitian_deviation(m)
        if dev > atol:
            raise ValueError(f"effect {k} deviates from Hermitian by {dev:.3e} > {atol}.")
        lo = float(np.linalg.eigvalsh(hermitize(m))[0])
        if lo < -atol:
            raise ValueError(f"effect {k} has eigenvalue {lo:.3e} < -{atol}.")
    total = sum(mats)
    gap = float(np.max(np.abs(total - np.eye(dim))))
    if gap > atol:
        raise ValueError(f"effects sum deviates from identity by {gap:.3e} > {atol}.")


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered list of PSD effects summing to the identity."""

    effects: tuple
    atol: float = ATOL_POVM

    def __init__(self, effects: Iterable[np.ndarray], atol: float = ATOL_POVM):
        mats = [np.asarray(e, dtype=complex) for e in effects]
        validate_povm(mats, atol=atol)
        object.__setattr__(self, "effects", tuple(_frozen(m) for m in mats))
        object.__setattr__(self, "atol", float(atol))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)

    def probabilities(self, state: DensityMatrix) -> np.ndarray:
        return np.array([float(np.real(np.trace(state.entries @ e))) for e in self.effects])


@dataclass(frozen=True, eq=False)
class WeightedState:
    """State with a strictly positive weight."""

    state: DensityMatrix
    weight: float

    def __post_init__(self) -> None:
        w = float(self.weight)
        if not np.isfinite(w) or w <= 0.0:
            raise ValueError(f"weight must be > 0, got {w}.")
        object.__setattr__(self, "weight", w)


def bloch_state(theta_tilde: float, phi: float = 0.0) -> PureState:
    """Qubit cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>, phase-canonical.

    Angles are reduced mod 2*pi; the global phase is fixed so the first
    amplitude is real and nonnegative.
    """
    theta = float(theta_tilde)
    az = float(phi)
    if not (np.isfinite(theta) and np.isfinite(az)):
        raise ValueError("bloch_state angles must be finite.")
    theta = np.mod(theta, 2 * np.pi)
    a = np.cos(theta / 2)
    b = np.exp(1j * az) * np.sin(theta / 2)
    if a < 0:
        a, b = -a, -b
    return PureState(np.array([a + 0j, b]))


def mix(states: Sequence[tuple]) -> DensityMatrix:
    """Convex combination of density matrices."""
    if len(states) == 0:
        raise ValueError("mix needs at least one component.")
    weights = np.array([float(w) for _, w in states])
    if np.any(weights < 0):
        raise ValueError("mix weights must be nonnegative.")
    if abs(weights.sum() - 1.0) > ATOL_ENTRY:
        raise ValueError(f"mix weights sum to {weights.sum()}, expected 1 within {ATOL_ENTRY}.")
    mats = []
    for rho, _ in states:
        mats.append(rho.entries if isinstance(rho, DensityMatrix) else DensityMatrix(rho).entries)
    dim = mats[0].shape[0]
    if any(m.shape[0] != dim for m in mats):
        raise ValueError("mix components must share one dimension.")
    out = sum(w * m for w, m in zip(weights, mats))
    return DensityMatrix(hermitize(out))


def positive_part_trace(hermitian: np.ndarray, atol: float = ATOL_ENTRY) -> float:
    """Sum of the strictly positive eigenvalues of a Hermitian matrix."""
    m = _check_square(hermitian, "positive_part_trace input")
    dev = hermitian_deviation(m)
    if dev > atol:
        raise ValueError(f"matrix deviates from Hermitian by {dev:.3e} > {atol}.")
    eigvals = np.linalg.eigvalsh(hermitize(m))
    return float(eigvals[eigvals > 0].sum())


def random_pure(dim: int, seed: int) -> PureState:
    """Haar-random state vector (unitarily invariant), deterministic per seed."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}.")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(vec / np.linalg.norm(vec))


def random_density(dim: int, rank: int, seed: int) -> DensityMatrix:
    """Normalized Gram construction G G^dag / tr with rank-controlled G."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}.")
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must be in [1, {dim}], got {rank}.")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(hermitize(rho) / np.real(np.trace(rho)))
