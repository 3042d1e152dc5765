"""States and operators on a truncated harmonic oscillator basis.

Everything is dimensionless with hbar = 1. Quadratures follow
q = (a + a†)/sqrt(2), p = (a - a†)/(i sqrt(2)), so the vacuum has
variance 1/2 in both. Matrices are dense complex128 and immutable;
the basis is the number basis |0>, ..., |dim-1>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, HermiticityError

# Absolute entrywise tolerance for declared-hermitian matrices.
HERMITIAN_ATOL = 1e-12
# Looser tolerance used when checking preconditions on user-supplied operators.
HERMITIAN_CHECK_ATOL = 1e-10

_NORM_ATOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def _check_dim(dim: int) -> None:
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise DimensionError(f"truncation dimension must be an integer >= 2, got {dim!r}")


@dataclass(frozen=True)
class StateVector:
    """A normalized pure state. ``amp[n]`` is the amplitude on level n."""

    dim: int
    amp: np.ndarray

    def __post_init__(self):
        _check_dim(self.dim)
        amp = np.asarray(self.amp, dtype=np.complex128)
        if amp.shape != (self.dim,):
            raise DimensionError(
                f"amplitude vector has shape {amp.shape}, expected ({self.dim},)"
            )
        nrm = float(np.linalg.norm(amp))
        if abs(nrm - 1.0) > _NORM_ATOL:
            raise ValueError(
                f"state vector norm {nrm!r} deviates from 1 by more than {_NORM_ATOL}; "
                "use StateVector.from_amplitudes to normalize raw amplitudes"
            )
        object.__setattr__(self, "amp", _frozen(amp))

    @staticmethod
    def from_amplitudes(amp: np.ndarray) -> "StateVector":
        """Normalize an arbitrary nonzero amplitude vector into a state."""
        amp = np.asarray(amp, dtype=np.complex128)
        nrm = float(np.linalg.norm(amp))
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(len(amp), amp / nrm)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def normalize(self) -> "StateVector":
        return StateVector.from_amplitudes(self.amp)


@dataclass(frozen=True)
class OperatorMatrix:
    """A dense operator. With ``hermitian_hint`` set, hermiticity is enforced."""

    dim: int
    entries: np.ndarray
    hermitian_hint: bool = False
    label: str | None = None

    def __post_init__(self):
        _check_dim(self.dim)
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.shape != (self.dim, self.dim):
            raise DimensionError(
                f"operator has shape {entries.shape}, expected ({self.dim}, {self.dim})"
            )
        if self.hermitian_hint:
            dev = float(np.max(np.abs(entries - entries.conj().T)))
            if dev > HERMITIAN_ATOL:
                raise HermiticityError(
                    f"operator declared hermitian deviates by {dev:.3e} "
                    f"(> {HERMITIAN_ATOL})"
                )
        object.__setattr__(self, "entries", _frozen(entries))

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.dim, self.entries.conj().T, self.hermitian_hint)

    def _check_same(self, other: "OperatorMatrix") -> None:
        if self.dim != other.dim:
            raise DimensionError(f"operator dimensions differ: {self.dim} vs {other.dim}")

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check_same(other)
        return OperatorMatrix(self.dim, self.entries + other.entries)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check_same(other)
        return OperatorMatrix(self.dim, self.entries - other.entries)

    def __mul__(self, scalar: complex) -> "OperatorMatrix":
        return OperatorMatrix(self.dim, self.entries * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check_same(other)
        return OperatorMatrix(self.dim, self.entries @ other.entries)

    def hermitized(self, label: str | None = None) -> "OperatorMatrix":
        """Return (M + M†)/2 with the hermitian hint set.

        The average makes the entries conjugate-symmetric exactly, even when
        floating point matrix products left them symmetric only to rounding.
        """
        sym = 0.5 * (self.entries + self.entries.conj().T)
        return OperatorMatrix(self.dim, sym, hermitian_hint=True, label=label)


@dataclass(frozen=True)
class DensityMatrix:
    """A mixed state. Hermiticity and unit trace are enforced on construction."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        _check_dim(self.dim)
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.shape != (self.dim, self.dim):
            raise DimensionError(
                f"density matrix has shape {entries.shape}, expected ({self.dim}, {self.dim})"
            )
        herm_dev = float(np.max(np.abs(entries - entries.conj().T)))
        if herm_dev > 1e-10:
            raise HermiticityError(f"density matrix deviates from hermitian by {herm_dev:.3e}")
        tr_dev = abs(complex(np.trace(entries)) - 1.0)
        if tr_dev > 1e-8:
            raise ValueError(f"density matrix trace deviates from 1 by {tr_dev:.3e}")
        object.__setattr__(self, "entries", _frozen(entries))

    def validate(self) -> None:
        """Check positivity: smallest eigenvalue must be >= -1e-8."""
        low = float(np.linalg.eigvalsh(self.entries)[0])
        if low < -1e-8:
            raise ValueError(f"density matrix has eigenvalue {low:.3e} below -1e-8")


# ---------------------------------------------------------------------------
# operator constructors


def annihilation(dim: int) -> OperatorMatrix:
    """Lowering operator: a|n> = sqrt(n)|n-1>, so a[m, m+1] = sqrt(m+1)."""
    _check_dim(dim)
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for m in range(dim - 1):
        mat[m, m + 1] = math.sqrt(m + 1)
    return OperatorMatrix(dim, mat, label="a")


def creation(dim: int) -> OperatorMatrix:
    _check_dim(dim)
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for m in range(dim - 1):
        mat[m + 1, m] = math.sqrt(m + 1)
    return OperatorMatrix(dim, mat, label="adag")


def number(dim: int) -> OperatorMatrix:
    _check_dim(dim)
    return OperatorMatrix(
        dim, np.diag(np.arange(dim, dtype=np.complex128)), hermitian_hint=True, label="n"
    )


def identity(dim: int) -> OperatorMatrix:
    _check_dim(dim)
    return OperatorMatrix(
        dim, np.eye(dim, dtype=np.complex128), hermitian_hint=True, label="id"
    )


def position(dim: int) -> OperatorMatrix:
    """q = (a + a†)/sqrt(2)."""
    a = annihilation(dim).entries
    mat = (a + a.conj().T) / math.sqrt(2.0)
    return OperatorMatrix(dim, mat, hermitian_hint=True, label="q")


def momentum(dim: int) -> OperatorMatrix:
    """p = (a - a†)/(i sqrt(2))."""
    a = annihilation(dim).entries
    mat = (a - a.conj().T) / (1j * math.sqrt(2.0))
    return OperatorMatrix(dim, mat, hermitian_hint=True, label="p")


# ---------------------------------------------------------------------------
# state constructors


def basis_state(dim: int, n: int) -> StateVector:
    _check_dim(dim)
    if not 0 <= n < dim:
        raise DimensionError(f"basis level {n} outside [0, {dim})")
    amp = np.zeros(dim, dtype=np.complex128)
    amp[n] = 1.0
    return StateVector(dim, amp)


def coherent_state(dim: int, alpha: complex) -> StateVector:
    """Truncated coherent state, renormalized on the finite basis."""
    _check_dim(dim)
    amp = np.empty(dim, dtype=np.complex128)
    amp[0] = 1.0
    for n in range(1, dim):
        amp[n] = amp[n - 1] * alpha / math.sqrt(n)
    return StateVector.from_amplitudes(amp)


# ---------------------------------------------------------------------------
# operations


def apply(op: OperatorMatrix, psi: StateVector) -> np.ndarray:
    """op @ psi as a raw (generally unnormalized) amplitude vector."""
    if op.dim != psi.dim:
        raise DimensionError(f"operator dim {op.dim} does not match state dim {psi.dim}")
    return op.entries @ psi.amp


def expectation(op: OperatorMatrix, psi: StateVector) -> complex:
    """<psi|op|psi>. Real to within 1e-10 when the operator is hermitian."""
    return complex(np.vdot(psi.amp, apply(op, psi)))


def variance(op: OperatorMatrix, psi: StateVector) -> float:
    """<op^2> - <op>^2 for a hermitian operator."""
    dev = float(np.max(np.abs(op.entries - op.entries.conj().T)))
    if dev > HERMITIAN_CHECK_ATOL:
        raise HermiticityError(f"variance requires a hermitian operator (deviation {dev:.3e})")
    vec = apply(op, psi)
    mean = float(np.real(np.vdot(psi.amp, vec)))
    return float(np.real(np.vdot(vec, vec))) - mean * mean


def projector_fidelity(psi: StateVector, n: int) -> float:
    """|<n|psi>|^2, the population of basis level n."""
    if not 0 <= n < psi.dim:
        raise IndexError(f"basis level {n} outside [0, {psi.dim})")
    return float(abs(psi.amp[n]) ** 2)


def pure_density(psi: StateVector) -> DensityMatrix:
    return DensityMatrix(psi.dim, np.outer(psi.amp, psi.amp.conj()))


def top_level_leak(psi: StateVector, levels: int = 5) -> float:
    """Total population of the top ``levels`` basis levels.

    This is the truncation monitor: physically converged runs keep it tiny.
    """
    levels = min(levels, psi.dim)
    tail = psi.amp[psi.dim - levels:]
    return float(np.real(np.vdot(tail, tail)))


def position_eigenbasis(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonalize q on the truncated basis.

    Returns (U, values) with eigenvalues ascending; column k of U is the
    eigenvector for values[k]. The extreme eigenvalues grow like sqrt(2 dim),
    which bounds the position range the truncated basis can represent.
    """
    values, vectors = np.linalg.eigh(position(dim).entries)
    return vectors, values
