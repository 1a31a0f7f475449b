"""Truncated oscillator (Fock) basis with a total-quanta cutoff.

Units: hbar = 1, oscillator frequency and length 1. The particle mass is
carried by the space because the boost generator and the multiplier use it.

Operators are plain dense ``numpy`` arrays of shape ``(dim, dim)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-10
MAX_DIM = 4000


class ValidationError(ValueError):
    """Raised when an operator fails a density-matrix or block check."""


def _multi_indices(d: int, n_cut: int) -> np.ndarray:
    rows = []
    for total in range(n_cut + 1):
        if d == 1:
            rows.append((total,))
            continue
        for n1 in range(total, -1, -1):
            for n2 in range(total - n1, -1, -1):
                rows.append((n1, n2, total - n1 - n2))
    out = np.array(rows, dtype=np.int64).reshape(-1, d)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FockSpace:
    """Oscillator basis in ``d`` modes truncated at ``sum(n) <= n_cut``.

    Basis states are ordered by total quanta, then by descending occupation of
    the leading modes. ``indices[k]`` is the occupation multi-index of flat
    index ``k``.
    """

    d: int
    n_cut: int
    mass: float = 1.0
    indices: np.ndarray = field(init=False, repr=False, compare=False)
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = _multi_indices(self.d, self.n_cut)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "_lookup", {tuple(int(v) for v in row): k for k, row in enumerate(idx)})

    @property
    def dim(self) -> int:
        return len(self.indices)

    @property
    def totals(self) -> np.ndarray:
        """Total quanta of every basis state."""
        return self.indices.sum(axis=1)

    def flat_index(self, occupation) -> int:
        key = tuple(int(v) for v in occupation)
        if key not in self._lookup:
            raise KeyError(f"occupation {key} not in truncated space")
        return self._lookup[key]

    def multi_index(self, k: int) -> tuple:
        return tuple(int(v) for v in self.indices[k])

    def basis_vector(self, occupation) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.flat_index(occupation)] = 1.0
        return vec

    def level_mask(self, max_total: int) -> np.ndarray:
        """Boolean mask of basis states with total quanta ``<= max_total``."""
        return self.totals <= max_total

    def with_cutoff(self, n_cut: int) -> "FockSpace":
        return FockSpace(self.d, n_cut, self.mass)


def build_space(d: int, n_cut: int, mass: float = 1.0, max_dim: int = MAX_DIM) -> FockSpace:
    """Create a truncated space, checking the dimension against ``max_dim``."""
    if d not in (1, 3):
        raise ValueError(f"unsupported dimension d={d}; expected 1 or 3")
    if int(n_cut) != n_cut or n_cut < 0:
        raise ValueError(f"n_cut must be a nonnegative integer, got {n_cut}")
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    dim = math.comb(int(n_cut) + d, d)
    if dim > max_dim:
        raise ValueError(f"dimension {dim} exceeds memory bound {max_dim}")
    return FockSpace(d, int(n_cut), float(mass))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@functools.lru_cache(maxsize=64)
def annihilation(space: FockSpace, axis: int) -> np.ndarray:
    """Lowering operator of mode ``axis`` (1-based) on the truncated space."""
    if not 1 <= axis <= space.d:
        raise ValueError(f"axis {axis} invalid for d={space.d}")
    a = np.zeros((space.dim, space.dim), dtype=complex)
    for k, occ in enumerate(space.indices):
        n = occ[axis - 1]
        if n == 0:
            continue
        lowered = occ.copy()
        lowered[axis - 1] -= 1
        a[space.flat_index(lowered), k] = math.sqrt(n)
    return _readonly(a)


@functools.lru_cache(maxsize=64)
def position_momentum(space: FockSpace, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Q, P)`` for one axis: ``Q = (a + a^+)/sqrt2``, ``P = (a - a^+)/(i sqrt2)``."""
    a = annihilation(space, axis)
    ad = a.conj().T
    Q = (a + ad) / math.sqrt(2)
    P = (a - ad) / (1j * math.sqrt(2))
    return _readonly(Q), _readonly(P)


def number_operator(space: FockSpace) -> np.ndarray:
    return np.diag(space.totals.astype(complex))


def expi(H: np.ndarray) -> np.ndarray:
    """``exp(iH)`` for Hermitian ``H`` via its eigendecomposition (exactly unitary)."""
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(1j * w)) @ V.conj().T


def vacuum(space: FockSpace) -> "DensityMatrix":
    return projector(space, (0,) * space.d)


def projector(space: FockSpace, occupation) -> "DensityMatrix":
    vec = space.basis_vector(occupation)
    return DensityMatrix(space, np.outer(vec, vec.conj()))


def pure_state(space: FockSpace, vec) -> "DensityMatrix":
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    return DensityMatrix(space, np.outer(vec, vec.conj()))


def embed(op: np.ndarray, small: FockSpace, big: FockSpace) -> np.ndarray:
    """Zero-pad an operator on ``small`` into the larger cutoff ``big``."""
    if small.d != big.d or small.n_cut > big.n_cut:
        raise ValueError("target space must share d and have a larger cutoff")
    # basis ordering is by total quanta, so the small space is a leading block
    out = np.zeros((big.dim, big.dim), dtype=complex)
    out[: small.dim, : small.dim] = op
    return out


def compress(op: np.ndarray, big: FockSpace, small: FockSpace) -> np.ndarray:
    """Restrict an operator on ``big`` to the leading block spanned by ``small``."""
    if small.d != big.d or small.n_cut > big.n_cut:
        raise ValueError("target space must share d and have a smaller cutoff")
    return np.array(op[: small.dim, : small.dim])


@dataclass(frozen=True)
class ValidationReport:
    hermiticity_defect: float
    min_eigenvalue: float
    trace_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.hermiticity_defect <= self.tol
            and self.min_eigenvalue >= -self.tol
            and self.trace_defect <= self.tol
        )

    def reasons(self) -> list[str]:
        out = []
        if self.hermiticity_defect > self.tol:
            out.append(f"not Hermitian (defect {self.hermiticity_defect:.3e})")
        if self.min_eigenvalue < -self.tol:
            out.append(f"negative eigenvalue {self.min_eigenvalue:.3e}")
        if self.trace_defect > self.tol:
            out.append(f"trace defect {self.trace_defect:.3e}")
        return out

    def as_dict(self) -> dict:
        return {
            "hermiticity_defect": self.hermiticity_defect,
            "min_eigenvalue": self.min_eigenvalue,
            "trace_defect": self.trace_defect,
            "tol": self.tol,
            "passed": self.passed,
        }


def validate_density(op: np.ndarray, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check Hermiticity, positivity (on the symmetrized part) and unit trace."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    op = np.asarray(op, dtype=complex)
    herm = float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0
    sym = 0.5 * (op + op.conj().T)
    min_eig = float(np.linalg.eigvalsh(sym)[0]) if op.size else 0.0
    trace_defect = float(abs(np.trace(op) - 1.0))
    return ValidationReport(herm, min_eig, trace_defect, tol)


@dataclass(frozen=True)
class DensityMatrix:
    """A validated state: Hermitian, positive and trace one within ``tol``."""

    space: FockSpace
    matrix: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (self.space.dim, self.space.dim):
            raise ValidationError(f"matrix shape {mat.shape} does not match dim {self.space.dim}")
        report = validate_density(mat, self.tol)
        if not report.passed:
            raise ValidationError("invalid density matrix: " + "; ".join(report.reasons()))
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)


def as_matrix(op) -> np.ndarray:
    """Accept a :class:`DensityMatrix` or a raw array."""
    if isinstance(op, DensityMatrix):
        return op.matrix
    return np.asarray(op, dtype=complex)
