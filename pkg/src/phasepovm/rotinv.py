"""Rotation symmetry on the truncated 3-D oscillator space.

The angular momentum is assembled in normal-ordered ladder form, which
conserves total quanta and so acts exactly on a total-quanta truncation.
Each level N splits into one multiplet of every l <= N with N - l even; the
radial index k of a multiplet is (N - l) / 2.

A rotation-invariant density matrix is ``T = sum_l P_l (x) T_l`` with each
``T_l`` positive and ``sum_l (2l + 1) tr T_l = 1``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .fockspace import (
    DensityMatrix,
    FockSpace,
    ValidationError,
    annihilation,
    as_matrix,
    expi,
)

log = logging.getLogger(__name__)

CLUSTER_TOL = 1e-8
BLOCK_TOL = 1e-12


def _require_3d(space: FockSpace, what: str):
    if space.d != 3:
        raise ValueError(f"{what} needs d=3 (rotation group is trivial for d={space.d})")


@functools.lru_cache(maxsize=32)
def angular_momentum(space: FockSpace) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Lx, Ly, Lz, L2)`` with ``L = Q x P``.

    ``Lz = Qx Py - Qy Px = -i (ax^+ ay - ay^+ ax)`` and cyclic; the ladder
    form avoids leaving the truncated space in intermediate products.
    """
    _require_3d(space, "angular_momentum")
    a = [annihilation(space, k) for k in (1, 2, 3)]
    ad = [x.conj().T for x in a]

    def comp(j, k):
        return -1j * (ad[j] @ a[k] - ad[k] @ a[j])

    Lx, Ly, Lz = comp(1, 2), comp(2, 0), comp(0, 1)
    L2 = Lx @ Lx + Ly @ Ly + Lz @ Lz
    for m in (Lx, Ly, Lz, L2):
        m.flags.writeable = False
    return Lx, Ly, Lz, L2


def rotation_operator(space: FockSpace, R) -> np.ndarray:
    """``exp(-i theta n.L)`` for the rotation matrix ``R`` (identity for d=1)."""
    R = np.asarray(R, dtype=float)
    if space.d == 1:
        return np.eye(space.dim, dtype=complex)
    rotvec = Rotation.from_matrix(R).as_rotvec()
    if not np.any(rotvec):
        return np.eye(space.dim, dtype=complex)
    Lx, Ly, Lz, _ = angular_momentum(space)
    return expi(-(rotvec[0] * Lx + rotvec[1] * Ly + rotvec[2] * Lz))


def quarter_turns() -> list[np.ndarray]:
    return [Rotation.from_rotvec(0.5 * math.pi * np.eye(3)[k]).as_matrix() for k in range(3)]


def rotation_panel(seed: int = 0, n_random: int = 10) -> list[np.ndarray]:
    """Quarter-turns about x, y, z followed by ``n_random`` seeded Haar rotations."""
    rng = np.random.default_rng(seed)
    randoms = Rotation.random(n_random, random_state=rng).as_matrix()
    return quarter_turns() + list(randoms)


def radial_dim(n_cut: int, l: int) -> int:
    """Number of levels ``N <= n_cut`` with ``N >= l`` and ``N = l mod 2``."""
    if l > n_cut:
        return 0
    return (n_cut - l) // 2 + 1


@dataclass(frozen=True)
class AngularBlock:
    """The l-sector of the truncated space.

    ``basis[:, k, l + m]`` is the state with radial index ``k`` and magnetic
    number ``m``; for fixed ``k`` the ``m`` states follow the standard phase
    convention, so rotations act identically on every radial index.
    """

    l: int
    basis: np.ndarray

    @property
    def radial_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def rank(self) -> int:
        return self.basis.shape[1] * self.basis.shape[2]

    @property
    def projector(self) -> np.ndarray:
        flat = self.basis.reshape(self.basis.shape[0], -1)
        return flat @ flat.conj().T

    def m_slice(self, m: int) -> np.ndarray:
        """Columns spanning radial space at magnetic number ``m``, shape ``(dim, radial_dim)``."""
        return self.basis[:, :, self.l + m]


def _level_multiplet(space, level_idx, l, Lz, Lminus, L2):
    sub = np.ix_(level_idx, level_idx)
    w, V = np.linalg.eigh(L2[sub])
    target = l * (l + 1)
    cols = np.abs(w - target) <= CLUSTER_TOL * max(1.0, target)
    Vl = V[:, cols]
    if Vl.shape[1] != 2 * l + 1:
        raise RuntimeError(f"expected {2 * l + 1} states at l={l}, found {Vl.shape[1]}")
    wz, Vz = np.linalg.eigh(Vl.conj().T @ Lz[sub] @ Vl)
    top = Vl @ Vz[:, -1]
    if abs(wz[-1] - l) > CLUSTER_TOL * max(1.0, l):
        raise RuntimeError(f"highest weight {wz[-1]} != {l}")
    pivot = np.argmax(np.abs(top) > np.abs(top).max() - 1e-9)
    top = top * (abs(top[pivot]) / top[pivot])
    states = np.zeros((space.dim, 2 * l + 1), dtype=complex)
    vec = np.zeros(space.dim, dtype=complex)
    vec[level_idx] = top
    states[:, 2 * l] = vec
    for m in range(l, -l, -1):
        vec = Lminus @ vec / math.sqrt((l + m) * (l - m + 1))
        states[:, l + m - 1] = vec
    return states


@functools.lru_cache(maxsize=32)
def angular_blocks(space: FockSpace) -> tuple[AngularBlock, ...]:
    """Decompose the truncated space into l-sectors from ``L2`` and ``Lz``."""
    _require_3d(space, "angular_blocks")
    Lx, Ly, Lz, L2 = angular_momentum(space)
    Lminus = Lx - 1j * Ly
    totals = space.totals
    blocks = []
    for l in range(space.n_cut + 1):
        levels = range(l, space.n_cut + 1, 2)
        basis = np.zeros((space.dim, len(levels), 2 * l + 1), dtype=complex)
        for k, N in enumerate(levels):
            level_idx = np.flatnonzero(totals == N)
            basis[:, k, :] = _level_multiplet(space, level_idx, l, Lz, Lminus, L2)
        basis.flags.writeable = False
        blocks.append(AngularBlock(l, basis))
    return tuple(blocks)


@dataclass(frozen=True)
class InvariantBlocks:
    """Radial matrices ``{l: T_l}`` of a rotation-invariant operator."""

    blocks: dict

    def __post_init__(self):
        clean = {}
        for l, mat in sorted(self.blocks.items()):
            mat = np.atleast_2d(np.asarray(mat, dtype=complex))
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValidationError(f"T_{l} must be square, got shape {mat.shape}")
            if int(l) != l or l < 0:
                raise ValidationError(f"invalid angular momentum {l}")
            clean[int(l)] = mat
        object.__setattr__(self, "blocks", clean)

    def trace_sum(self) -> float:
        """``sum_l (2l + 1) tr T_l``."""
        return float(sum((2 * l + 1) * np.trace(m).real for l, m in self.blocks.items()))

    def __getitem__(self, l):
        return self.blocks[l]

    def __iter__(self):
        return iter(self.blocks.items())


def check_blocks(space: FockSpace, blocks: InvariantBlocks, tol: float = BLOCK_TOL):
    """Raise :class:`ValidationError` unless ``blocks`` define a valid invariant state."""
    _require_3d(space, "invariant blocks")
    for l, mat in blocks:
        r = radial_dim(space.n_cut, l)
        if r == 0:
            raise ValidationError(f"l={l} does not exist at n_cut={space.n_cut}")
        if mat.shape != (r, r):
            raise ValidationError(f"T_{l} has shape {mat.shape}, expected ({r}, {r})")
        if np.max(np.abs(mat - mat.conj().T)) > tol:
            raise ValidationError(f"T_{l} is not Hermitian")
        lam = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
        if lam < -tol:
            raise ValidationError(f"T_{l} has negative eigenvalue {lam:.3e}")
    total = blocks.trace_sum()
    if abs(total - 1.0) > tol:
        raise ValidationError(f"trace sum sum_l (2l+1) tr T_l = {total!r} != 1")


def assemble(space: FockSpace, blocks: InvariantBlocks) -> np.ndarray:
    """``sum_l sum_m |l m><l m| (x) T_l`` without validation."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    by_l = {b.l: b for b in angular_blocks(space)}
    for l, mat in blocks:
        blk = by_l[l]
        for m in range(-l, l + 1):
            B = blk.m_slice(m)
            out += B @ mat @ B.conj().T
    return out


def build_invariant(space: FockSpace, blocks: InvariantBlocks, tol: float = BLOCK_TOL) -> DensityMatrix:
    """Assemble and validate a rotation-invariant density matrix."""
    check_blocks(space, blocks, tol)
    return DensityMatrix(space, assemble(space, blocks))


def extract_blocks(space: FockSpace, T) -> InvariantBlocks:
    """Radial matrices averaged over ``m``; exact inverse of :func:`assemble` on invariant ``T``."""
    _require_3d(space, "extract_blocks")
    T = as_matrix(T)
    out = {}
    for blk in angular_blocks(space):
        acc = np.zeros((blk.radial_dim, blk.radial_dim), dtype=complex)
        for m in range(-blk.l, blk.l + 1):
            B = blk.m_slice(m)
            acc += B.conj().T @ T @ B
        out[blk.l] = acc / (2 * blk.l + 1)
    return InvariantBlocks(out)


def haar_average(space: FockSpace, T, n_samples: int = 512, seed: int = 0) -> np.ndarray:
    """Monte Carlo average of ``U_R T U_R^+`` over Haar-random rotations."""
    _require_3d(space, "haar_average")
    T = as_matrix(T)
    rng = np.random.default_rng(seed)
    acc = np.zeros_like(T)
    for R in Rotation.random(n_samples, random_state=rng).as_matrix():
        U = rotation_operator(space, R)
        acc += U @ T @ U.conj().T
    return acc / n_samples


def group_average(space: FockSpace, T, n_samples: int = 512, seed: int = 0) -> np.ndarray:
    """Project ``T`` onto the rotation commutant.

    The seeded Haar average is followed by replacing each l-sector with its
    m-averaged radial matrix, which makes the result exactly invariant. The
    distance between the sampled and exact averages is logged.
    """
    if space.d == 1:
        log.info("group_average: d=1, rotation group trivial; returning input unchanged")
        return np.array(as_matrix(T))
    sampled = haar_average(space, T, n_samples, seed)
    exact = assemble(space, extract_blocks(space, sampled))
    log.info(
        "group_average: n_samples=%d sampling defect %.3e",
        n_samples,
        np.linalg.norm(sampled - exact, 2),
    )
    return exact


def invariance_residual(space: FockSpace, T, seed: int = 0) -> float:
    """Max over the rotation panel of ``||[T, U_R]||``; zero for d=1."""
    if space.d == 1:
        return 0.0
    T = as_matrix(T)
    worst = 0.0
    for R in rotation_panel(seed):
        U = rotation_operator(space, R)
        worst = max(worst, float(np.linalg.norm(T @ U - U @ T, 2)))
    return worst
