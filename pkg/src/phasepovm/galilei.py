"""Isochronous Galilei group, its central extension and its representation.

Group elements are ``(a, v, R)``: translation, boost, rotation. The
projective representation is realized on the truncated space as

    U_(a, v, R) = exp(-i a.P) exp(i m v.Q) exp(-i theta n.L)

which acts on wavefunctions as ``exp(i m v.(x - a)) phi(R^-1 (x - a))``.

Two versions of the Weyl operator ``exp(i (p.Q - q.P))`` are provided:

* :func:`displacement` exponentiates the truncated generator. It is exactly
  unitary on the truncated space but only approximates the true operator
  near the cutoff.
* :func:`weyl_matrix` gives the exact matrix elements of the true operator
  between truncated basis states (its compression). It is not unitary, but
  ``<S| D T D^+ |S>`` is exact whenever ``S`` and ``T`` live in the
  truncated space.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .fockspace import FockSpace, expi, position_momentum
from .rotinv import rotation_operator

ORTHO_TOL = 1e-12


def _as_rotation(R, d: int) -> np.ndarray:
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape != (d, d):
        raise ValueError(f"rotation has shape {R.shape}, expected ({d}, {d})")
    if np.max(np.abs(R.T @ R - np.eye(d))) > ORTHO_TOL:
        raise ValueError("rotation matrix is not orthogonal")
    if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
        raise ValueError("rotation matrix must have det = +1")
    return R


def _vector(x, name) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite components")
    return x


@dataclass(frozen=True)
class GalileiElement:
    a: np.ndarray
    v: np.ndarray
    R: np.ndarray = field(default=None)

    def __post_init__(self):
        a = _vector(self.a, "a")
        v = _vector(self.v, "v")
        if a.shape != v.shape:
            raise ValueError("a and v must have the same length")
        R = np.eye(len(a)) if self.R is None else _as_rotation(self.R, len(a))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "R", R)

    @property
    def d(self) -> int:
        return len(self.a)

    @classmethod
    def identity(cls, d: int) -> "GalileiElement":
        return cls(np.zeros(d), np.zeros(d))


@dataclass(frozen=True)
class CentralExtElement:
    z: complex
    g: GalileiElement

    def __post_init__(self):
        z = complex(self.z)
        if abs(abs(z) - 1.0) > ORTHO_TOL:
            raise ValueError(f"|z| = {abs(z)} != 1")
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = _vector(self.q, "q")
        p = _vector(self.p, "p")
        if q.shape != p.shape:
            raise ValueError("q and p must have the same length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def origin(cls, d: int) -> "PhasePoint":
        return cls(np.zeros(d), np.zeros(d))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


def compose(g1: GalileiElement, g2: GalileiElement) -> GalileiElement:
    return GalileiElement(g1.a + g1.R @ g2.a, g1.v + g1.R @ g2.v, g1.R @ g2.R)


def inverse(g: GalileiElement) -> GalileiElement:
    Rinv = g.R.T
    return GalileiElement(-Rinv @ g.a, -Rinv @ g.v, Rinv)


def act(g: GalileiElement, x: PhasePoint, mass: float) -> PhasePoint:
    """Phase-space action ``(q, p) -> (a + Rq, m v + Rp)``."""
    return PhasePoint(g.a + g.R @ x.q, mass * g.v + g.R @ x.p)


def multiplier(g1: GalileiElement, g2: GalileiElement, mass: float) -> complex:
    """Cocycle ``exp(i m v1 . R1 a2)``."""
    return complex(np.exp(1j * mass * g1.v @ (g1.R @ g2.a)))


def compose_ext(h1: CentralExtElement, h2: CentralExtElement, mass: float) -> CentralExtElement:
    return CentralExtElement(h1.z * h2.z * multiplier(h1.g, h2.g, mass), compose(h1.g, h2.g))


def _check_dim(space: FockSpace, d: int):
    if space.d != d:
        raise ValueError(f"element has d={d} but space has d={space.d}")


def _sum_ops(space: FockSpace, coeffs, which: int) -> np.ndarray:
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for axis, c in enumerate(coeffs, start=1):
        if c:
            out += c * position_momentum(space, axis)[which]
    return out


def rep_operator(space: FockSpace, g: GalileiElement, mass: float | None = None) -> np.ndarray:
    """Unitary ``U_g`` as the product translation . boost . rotation."""
    _check_dim(space, g.d)
    m = space.mass if mass is None else mass
    U = expi(-_sum_ops(space, g.a, 1))
    U = U @ expi(_sum_ops(space, m * g.v, 0))
    if space.d == 3:
        U = U @ rotation_operator(space, g.R)
    return U


def displacement(space: FockSpace, x: PhasePoint) -> np.ndarray:
    """Unitary ``exp(i (p.Q - q.P))`` from the truncated generator."""
    _check_dim(space, len(x.q))
    return expi(_sum_ops(space, x.p, 0) - _sum_ops(space, x.q, 1))


def mode_weyl(K: int, q, p, K_cols: int | None = None) -> np.ndarray:
    """Exact single-mode Weyl matrix elements ``<m|D|n>``, ``m < K``, ``n < K_cols``.

    Batched over ``q`` and ``p`` (broadcast to a common shape ``B``); returns
    an array of shape ``B + (K, K_cols)``. With ``alpha = (q + ip)/sqrt2`` the
    entries follow ``<m|D|0> = e^{-|alpha|^2/2} alpha^m / sqrt(m!)``,
    ``<0|D|n> = e^{-|alpha|^2/2} (-conj alpha)^n / sqrt(n!)`` and
    ``sqrt(m+1) <m+1|D|n> = alpha <m|D|n> + sqrt(n) <m|D|n-1>``.
    """
    Kc = K if K_cols is None else K_cols
    q, p = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(p, dtype=float))
    shape = q.shape
    alpha = ((q + 1j * p) / math.sqrt(2)).ravel()
    work = np.empty((K, Kc, alpha.size), dtype=complex)  # batch last keeps the recurrence contiguous
    row = np.exp(-0.5 * np.abs(alpha) ** 2).astype(complex)
    minus_conj = -np.conj(alpha)
    for n in range(Kc):
        work[0, n] = row
        row = row * minus_conj / math.sqrt(n + 1)
    sq = np.sqrt(np.arange(Kc))
    for m in range(K - 1):
        s = 1.0 / math.sqrt(m + 1)
        nxt = work[m] * alpha
        nxt[1:] += sq[1:, None] * work[m, :-1]
        work[m + 1] = nxt * s
    return np.moveaxis(work, 2, 0).reshape(shape + (K, Kc))


@functools.lru_cache(maxsize=64)
def _gather_index(space: FockSpace, rows: int, cols: int):
    idx = space.indices
    r = idx[space.totals <= rows]
    c = idx[space.totals <= cols]
    return tuple((r[:, k][:, None], c[:, k][None, :]) for k in range(space.d))


def weyl_matrices(space: FockSpace, q, p, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Compressed Weyl operators for a batch of points; ``q``, ``p`` have shape ``(B, d)``.

    ``rows`` and ``cols`` restrict the result to basis states with total
    quanta at most that level (the leading blocks), which is all that is
    needed against operators supported on low levels.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if q.shape[-1] != space.d or p.shape != q.shape:
        raise ValueError(f"points must have shape (B, {space.d})")
    rows = space.n_cut if rows is None else rows
    cols = space.n_cut if cols is None else cols
    out = None
    for k, (r, c) in enumerate(_gather_index(space, rows, cols)):
        dk = mode_weyl(rows + 1, q[:, k], p[:, k], cols + 1)[:, r, c]
        out = dk if out is None else out * dk
    return out


def weyl_matrix(space: FockSpace, x: PhasePoint) -> np.ndarray:
    """Exact compression of ``exp(i (p.Q - q.P))`` onto the truncated space."""
    _check_dim(space, len(x.q))
    return weyl_matrices(space, x.q[None, :], x.p[None, :])[0]


def compressed_rep(space: FockSpace, g: GalileiElement, mass: float | None = None) -> np.ndarray:
    """Exact compression of ``U_g``: ``e^{-i m a.v/2} D(a, m v) U_R``.

    Rotations commute with the total-quanta projector, so only the Weyl
    factor needs the closed form.
    """
    _check_dim(space, g.d)
    m = space.mass if mass is None else mass
    D = weyl_matrix(space, PhasePoint(g.a, m * g.v))
    U = np.exp(-0.5j * m * (g.a @ g.v)) * D
    if space.d == 3:
        U = U @ rotation_operator(space, g.R)
    return U


def projective_residual(
    space: FockSpace,
    g1: GalileiElement,
    g2: GalileiElement,
    guard: int = 8,
    mass: float | None = None,
) -> float:
    """``||U1 U2 - w(g1, g2) U12||`` on states with total quanta ``<= n_cut - guard``."""
    if guard < 0 or guard > space.n_cut:
        raise ValueError(f"guard band {guard} not available at n_cut={space.n_cut}")
    m = space.mass if mass is None else mass
    U1 = rep_operator(space, g1, m)
    U2 = rep_operator(space, g2, m)
    U12 = rep_operator(space, compose(g1, g2), m)
    diff = U1 @ U2 - multiplier(g1, g2, m) * U12
    keep = space.level_mask(space.n_cut - guard)
    return float(np.linalg.norm(diff[np.ix_(keep, keep)], 2))


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rotation by ``angle`` about ``axis`` (right-handed)."""
    axis = np.asarray(axis, dtype=float)
    return Rotation.from_rotvec(angle * axis / np.linalg.norm(axis)).as_matrix()
