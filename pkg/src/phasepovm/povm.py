"""Covariant phase-space POVMs built from a density matrix ``T``.

The operator density at ``x = (q, p)`` is ``(2 pi)^-d D(x) T D(x)^+`` and
``E_T(Z)`` is its integral over ``Z``. Densities use the exact compression of
the Weyl operator (see :func:`phasepovm.galilei.weyl_matrix`), so every
matrix element between truncated basis states is the true one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .fockspace import DensityMatrix, FockSpace, as_matrix, compress, embed
from .galilei import (
    GalileiElement,
    PhasePoint,
    displacement,
    mode_weyl,
    rep_operator,
    weyl_matrices,
    weyl_matrix,
)
from .regions import (
    Ball,
    Box,
    QuadratureRule,
    RegionError,
    Union,
    big_box,
    check_covers,
    default_half_width,
    transform_region,
    transform_rule,
)

log = logging.getLogger(__name__)

CHUNK_ELEMENTS = 1 << 22
ENVELOPE_SAFETY = 1.1


class SamplingError(RuntimeError):
    """Rejection sampling could not guarantee a valid envelope."""


def _space_of(*ops) -> FockSpace | None:
    for op in ops:
        if isinstance(op, DensityMatrix):
            return op.space
    return None


def _check_shape(space: FockSpace, *ops):
    for op in ops:
        if as_matrix(op).shape != (space.dim, space.dim):
            raise ValueError(f"operator shape {as_matrix(op).shape} does not match dim {space.dim}")


def povm_density(space: FockSpace, T, x: PhasePoint, method: str = "compressed") -> np.ndarray:
    """``(2 pi)^-d D(x) T D(x)^+``.

    ``method="unitary"`` uses the truncated unitary exponential instead of
    the exact compression; its trace is exactly ``(2 pi)^-d``.
    """
    _check_shape(space, T)
    T = as_matrix(T)
    if method == "compressed":
        D = weyl_matrix(space, x)
    elif method == "unitary":
        D = displacement(space, x)
    else:
        raise ValueError(f"unknown method {method!r}")
    return D @ T @ D.conj().T / (2 * math.pi) ** space.d


def _chunks(n_points: int, size: int):
    step = max(1, CHUNK_ELEMENTS // max(size, 1))
    for start in range(0, n_points, step):
        yield slice(start, min(start + step, n_points))


def support_level(space: FockSpace, op: np.ndarray, rtol: float = 1e-15) -> int:
    """Highest total-quanta level touched by a nonzero row or column of ``op``."""
    mag = np.abs(op)
    thresh = rtol * max(float(mag.max(initial=0.0)), 1e-300)
    used = (mag.max(axis=0) > thresh) | (mag.max(axis=1) > thresh)
    return int(space.totals[used].max(initial=0))


def _leading(space: FockSpace, level: int) -> int:
    return int(np.count_nonzero(space.totals <= level))


def _factor(T: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Eigen-factor ``T = V diag(lam) V^+`` dropping null directions; ``None`` if not Hermitian."""
    if np.max(np.abs(T - T.conj().T), initial=0.0) > 1e-12 * max(1.0, np.abs(T).max(initial=0.0)):
        return None
    lam, V = np.linalg.eigh(0.5 * (T + T.conj().T))
    keep = np.abs(lam) > 1e-15 * max(1.0, np.abs(lam).max(initial=0.0))
    return lam[keep], V[:, keep]


def prob_density_grid(S, T, pts, space: FockSpace | None = None) -> np.ndarray:
    """``tr[S G(x)]`` at every row of ``pts`` (shape ``(B, 2d)``); not clamped.

    Only the Weyl block between the levels that ``S`` and ``T`` occupy is
    formed, so low-lying states are cheap on large cutoffs.
    """
    space = space or _space_of(S, T)
    _check_shape(space, S, T)
    S, T = as_matrix(S), as_matrix(T)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    d = space.d
    ns, nt = support_level(space, S), support_level(space, T)
    ms, mt = _leading(space, ns), _leading(space, nt)
    S, T = S[:ms, :ms], T[:mt, :mt]
    fac = _factor(T)
    out = np.empty(len(pts))
    for sl in _chunks(len(pts), ms * mt):
        D = weyl_matrices(space, pts[sl, :d], pts[sl, d:], ns, nt)
        if fac is None:
            vals = np.einsum("xab,xab->x", S @ D @ T, D.conj())
        else:
            lam, V = fac
            Y = D @ V
            vals = np.einsum("xaj,xaj,j->x", Y.conj(), S @ Y, lam)
        out[sl] = vals.real
    return out / (2 * math.pi) ** d


def prob_density(S, T, x: PhasePoint, space: FockSpace | None = None) -> float:
    """Outcome probability density ``tr[S G(x)]``, clamped at zero."""
    space = space or _space_of(S, T)
    _check_shape(space, S, T)
    G = povm_density(space, T, x)
    val = np.trace(as_matrix(S) @ G)
    if abs(val.imag) > 1e-12:
        log.warning("prob_density: imaginary part %.3e", val.imag)
    if val.real < 0:
        log.warning("prob_density: clamped negative value %.3e to 0", val.real)
        return 0.0
    return float(val.real)


def _mode_superop(K: int, q_rule, p_rule) -> np.ndarray:
    """``sum_x w D(x) (.) D(x)^+`` for one mode as a ``(K^2, K^2)`` matrix on (row, col) pairs."""
    (qx, qw), (px, pw) = q_rule, p_rule
    qq, pp = np.meshgrid(qx, px, indexing="ij")
    w = np.outer(qw, pw).ravel()
    D = mode_weyl(K, qq.ravel(), pp.ravel()).reshape(-1, K * K)
    S = ((w[:, None] * D).T @ D.conj()).reshape(K, K, K, K)  # [m, n, M, N]
    return S.transpose(0, 2, 1, 3).reshape(K * K, K * K)


def _apply_mode(X: np.ndarray, S: np.ndarray, k: int, d: int, K: int) -> np.ndarray:
    X = np.moveaxis(X, (k, d + k), (0, 1))
    shape = X.shape
    Y = (S @ X.reshape(K * K, -1)).reshape(shape)
    return np.moveaxis(Y, (0, 1), (k, d + k))


def tensor_sum(space: FockSpace, T, rules) -> np.ndarray:
    """``sum_x w(x) D(x) T D(x)^+`` over a tensor grid.

    ``rules`` holds one ``(nodes, weights)`` pair per coordinate in
    ``(q_1..q_d, p_1..p_d)`` order. The sum factorizes over modes, so it is
    evaluated one mode at a time on the product basis with per-mode cutoff
    ``n_cut`` and then restricted to the total-quanta space.
    """
    d, K = space.d, space.n_cut + 1
    occ = space.indices
    at = tuple(occ[:, k][:, None] for k in range(d)) + tuple(occ[:, k][None, :] for k in range(d))
    X = np.zeros((K,) * (2 * d), dtype=complex)
    X[at] = as_matrix(T)
    for k in range(d):
        X = _apply_mode(X, _mode_superop(K, rules[k], rules[d + k]), k, d, K)
    return X[at]


def box_operator(space: FockSpace, T, box: Box, quad: QuadratureRule) -> np.ndarray:
    """Tensor Gauss-Legendre quadrature of the operator density over ``box``."""
    return tensor_sum(space, T, quad.axis_rules(box)) / (2 * math.pi) ** space.d


def pointwise_operator(space: FockSpace, T, pts: np.ndarray, wts: np.ndarray) -> np.ndarray:
    """``sum_k w_k G(x_k)`` over explicit nodes."""
    T = as_matrix(T)
    d = space.d
    nt = support_level(space, T)
    mt = _leading(space, nt)
    T = T[:mt, :mt]
    fac = _factor(T)
    parts = []
    for sl in _chunks(len(pts), space.dim * mt):
        D = weyl_matrices(space, pts[sl, :d], pts[sl, d:], cols=nt)
        if fac is None:
            G = D @ T @ D.conj().transpose(0, 2, 1)
            parts.append(np.tensordot(wts[sl], G, axes=1))
            continue
        lam, V = fac
        Y = np.moveaxis(D @ V, 1, 0).reshape(space.dim, -1)
        coef = np.outer(wts[sl], lam).ravel()
        parts.append((Y * coef) @ Y.conj().T)
    if not parts:
        return np.zeros((space.dim, space.dim), dtype=complex)
    return np.sum(parts, axis=0) / (2 * math.pi) ** d


def measure_region(space: FockSpace, T, Z, quad: QuadratureRule) -> np.ndarray:
    """``E_T(Z)``: quadrature of the operator density over the region ``Z``."""
    _check_shape(space, T)
    if Z.d is not None and Z.d != space.d:
        raise RegionError(f"region has d={Z.d} but space has d={space.d}")
    if quad.bbox is not None:
        check_covers(quad.bbox, Z)
    if isinstance(Z, Union):
        out = np.zeros((space.dim, space.dim), dtype=complex)
        for member in Z.members:
            out += measure_region(space, T, member, quad)
        return out
    if isinstance(Z, Box):
        return box_operator(space, T, Z, quad)
    if isinstance(Z, Ball):
        pts, wts = quad.ball_points(Z)
        return pointwise_operator(space, T, pts, wts)
    raise RegionError(f"unknown region type {type(Z).__name__}")


def outcome_probability(S, T, Z, quad: QuadratureRule, space: FockSpace | None = None) -> float:
    """``tr[S E_T(Z)]`` clamped to ``[0, 1]``."""
    space = space or _space_of(S, T)
    E = measure_region(space, T, Z, quad)
    val = float(np.trace(as_matrix(S) @ E).real)
    if val < 0 or val > 1:
        log.warning("outcome_probability: clamped %.3e into [0, 1]", val)
    return min(max(val, 0.0), 1.0)


def _default_guard(space: FockSpace, g: GalileiElement) -> int:
    if not np.any(g.a) and not np.any(g.v):
        return 0  # rotations preserve total quanta
    return 12 if space.d == 1 else 6


def covariance_panel(space: FockSpace, T, elements, Z, quad: QuadratureRule, guard: int | None = None) -> list[float]:
    """``||U_g E_T(Z) U_g^+ - E_T(g.Z)||`` for each ``g`` in ``elements``.

    The left side is computed on a larger cutoff ``n_cut + guard`` and then
    restricted, so truncation of ``U_g`` near the cutoff does not leak into
    the compared block. The right side is an independent quadrature over the
    transformed region.
    """
    _check_shape(space, T)
    m = space.mass
    out = []
    cache = {}
    for g in elements:
        band = _default_guard(space, g) if guard is None else guard
        work = space.with_cutoff(space.n_cut + band)
        if band not in cache:
            cache[band] = measure_region(work, embed(as_matrix(T), space, work), Z, quad)
        U = rep_operator(work, g, m)
        lhs = compress(U @ cache[band] @ U.conj().T, work, space)
        rhs = measure_region(space, T, transform_region(g, Z, m), transform_rule(g, quad, m))
        out.append(float(np.linalg.norm(lhs - rhs, 2)))
    return out


def covariance_residual(space: FockSpace, T, g: GalileiElement, Z, quad: QuadratureRule, guard: int | None = None) -> float:
    if not np.any(g.a) and not np.any(g.v) and np.allclose(g.R, np.eye(g.d)):
        return 0.0
    return covariance_panel(space, T, [g], Z, quad, guard)[0]


@dataclass(frozen=True)
class Marginal:
    slabs: np.ndarray  # (n, d, 2)
    masses: np.ndarray  # outcome probabilities per slab
    pointwise: np.ndarray  # same masses from pointwise density quadrature
    gap: float


def marginal_position(S, T, slabs, quad: QuadratureRule, p_half_width: float | None = None) -> Marginal:
    """Position marginal on slabs, integrating momentum over ``[-w, w]^d``.

    Two routes are compared: pointwise quadrature of the probability density
    and ``tr[S E_T(slab x momentum box)]``. The latter is returned.
    """
    space = _space_of(S, T)
    d = space.d
    w = default_half_width(space.n_cut) if p_half_width is None else p_half_width
    slabs = np.asarray(slabs, dtype=float).reshape(-1, d, 2)
    p_bounds = np.tile([-w, w], (d, 1))
    masses, pointwise = [], []
    for slab in slabs:
        box = Box(np.vstack([slab, p_bounds]))
        masses.append(float(np.trace(as_matrix(S) @ measure_region(space, T, box, quad)).real))
        pts, wts = quad.box_points(box)
        pointwise.append(float(wts @ prob_density_grid(S, T, pts, space)))
    masses, pointwise = np.array(masses), np.array(pointwise)
    return Marginal(slabs, masses, pointwise, float(np.max(np.abs(masses - pointwise))) if len(masses) else 0.0)


def _density_max(S, T, space: FockSpace, grid_pts: np.ndarray, bbox: Box, n_starts: int = 4) -> float:
    """Grid maximum of the density, polished by local searches from the best nodes."""
    vals = prob_density_grid(S, T, grid_pts, space)
    best = float(vals.max())
    lo, hi = bbox.bounds[:, 0], bbox.bounds[:, 1]
    for k in np.argsort(vals)[-n_starts:]:
        res = minimize(
            lambda x: -prob_density_grid(S, T, np.clip(x, lo, hi)[None, :], space)[0],
            grid_pts[k],
            method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best


def sample(
    S,
    T,
    n: int,
    seed: int = 0,
    bbox: Box | None = None,
    quad: QuadratureRule | None = None,
    batch: int = 1 << 16,
) -> np.ndarray:
    """Draw ``n`` outcomes ``(q, p)`` by rejection against a uniform envelope on ``bbox``.

    Returns an array of shape ``(n, 2d)``. The envelope height is the grid
    maximum of the density, refined by local search and padded by 10%,
    capped at ``(2 pi)^-d`` (which bounds every density).
    """
    space = _space_of(S, T)
    d = space.d
    bbox = bbox or big_box(d, default_half_width(space.n_cut))
    quad = quad or QuadratureRule(60 if d == 1 else 8)
    covered = float(np.trace(as_matrix(S) @ measure_region(space, T, bbox, quad)).real)
    if covered < 0.999:
        raise SamplingError(f"density integrates to {covered:.6f} < 0.999 over the bounding box")
    envelope = min(ENVELOPE_SAFETY * _density_max(S, T, space, quad.box_points(bbox)[0], bbox), (2 * math.pi) ** -d)
    lo, hi = bbox.bounds[:, 0], bbox.bounds[:, 1]
    rng = np.random.default_rng(seed)
    accepted = []
    have = 0
    while have < n:
        pts = lo + (hi - lo) * rng.random((batch, 2 * d))
        u = rng.random(batch) * envelope
        dens = prob_density_grid(S, T, pts, space)
        if np.any(dens > envelope):
            raise SamplingError(f"density {dens.max():.6g} exceeds envelope {envelope:.6g}")
        keep = pts[u < dens]
        accepted.append(keep)
        have += len(keep)
    return np.concatenate(accepted)[:n]
