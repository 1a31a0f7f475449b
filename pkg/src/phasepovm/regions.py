"""Phase-space regions and the tensor Gauss-Legendre rules used to integrate over them.

Coordinates are ordered ``(q_1..q_d, p_1..p_d)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .galilei import GalileiElement, PhasePoint, act

MAX_NODES = 20_000_000
SCHEMES = ("gauss-legendre", "polar")


class RegionError(ValueError):
    """Invalid region, or a region not covered by the quadrature box."""


class QuadratureError(RuntimeError):
    """Quadrature rule failed its self-test or its size limits."""


@dataclass(frozen=True)
class Box:
    bounds: np.ndarray  # shape (2d, 2)

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] % 2:
            raise RegionError(f"box bounds must have shape (2d, 2), got {b.shape}")
        if not np.all(np.isfinite(b)) or np.any(b[:, 1] <= b[:, 0]):
            raise RegionError("box intervals must be finite and nonempty")
        b.flags.writeable = False
        object.__setattr__(self, "bounds", b)

    @property
    def d(self) -> int:
        return self.bounds.shape[0] // 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def bbox(self) -> "Box":
        return self


@dataclass(frozen=True)
class Ball:
    center: np.ndarray  # shape (2d,)
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        if c.size % 2 or not np.all(np.isfinite(c)):
            raise RegionError("ball center must have 2d finite coordinates")
        if not self.radius > 0:
            raise RegionError(f"ball radius must be positive, got {self.radius}")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def d(self) -> int:
        return self.center.size // 2

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.sum((pts - self.center) ** 2, axis=-1) <= self.radius**2

    def bbox(self) -> Box:
        return Box(np.stack([self.center - self.radius, self.center + self.radius], axis=1))


@dataclass(frozen=True)
class Union:
    """Finite union of pairwise disjoint boxes and balls; may be empty."""

    members: tuple = ()
    d: int = field(default=None)

    def __post_init__(self):
        members = tuple(self.members)
        for m in members:
            if not isinstance(m, (Box, Ball)):
                raise RegionError("union members must be boxes or balls")
        dims = {m.d for m in members}
        if self.d is not None:
            dims.add(self.d)
        if len(dims) > 1:
            raise RegionError("union members have mixed dimensions")
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                if _overlap(a, b):
                    raise RegionError("union members overlap")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "d", dims.pop() if dims else None)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for m in self.members:
            out |= m.contains(pts)
        return out


PhaseRegion = Box | Ball | Union


def _overlap(a, b) -> bool:
    if isinstance(a, Ball) and isinstance(b, Box):
        a, b = b, a
    if isinstance(a, Box) and isinstance(b, Box):
        return bool(np.all(np.minimum(a.bounds[:, 1], b.bounds[:, 1]) > np.maximum(a.bounds[:, 0], b.bounds[:, 0])))
    if isinstance(a, Box):
        nearest = np.clip(b.center, a.bounds[:, 0], a.bounds[:, 1])
        return float(np.linalg.norm(nearest - b.center)) < b.radius
    return float(np.linalg.norm(a.center - b.center)) < a.radius + b.radius


def region_dim(Z) -> int | None:
    return Z.d


def is_signed_permutation(R: np.ndarray, tol: float = 1e-12) -> bool:
    A = np.abs(R)
    return bool(np.all((A < tol) | (np.abs(A - 1) < tol)) and np.allclose(A.sum(axis=0), 1, atol=tol))


def _transform_box(g: GalileiElement, box: Box, mass: float) -> Box:
    if not is_signed_permutation(g.R):
        raise RegionError("boxes map to boxes only under axis-permuting rotations")
    d = box.d
    R = np.rint(g.R)
    out = np.empty_like(box.bounds)
    for part, shift in ((0, g.a), (1, mass * g.v)):
        src = box.bounds[part * d : (part + 1) * d]
        for i in range(d):
            j = int(np.flatnonzero(R[i])[0])
            lo, hi = sorted(R[i, j] * src[j])
            out[part * d + i] = (shift[i] + lo, shift[i] + hi)
    return Box(out)


def transform_region(g: GalileiElement, Z, mass: float):
    """Image of ``Z`` under the phase-space action of ``g``.

    The action is an isometry of (q, p) space for any mass, so balls stay
    balls. Boxes are only representable under signed-permutation rotations.
    """
    if isinstance(Z, Ball):
        c = act(g, PhasePoint(Z.center[: Z.d], Z.center[Z.d :]), mass)
        return Ball(c.as_array(), Z.radius)
    if isinstance(Z, Box):
        return _transform_box(g, Z, mass)
    if isinstance(Z, Union):
        return Union(tuple(transform_region(g, m, mass) for m in Z.members), d=Z.d)
    raise RegionError(f"unknown region type {type(Z).__name__}")


@functools.lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _self_test(n: int, tol: float = 1e-12):
    x, w = _leggauss(n)
    for k in range(0, min(2 * n - 1, 40) + 1):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        if abs(np.dot(w, x**k) - exact) > tol * max(1.0, exact):
            raise QuadratureError(f"{n}-node Gauss-Legendre rule fails on x^{k}")


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule.

    ``nodes`` is one count for every coordinate or a tuple with one count per
    coordinate. Boxes are integrated directly; balls use indicator weighting
    on ``bbox`` (default: the ball's own bounding box). The ``polar`` scheme
    integrates d=1 balls in polar coordinates instead: Gauss-Legendre in the
    radius and the trapezoid rule (``angular_nodes`` points) in the angle.
    """

    nodes: int | tuple = 60
    scheme: str = "gauss-legendre"
    bbox: Box | None = None
    angular_nodes: int | None = None

    def __post_init__(self):
        counts = (self.nodes,) if np.isscalar(self.nodes) else tuple(self.nodes)
        if any(int(n) != n or n < 2 for n in counts):
            raise QuadratureError(f"node counts must be integers >= 2, got {self.nodes}")
        if self.scheme not in SCHEMES:
            raise QuadratureError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.bbox is not None and not isinstance(self.bbox, Box):
            object.__setattr__(self, "bbox", Box(self.bbox))
        for n in set(counts):
            _self_test(int(n))

    def counts(self, ncoord: int) -> tuple[int, ...]:
        if np.isscalar(self.nodes):
            return (int(self.nodes),) * ncoord
        if len(self.nodes) != ncoord:
            raise QuadratureError(f"need {ncoord} node counts, got {len(self.nodes)}")
        return tuple(int(n) for n in self.nodes)

    def axis_rules(self, box: Box) -> list[tuple[np.ndarray, np.ndarray]]:
        counts = self.counts(box.bounds.shape[0])
        return [gauss_legendre(n, lo, hi) for n, (lo, hi) in zip(counts, box.bounds)]

    def box_points(self, box: Box) -> tuple[np.ndarray, np.ndarray]:
        """All tensor nodes of ``box`` as ``(points (N, 2d), weights (N,))``."""
        rules = self.axis_rules(box)
        total = math.prod(len(x) for x, _ in rules)
        if total > MAX_NODES:
            raise QuadratureError(f"{total} quadrature nodes exceed limit {MAX_NODES}")
        grids = np.meshgrid(*[x for x, _ in rules], indexing="ij")
        wgrids = np.meshgrid(*[w for _, w in rules], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        return pts, wts

    def ball_points(self, ball: Ball) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights inside ``ball`` (points outside are dropped)."""
        if self.scheme == "polar":
            if ball.d != 1:
                raise QuadratureError("polar scheme supports d=1 balls only")
            n_r = self.counts(2)[0]
            n_t = self.angular_nodes or 2 * n_r
            r, wr = gauss_legendre(n_r, 0.0, ball.radius)
            t = 2 * math.pi * np.arange(n_t) / n_t
            rr, tt = np.meshgrid(r, t, indexing="ij")
            pts = ball.center + np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
            wts = np.repeat(wr * r, n_t) * (2 * math.pi / n_t)
            return pts, wts
        box = self.bbox if self.bbox is not None else ball.bbox()
        check_covers(box, ball)
        pts, wts = self.box_points(box)
        inside = ball.contains(pts)
        return pts[inside], wts[inside]


def check_covers(box: Box, Z):
    """Raise :class:`RegionError` if ``Z`` is not inside ``box``."""
    inner = Z.bbox() if isinstance(Z, Ball) else Z
    if isinstance(Z, Union):
        for m in Z.members:
            check_covers(box, m)
        return
    lo_ok = np.all(inner.bounds[:, 0] >= box.bounds[:, 0] - 1e-12)
    hi_ok = np.all(inner.bounds[:, 1] <= box.bounds[:, 1] + 1e-12)
    if not (lo_ok and hi_ok):
        raise RegionError("region extends outside the quadrature bounding box")


def transform_rule(g: GalileiElement, quad: QuadratureRule, mass: float) -> QuadratureRule:
    """Carry an explicit bounding box along with the transformed region."""
    if quad.bbox is None:
        return quad
    return QuadratureRule(quad.nodes, quad.scheme, _transform_box(g, quad.bbox, mass), quad.angular_nodes)


def default_half_width(n_cut: int) -> float:
    """Half-width ``sqrt(2 n_cut) + 6`` covering truncated-state densities."""
    return math.sqrt(2 * n_cut) + 6.0


def big_box(d: int, half_width: float) -> Box:
    return Box(np.tile([-half_width, half_width], (2 * d, 1)))


def grid_partition(box: Box, splits) -> list[Box]:
    """Split ``box`` into a grid of cells; ``splits`` is an int or one count per coordinate."""
    ncoord = box.bounds.shape[0]
    splits = (splits,) * ncoord if np.isscalar(splits) else tuple(splits)
    edges = [np.linspace(lo, hi, s + 1) for s, (lo, hi) in zip(splits, box.bounds)]
    cells = []
    for combo in np.ndindex(*splits):
        cells.append(Box(np.array([[e[i], e[i + 1]] for e, i in zip(edges, combo)])))
    return cells
