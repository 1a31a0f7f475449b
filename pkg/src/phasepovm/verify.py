"""Numerical checks of the identities behind covariant phase-space POVMs.

Every check lands in a :class:`VerificationReport` entry carrying the
identity it tests, the computed and expected values, the tolerance and the
settings that produced it. Tolerances live in :data:`TOLERANCES`; they were
fixed from the convergence sweeps in ``scripts/``.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .fockspace import DensityMatrix, FockSpace, as_matrix, build_space, validate_density, vacuum
from .galilei import GalileiElement, PhasePoint, weyl_matrices
from .povm import covariance_panel, measure_region, povm_density, tensor_sum
from .regions import (
    Ball,
    Box,
    QuadratureError,
    QuadratureRule,
    big_box,
    default_half_width,
    gauss_legendre,
    grid_partition,
)
from .rotinv import (
    InvariantBlocks,
    build_invariant,
    extract_blocks,
    invariance_residual,
    quarter_turns,
    rotation_operator,
)

log = logging.getLogger(__name__)

TOLERANCES = {
    "density_matrix": 1e-10,
    "trace_identity": 1e-12,
    "invariance": 1e-10,
    "covariance_translation_boost": 1e-5,
    "covariance_rotation": 1e-5,
    "positivity": 1e-10,
    "normalization": 1e-6,
    "additivity": 1e-8,
    "formal_degree": 1e-4,
    "formal_degree_panel": 1e-3,
    "round_trip": 1e-10,
    "haar_agreement": 1e-3,
}

# (check, n_cut, nodes) -> tolerance, for settings where the generic value does not apply
OVERRIDES: dict[tuple, float] = {}


def tolerance(check: str, n_cut: int | None = None, nodes: int | None = None) -> float:
    return OVERRIDES.get((check, n_cut, nodes), TOLERANCES[check])


@dataclass
class Check:
    anchor: str
    computed: float | None
    expected: float | None
    tolerance: float
    passed: bool
    settings: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def add(self, name, anchor, computed, expected, tol, passed=None, **settings):
        if passed is None:
            passed = abs(computed - expected) <= tol
        self.checks[name] = Check(anchor, _num(computed), _num(expected), tol, bool(passed), settings)

    def skip(self, name, anchor, reason, **settings):
        self.checks[name] = Check(anchor, None, None, 0.0, True, {"skipped": reason, **settings})

    def merge(self, other: "VerificationReport"):
        self.checks.update(other.checks)

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {
                name: {
                    "anchor": c.anchor,
                    "computed": c.computed,
                    "expected": c.expected,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                    "settings": c.settings,
                }
                for name, c in self.checks.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def _num(x):
    return None if x is None else float(x)


def octahedral_rotations() -> list[np.ndarray]:
    """The 24 proper rotations mapping the cube to itself (equal-weight Haar rule)."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            R = np.zeros((3, 3))
            for i, j in enumerate(perm):
                R[i, j] = signs[i]
            if np.linalg.det(R) > 0:
                out.append(R)
    return out


def _overlap_integral_1d(space, phi, a_rule, v_rule, m):
    (ax, aw), (vx, vw) = a_rule, v_rule
    aa, vv = np.meshgrid(ax, vx, indexing="ij")
    w = np.outer(aw, vw).ravel()
    D = weyl_matrices(space, aa.reshape(-1, 1), m * vv.reshape(-1, 1))
    # U_(a, v) = exp(-i m a v / 2) D(a, m v); the phase drops out of |.|^2
    ov = np.einsum("a,xab,b->x", phi.conj(), D, phi)
    return float(w @ np.abs(ov) ** 2) * m / (2 * math.pi)


def _overlap_integral_nd(space, phi, psi, a_rules, v_rules, m):
    d = space.d
    p_rules = [(m * x, w) for x, w in v_rules]
    X = tensor_sum(space, np.outer(psi, psi.conj()), list(a_rules) + p_rules)
    return float((phi.conj() @ X @ phi).real) * (m / (2 * math.pi)) ** d


def formal_degree_integral(
    space: FockSpace,
    phi,
    nodes: int = 60,
    half_width: float | None = None,
    mass: float | None = None,
    tail_tol: float = 1e-6,
    n_haar: int = 120,
    seed: int = 0,
) -> float:
    """``int |<phi, U_(a,v,R) phi>|^2 (m / 2pi)^d da dv dR / ||phi||^4``.

    Square integrability with unit formal degree means this ratio is 1 for
    every ``phi``. ``a`` ranges over ``[-w, w]^d`` and ``v`` over
    ``[-w/m, w/m]^d``; the same integral on the 0.8-scaled box estimates the
    tail, and a tail above ``tail_tol`` raises :class:`QuadratureError`.

    For d=3 the rotation average uses the 24-element octahedral rule and is
    cross-checked against ``n_haar`` random Haar rotations.
    """
    phi = np.asarray(phi, dtype=complex)
    m = space.mass if mass is None else mass
    w = default_half_width(space.n_cut) if half_width is None else half_width
    norm4 = float(np.vdot(phi, phi).real) ** 2

    def integral(scale, rotations):
        a_rules = [gauss_legendre(nodes, -scale * w, scale * w)] * space.d
        v_rules = [gauss_legendre(nodes, -scale * w / m, scale * w / m)] * space.d
        if space.d == 1:
            return _overlap_integral_1d(space, phi, a_rules[0], v_rules[0], m)
        vals = [
            _overlap_integral_nd(space, phi, rotation_operator(space, R) @ phi, a_rules, v_rules, m)
            for R in rotations
        ]
        return float(np.mean(vals))

    panel = octahedral_rotations() if space.d == 3 else [None]
    full = integral(1.0, panel)
    inner = integral(0.8, panel)
    tail = abs(full - inner) / norm4
    if tail > tail_tol:
        raise QuadratureError(f"tail mass estimate {tail:.3e} exceeds {tail_tol:.1e}; enlarge the box")
    if space.d == 3:
        rng = np.random.default_rng(seed)
        randoms = Rotation.random(n_haar, random_state=rng).as_matrix()
        gap = abs(integral(1.0, randoms) - full) / norm4
        if gap > TOLERANCES["haar_agreement"]:
            raise QuadratureError(f"octahedral and random Haar averages differ by {gap:.3e}")
        log.info("formal degree: Haar rule gap %.3e", gap)
    return full / norm4


def _check_partition(partition) -> Box:
    if not partition or not all(isinstance(c, Box) for c in partition):
        raise ValueError("partition must be a nonempty list of boxes")
    lo = np.min([c.bounds[:, 0] for c in partition], axis=0)
    hi = np.max([c.bounds[:, 1] for c in partition], axis=0)
    outer = Box(np.stack([lo, hi], axis=1))
    for a, b in itertools.combinations(partition, 2):
        if np.all(np.minimum(a.bounds[:, 1], b.bounds[:, 1]) > np.maximum(a.bounds[:, 0], b.bounds[:, 0]) + 1e-12):
            raise ValueError("partition cells overlap")
    covered = sum(c.volume for c in partition)
    if abs(covered - outer.volume) > 1e-9 * outer.volume:
        raise ValueError("partition cells do not cover their bounding box")
    return outer


def _adjacent_pairs(partition):
    pairs = []
    for i, j in itertools.combinations(range(len(partition)), 2):
        a, b = partition[i].bounds, partition[j].bounds
        same = np.all(np.isclose(a, b), axis=1)
        if same.sum() != len(a) - 1:
            continue
        k = int(np.flatnonzero(~same)[0])
        if np.isclose(a[k, 1], b[k, 0]) or np.isclose(b[k, 1], a[k, 0]):
            merged = a.copy()
            merged[k] = (min(a[k, 0], b[k, 0]), max(a[k, 1], b[k, 1]))
            pairs.append((i, j, Box(merged)))
    return pairs


def povm_axioms_report(space: FockSpace, T, partition, quad: QuadratureRule, seed: int = 0) -> VerificationReport:
    """Positivity per cell, cell sum against the identity, and additivity of one merge."""
    _check_partition(partition)
    T = as_matrix(T)
    settings = {"n_cut": space.n_cut, "nodes": quad.nodes, "cells": len(partition)}
    report = VerificationReport()
    cells = [measure_region(space, T, c, quad) for c in partition]

    lowest = math.inf
    for c, E in zip(partition, cells):
        lowest = min(lowest, float(np.linalg.eigvalsh(0.5 * (E + E.conj().T))[0]))
        center = c.bounds.mean(axis=1)
        G = povm_density(space, T, PhasePoint(center[: space.d], center[space.d :]))
        lowest = min(lowest, c.volume * float(np.linalg.eigvalsh(0.5 * (G + G.conj().T))[0]))
    tol = tolerance("positivity", space.n_cut, quad.nodes)
    report.add("positivity", "<phi, E(Z) phi> >= 0", lowest, 0.0, tol, passed=lowest >= -tol, **settings)

    defect = float(np.linalg.norm(np.sum(cells, axis=0) - np.eye(space.dim), 2))
    report.add("normalization", "E(X) = I", defect, 0.0, tolerance("normalization", space.n_cut, quad.nodes), **settings)

    pairs = _adjacent_pairs(partition)
    if not pairs:
        report.skip("additivity", "E(Z1 u Z2) = E(Z1) + E(Z2)", "no adjacent cells to merge", **settings)
    else:
        i, j, merged = pairs[np.random.default_rng(seed).integers(len(pairs))]
        gap = float(np.linalg.norm(measure_region(space, T, merged, quad) - cells[i] - cells[j], 2))
        report.add(
            "additivity", "E(Z1 u Z2) = E(Z1) + E(Z2)", gap, 0.0,
            tolerance("additivity", space.n_cut, quad.nodes), seed=seed, **settings,
        )
    return report


def default_translation_panel(d: int) -> list[GalileiElement]:
    """Three pure translations and three pure boosts along the first axis (plus mixes for d=3)."""
    e = np.eye(d)[0]
    z = np.zeros(d)
    return [
        GalileiElement(0.5 * e, z),
        GalileiElement(-0.8 * e, z),
        GalileiElement(1.0 * e, z),
        GalileiElement(z, 0.5 * e),
        GalileiElement(z, -0.7 * e),
        GalileiElement(z, 1.0 * e),
    ]


def rotation_elements() -> list[GalileiElement]:
    return [GalileiElement(np.zeros(3), np.zeros(3), R) for R in quarter_turns()]


@dataclass
class SuiteConfig:
    """Settings for :func:`theorem_suite`; ``None`` picks a d-dependent default."""

    d: int = 1
    n_cut: int = 10
    mass: float = 1.0
    T: object = None  # DensityMatrix, matrix, InvariantBlocks, or None for the vacuum
    nodes: int | None = None  # per-axis nodes for box cells
    splits: tuple | None = None  # partition of the big box
    cov_region: object = None
    cov_nodes: int | None = None
    rot_region: object = None
    rot_nodes: int | None = None
    translations: list | None = None
    guard: int | None = None
    formal_nodes: int | None = None
    seed: int = 0

    def resolved(self) -> "SuiteConfig":
        one = self.d == 1
        out = SuiteConfig(**self.__dict__)
        out.nodes = self.nodes or (40 if one else 60)
        out.splits = self.splits or ((4, 2) if one else (2, 2, 1, 1, 1, 1))
        out.cov_region = self.cov_region or (Ball([0.2, -0.1], 1.0) if one else Box([[-1, 1]] * 6))
        out.cov_nodes = self.cov_nodes or (60 if one else 12)
        out.rot_region = self.rot_region or Ball(np.zeros(2 * self.d), 1.5)
        out.rot_nodes = self.rot_nodes or 8
        out.translations = self.translations or default_translation_panel(self.d)
        out.formal_nodes = self.formal_nodes or (60 if one else 40)
        return out


def _resolve_T(space: FockSpace, T) -> np.ndarray:
    if T is None:
        return vacuum(space).matrix
    if isinstance(T, InvariantBlocks):
        return build_invariant(space, T).matrix
    return as_matrix(T)


def theorem_suite(config: SuiteConfig) -> VerificationReport:
    """End-to-end check that ``E_T`` is a covariant POVM for rotation-invariant ``T``."""
    cfg = config.resolved()
    space = build_space(cfg.d, cfg.n_cut, cfg.mass)
    T = _resolve_T(space, cfg.T)
    base = {"n_cut": cfg.n_cut, "d": cfg.d, "mass": cfg.mass, "seed": cfg.seed}
    report = VerificationReport()

    vr = validate_density(T, tolerance("density_matrix"))
    worst = max(vr.hermiticity_defect, -vr.min_eigenvalue, vr.trace_defect)
    report.add("density_matrix", "T >= 0, tr T = 1", worst, 0.0, vr.tol, passed=vr.passed, **base)

    if cfg.d == 3:
        total = extract_blocks(space, T).trace_sum()
        report.add("trace_identity", "sum_l (2l+1) tr T_l = 1", total, 1.0, tolerance("trace_identity"), **base)
        report.add("invariance", "T U_R = U_R T", invariance_residual(space, T, cfg.seed), 0.0,
                   tolerance("invariance"), **base)
    else:
        report.add("trace_identity", "tr T = 1", float(np.trace(T).real), 1.0, tolerance("trace_identity"), **base)
        report.skip("invariance", "T U_R = U_R T", "d=1: rotation group trivial", **base)

    cov_quad = QuadratureRule(cfg.cov_nodes)
    res = covariance_panel(space, T, cfg.translations, cfg.cov_region, cov_quad, cfg.guard)
    report.add("covariance_translation_boost", "U_g E(Z) U_g* = E(g.Z)", max(res), 0.0,
               tolerance("covariance_translation_boost", cfg.n_cut, cfg.cov_nodes),
               nodes=cfg.cov_nodes, elements=len(res), guard="auto" if cfg.guard is None else cfg.guard, **base)

    if cfg.d == 3:
        rot = covariance_panel(space, T, rotation_elements(), cfg.rot_region, QuadratureRule(cfg.rot_nodes))
        report.add("covariance_rotation", "U_R E(Z) U_R* = E(R.Z)", max(rot), 0.0,
                   tolerance("covariance_rotation", cfg.n_cut, cfg.rot_nodes), nodes=cfg.rot_nodes, **base)
    else:
        report.skip("covariance_rotation", "U_R E(Z) U_R* = E(R.Z)", "d=1: rotation group trivial", **base)

    outer = big_box(cfg.d, default_half_width(cfg.n_cut))
    report.merge(povm_axioms_report(space, T, grid_partition(outer, cfg.splits), QuadratureRule(cfg.nodes), cfg.seed))

    phi = np.zeros(space.dim, dtype=complex)
    phi[0] = 1.0
    ratio = formal_degree_integral(space, phi, nodes=cfg.formal_nodes, seed=cfg.seed)
    report.add("formal_degree", "int |<phi, U_g phi>|^2 dg = ||phi||^4", ratio, 1.0,
               tolerance("formal_degree", cfg.n_cut, cfg.formal_nodes), nodes=cfg.formal_nodes, **base)

    T_back = (2 * math.pi) ** cfg.d * povm_density(space, T, PhasePoint.origin(cfg.d))
    gap = float(np.linalg.norm(T_back - T, 2))
    report.add("round_trip", "T = (2 pi)^d G(0)", gap, 0.0, tolerance("round_trip"), **base)
    return report


def round_trip(space: FockSpace, T) -> tuple[np.ndarray, float]:
    """Recover ``T`` from the operator density at the origin and rebuild it.

    For d=3 the recovered operator is pushed through its invariant blocks
    (extract, validate, reassemble), so a non-invariant ``T`` does not
    survive the round trip.
    """
    T = as_matrix(T)
    T_back = (2 * math.pi) ** space.d * povm_density(space, T, PhasePoint.origin(space.d))
    if space.d == 3:
        rebuilt = build_invariant(space, extract_blocks(space, T_back)).matrix
    else:
        rebuilt = DensityMatrix(space, T_back).matrix
    return rebuilt, float(np.linalg.norm(rebuilt - T, 2))
