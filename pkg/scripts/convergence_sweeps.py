"""Convergence sweeps behind the tolerance table in ``phasepovm.verify``.

Each sweep prints one table; pass section names to run a subset:

    python scripts/convergence_sweeps.py [normalization] [covariance] [formal] [ball]
"""

import math
import sys
import time

import numpy as np

from phasepovm.fockspace import build_space, projector, vacuum
from phasepovm.galilei import GalileiElement
from phasepovm.povm import covariance_panel, measure_region, outcome_probability
from phasepovm.regions import Ball, Box, QuadratureRule, big_box, default_half_width
from phasepovm.rotinv import group_average, quarter_turns
from phasepovm.verify import formal_degree_integral


def normalization():
    print("# ||E(X) - I|| for T = vacuum on the big box, by cutoff and nodes")
    print("n_cut  " + "  ".join(f"nodes={n:<4d}" for n in (20, 40, 60, 80)))
    for n_cut in (4, 10, 16):
        s = build_space(1, n_cut)
        box = big_box(1, default_half_width(n_cut))
        row = [np.linalg.norm(measure_region(s, vacuum(s), box, QuadratureRule(n)) - np.eye(s.dim), 2)
               for n in (20, 40, 60, 80)]
        print(f"{n_cut:5d}  " + "  ".join(f"{r:10.2e}" for r in row))


def covariance():
    print("# translation/boost covariance residual (d=1, n_cut=16, ball r=1) by guard band")
    s = build_space(1, 16)
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    T = np.zeros((s.dim, s.dim), dtype=complex)
    T[:6, :6] = A @ A.conj().T
    T /= np.trace(T).real
    panel = [GalileiElement([0.5], [0.0]), GalileiElement([0.0], [-0.7]), GalileiElement([1.0], [1.0])]
    for guard in (0, 4, 8, 12, 16):
        vac = max(covariance_panel(s, vacuum(s), panel, Ball([0, 0], 1.0), QuadratureRule(60), guard))
        mix = max(covariance_panel(s, T, panel, Ball([0, 0], 1.0), QuadratureRule(60), guard))
        print(f"guard={guard:2d}  vacuum {vac:9.2e}  low-level mixed {mix:9.2e}")
    print("# rotation covariance (d=3, n_cut=4, ball r=1.5) by nodes")
    s3 = build_space(3, 4)
    rots = [GalileiElement(np.zeros(3), np.zeros(3), R) for R in quarter_turns()]
    bad = projector(s3, (1, 0, 0)).matrix
    good = group_average(s3, bad, 64)
    for nodes in (4, 6, 8, 10):
        t = time.perf_counter()
        quad = QuadratureRule(nodes)
        g = max(covariance_panel(s3, good, rots, Ball(np.zeros(6), 1.5), quad))
        b = max(covariance_panel(s3, bad, rots, Ball(np.zeros(6), 1.5), quad))
        print(f"nodes={nodes:2d}  invariant {g:9.2e}  non-invariant {b:9.2e}  ({time.perf_counter() - t:.1f}s)")


def formal():
    print("# formal degree |ratio - 1| (d=1, n_cut=16) by nodes and half-width")
    s = build_space(1, 16)
    for k in (0, 2, 4, 8):
        phi = np.zeros(s.dim, dtype=complex)
        phi[k] = 1.0
        cells = []
        for nodes, hw in ((60, None), (60, 14.0), (100, 14.0), (140, 18.0)):
            try:
                cells.append(f"{abs(formal_degree_integral(s, phi, nodes=nodes, half_width=hw) - 1):9.1e}")
            except RuntimeError:
                cells.append(f"{'tail':>9s}")
        print(f"|{k}>  " + "  ".join(cells) + "   [60/default, 60/14, 100/14, 140/18]")


def ball():
    print("# P(ball r=2) - (1 - e^-2), vacuum, by scheme and nodes")
    s = build_space(1, 20)
    v = vacuum(s)
    exact = 1 - math.exp(-2)
    for nodes in (20, 40, 60, 120):
        ind = outcome_probability(v, v, Ball([0, 0], 2.0), QuadratureRule(nodes)) - exact
        pol = outcome_probability(v, v, Ball([0, 0], 2.0), QuadratureRule(nodes, scheme="polar")) - exact
        print(f"nodes={nodes:3d}  indicator {ind:+9.1e}  polar {pol:+9.1e}")


SWEEPS = {"normalization": normalization, "covariance": covariance, "formal": formal, "ball": ball}

if __name__ == "__main__":
    for name in sys.argv[1:] or SWEEPS:
        SWEEPS[name]()
        print()
