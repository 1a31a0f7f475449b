"""Guard-band sweep of the projective relation U1 U2 = w U12 on the truncated space.

Prints the worst residual over random pairs (|a|, |v| <= 1, d=1) for each
cutoff and guard band, for the product-of-exponentials representation and
for the single-exponential Weyl form.

    python scripts/projective_sweep.py [--pairs 20] [--seed 7]
"""

import argparse

import numpy as np

from phasepovm.fockspace import build_space, expi, position_momentum
from phasepovm.galilei import GalileiElement, compose, multiplier, projective_residual


def weyl_form(space, g):
    Q, P = position_momentum(space, 1)
    m = space.mass
    return np.exp(-0.5j * m * g.a[0] * g.v[0]) * expi(m * g.v[0] * Q - g.a[0] * P)


def weyl_residual(space, g1, g2, guard):
    diff = weyl_form(space, g1) @ weyl_form(space, g2) - multiplier(g1, g2, space.mass) * weyl_form(space, compose(g1, g2))
    keep = space.level_mask(space.n_cut - guard)
    return float(np.linalg.norm(diff[np.ix_(keep, keep)], 2))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--cutoffs", type=int, nargs="+", default=[16, 24, 32, 40])
    ap.add_argument("--bands", type=int, nargs="+", default=[4, 8, 12, 16, 20])
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pairs = [
        (GalileiElement(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)),
         GalileiElement(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)))
        for _ in range(args.pairs)
    ]
    print(f"{'form':8s} {'n_cut':>5s} " + " ".join(f"band={b:<3d}" for b in args.bands))
    for name, resid in (("product", projective_residual), ("weyl", weyl_residual)):
        for n_cut in args.cutoffs:
            space = build_space(1, n_cut)
            row = []
            for band in args.bands:
                if band > n_cut:
                    row.append(f"{'-':>9s}")
                    continue
                row.append(f"{max(resid(space, g1, g2, band) for g1, g2 in pairs):9.1e}")
            print(f"{name:8s} {n_cut:5d} " + " ".join(row))


if __name__ == "__main__":
    main()
