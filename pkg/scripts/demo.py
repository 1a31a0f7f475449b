"""Short tour: Husimi density, a disc probability, sampling, and the d=3 report."""

import math

import numpy as np

from phasepovm import (
    Ball,
    InvariantBlocks,
    PhasePoint,
    QuadratureRule,
    SuiteConfig,
    build_space,
    outcome_probability,
    prob_density,
    sample,
    theorem_suite,
    vacuum,
)

s = build_space(1, 20)
v = vacuum(s)
print("Husimi at origin  ", prob_density(v, v, PhasePoint([0.0], [0.0])), "vs", 1 / (2 * math.pi))
print("Husimi at (2, 0)  ", prob_density(v, v, PhasePoint([2.0], [0.0])), "vs", math.exp(-2) / (2 * math.pi))
p = outcome_probability(v, v, Ball([0.0, 0.0], 2.0), QuadratureRule(40, scheme="polar"))
print("P(|x| <= 2)       ", p, "vs", 1 - math.exp(-2))

x = sample(v, v, 20_000, seed=1)
print("sample mean, var  ", x.mean(axis=0).round(4), x.var(axis=0).round(4))

rep = theorem_suite(SuiteConfig(d=3, n_cut=4, T=InvariantBlocks({0: np.diag([0.7, 0.3, 0.0])})))
for name, check in rep.checks.items():
    value = "skipped" if check.computed is None else f"{check.computed:.3e}"
    print(f"{name:30s} {value:>12s}  {'ok' if check.passed else 'FAIL'}")
