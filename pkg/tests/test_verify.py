import json

import numpy as np
import pytest

from phasepovm.fockspace import build_space, projector, vacuum
from phasepovm.regions import QuadratureError, QuadratureRule, big_box, default_half_width, grid_partition
from phasepovm.rotinv import InvariantBlocks
from phasepovm.verify import (
    TOLERANCES,
    SuiteConfig,
    VerificationReport,
    formal_degree_integral,
    octahedral_rotations,
    povm_axioms_report,
    round_trip,
    theorem_suite,
    tolerance,
)

CHECK_FIELDS = {"anchor", "computed", "expected", "tolerance", "passed", "settings"}


def unit(space, k):
    phi = np.zeros(space.dim, dtype=complex)
    phi[k] = 1.0
    return phi


def test_formal_degree_vacuum(space1):
    assert formal_degree_integral(space1, unit(space1, 0)) == pytest.approx(1.0, abs=1e-4)


def test_formal_degree_excited_and_scaling(space1):
    phi = unit(space1, 1)
    r = formal_degree_integral(space1, phi)
    assert r == pytest.approx(1.0, abs=1e-3)
    assert formal_degree_integral(space1, 2 * phi) == pytest.approx(r, rel=1e-12)


def test_formal_degree_other_mass():
    s = build_space(1, 10, mass=2.0)
    phi = unit(s, 0) + 0.5j * unit(s, 2)
    assert formal_degree_integral(s, phi) == pytest.approx(1.0, abs=1e-6)


def test_formal_degree_box_too_small(space1):
    with pytest.raises(QuadratureError):
        formal_degree_integral(space1, unit(space1, 0), half_width=2.0)


def test_formal_degree_d3_rotation_average():
    s = build_space(3, 2)
    phi = unit(s, s.flat_index((1, 0, 0))) + 0.4 * unit(s, 0)
    assert formal_degree_integral(s, phi, nodes=30) == pytest.approx(1.0, abs=1e-4)


def test_octahedral_group():
    Rs = octahedral_rotations()
    assert len(Rs) == 24
    assert all(np.isclose(np.linalg.det(R), 1.0) for R in Rs)


def test_axioms_vacuum_eight_cells():
    s = build_space(1, 10)
    cells = grid_partition(big_box(1, default_half_width(10)), (4, 2))
    rep = povm_axioms_report(s, vacuum(s), cells, QuadratureRule(40))
    assert rep.passed, rep.to_json()
    assert set(rep.checks) == {"positivity", "normalization", "additivity"}


def test_axioms_detect_negative_T():
    s = build_space(1, 10)
    T = np.diag([1.2, -0.2] + [0.0] * 9)
    cells = grid_partition(big_box(1, default_half_width(10)), (2, 2))
    rep = povm_axioms_report(s, T, cells, QuadratureRule(40))
    assert not rep.checks["positivity"].passed


def test_refinement_keeps_cell_sum():
    s = build_space(1, 10)
    box = big_box(1, default_half_width(10))
    quad = QuadratureRule(40)
    coarse = povm_axioms_report(s, vacuum(s), grid_partition(box, (2, 2)), quad)
    fine = povm_axioms_report(s, vacuum(s), grid_partition(box, (4, 4)), quad)
    assert abs(coarse.checks["normalization"].computed - fine.checks["normalization"].computed) < 1e-8


def test_axioms_reject_bad_partition():
    s = build_space(1, 4)
    cells = grid_partition(big_box(1, 5.0), (2, 1))
    with pytest.raises(ValueError):
        povm_axioms_report(s, vacuum(s), cells + cells[:1], QuadratureRule(10))
    with pytest.raises(ValueError):
        povm_axioms_report(s, vacuum(s), cells[:1] + grid_partition(big_box(1, 5.0), (1, 3))[:1], QuadratureRule(10))


def test_suite_d1_skips_rotations():
    rep = theorem_suite(SuiteConfig(d=1, n_cut=10))
    assert rep.passed
    for name in ("invariance", "covariance_rotation"):
        assert "skipped" in rep.checks[name].settings


def test_suite_d3_invariant_passes():
    rep = theorem_suite(SuiteConfig(d=3, n_cut=4, T=InvariantBlocks({0: np.diag([1.0, 0.0, 0.0])})))
    assert rep.passed, rep.failed()


def test_suite_d3_non_invariant_fails_only_rotation_checks():
    s = build_space(3, 4)
    rep = theorem_suite(SuiteConfig(d=3, n_cut=4, T=projector(s, (1, 0, 0))))
    assert sorted(rep.failed()) == ["covariance_rotation", "invariance"]


def test_report_json_fields_and_determinism():
    a = theorem_suite(SuiteConfig(d=1, n_cut=8, seed=4)).to_json()
    b = theorem_suite(SuiteConfig(d=1, n_cut=8, seed=4)).to_json()
    assert a == b
    doc = json.loads(a)
    for check in doc["checks"].values():
        assert set(check) == CHECK_FIELDS


def test_report_conjunction():
    rep = VerificationReport()
    rep.add("a", "x", 0.0, 0.0, 1e-3)
    assert rep.passed
    rep.add("b", "y", 1.0, 0.0, 1e-3)
    assert not rep.passed and rep.failed() == ["b"]


def test_tolerance_table():
    assert tolerance("normalization") == TOLERANCES["normalization"] == 1e-6
    assert tolerance("formal_degree", 16, 60) == 1e-4


@pytest.mark.parametrize("d, n_cut", [(1, 10), (3, 3)])
def test_round_trip(d, n_cut, rng):
    from conftest import random_density
    from phasepovm.rotinv import group_average

    s = build_space(d, n_cut)
    T = random_density(rng, s.dim)
    if d == 3:
        T = group_average(s, T, 16)
    _, gap = round_trip(s, T)
    assert gap <= 1e-10
