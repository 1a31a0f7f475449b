import math

import numpy as np
import pytest
from scipy.special import eval_genlaguerre, factorial

from phasepovm.fockspace import build_space, position_momentum, vacuum
from phasepovm.galilei import (
    CentralExtElement,
    GalileiElement,
    PhasePoint,
    act,
    compose,
    compose_ext,
    compressed_rep,
    displacement,
    inverse,
    mode_weyl,
    multiplier,
    projective_residual,
    rep_operator,
    rotation_matrix,
    weyl_matrix,
)


def _laguerre_weyl(m, n, alpha):
    g = math.exp(-abs(alpha) ** 2 / 2)
    if m >= n:
        return math.sqrt(factorial(n) / factorial(m)) * alpha ** (m - n) * eval_genlaguerre(n, m - n, abs(alpha) ** 2) * g
    return math.sqrt(factorial(m) / factorial(n)) * (-np.conj(alpha)) ** (n - m) * eval_genlaguerre(m, n - m, abs(alpha) ** 2) * g


@pytest.mark.parametrize("q, p", [(0.7, -1.3), (2.0, 0.5), (0.0, 0.0)])
def test_mode_weyl_matches_laguerre(q, p):
    D = mode_weyl(14, q, p)
    alpha = (q + 1j * p) / math.sqrt(2)
    exact = np.array([[_laguerre_weyl(m, n, alpha) for n in range(14)] for m in range(14)])
    assert np.allclose(D, exact, atol=1e-13)


def test_mode_weyl_rectangular_block():
    full = mode_weyl(9, [0.3, -1.0], [1.1, 0.2])
    part = mode_weyl(9, [0.3, -1.0], [1.1, 0.2], 3)
    assert np.array_equal(full[..., :3], part)


def test_coherent_overlap():
    # |<0|D(x)|0>|^2 = exp(-|x|^2/2); at |x|^2 = 4 this is e^-2
    s = build_space(1, 20)
    D = weyl_matrix(s, PhasePoint([2.0], [0.0]))
    assert abs(D[0, 0]) ** 2 == pytest.approx(math.exp(-2), abs=1e-14)


def test_translation_overlap_half():
    # <0| exp(-i a P) |0> = exp(-a^2 / 4); a = sqrt2 gives e^-1/2
    s = build_space(1, 30)
    U = rep_operator(s, GalileiElement([math.sqrt(2)], [0.0]))
    assert U[0, 0].real == pytest.approx(math.exp(-0.5), abs=1e-10)


def test_rep_operator_unitary():
    s = build_space(3, 4)
    g = GalileiElement([0.3, -0.2, 0.1], [0.1, 0.4, -0.3], rotation_matrix([1, 2, 3], 0.7))
    U = rep_operator(s, g)
    assert np.allclose(U @ U.conj().T, np.eye(s.dim), atol=1e-12)


def test_truncated_and_compressed_agree_on_low_block():
    s = build_space(1, 40)
    x = PhasePoint([0.6], [-0.4])
    keep = s.level_mask(8)
    diff = displacement(s, x) - weyl_matrix(s, x)
    assert np.max(np.abs(diff[np.ix_(keep, keep)])) < 1e-10


def test_compressed_rep_phase_convention():
    s = build_space(1, 40)
    g = GalileiElement([0.5], [0.3])
    keep = s.level_mask(8)
    diff = rep_operator(s, g) - compressed_rep(s, g)
    assert np.max(np.abs(diff[np.ix_(keep, keep)])) < 1e-10


def test_heisenberg_shift():
    # U^+ Q U = Q + a, U^+ P U = P + m v on the low block
    s = build_space(1, 40)
    g = GalileiElement([0.4], [-0.3])
    m = 2.0
    U = rep_operator(s, g, mass=m)
    Q, P = position_momentum(s, 1)
    keep = s.level_mask(10)
    blk = np.ix_(keep, keep)
    eye = np.eye(keep.sum())
    assert np.allclose((U.conj().T @ Q @ U)[blk], Q[blk] + 0.4 * eye, atol=1e-8)
    assert np.allclose((U.conj().T @ P @ U)[blk], P[blk] + m * -0.3 * eye, atol=1e-8)


def test_group_law():
    R1, R2 = rotation_matrix([0, 0, 1], 0.4), rotation_matrix([1, 0, 0], -1.1)
    g1 = GalileiElement([1, 2, 3], [0.1, 0.2, 0.3], R1)
    g2 = GalileiElement([-1, 0, 2], [0.5, -0.2, 0.0], R2)
    e = compose(g1, inverse(g1))
    assert np.allclose(e.a, 0) and np.allclose(e.v, 0) and np.allclose(e.R, np.eye(3))
    x = PhasePoint([0.1, 0.2, 0.3], [1, -1, 0.5])
    lhs = act(compose(g1, g2), x, 1.5)
    rhs = act(g1, act(g2, x, 1.5), 1.5)
    assert np.allclose(lhs.as_array(), rhs.as_array())


def test_multiplier_and_extension():
    g1 = GalileiElement([1.0], [0.5])
    g2 = GalileiElement([2.0], [0.0])
    assert multiplier(g1, g2, 1.0) == pytest.approx(np.exp(1j * 1.0))
    h = compose_ext(CentralExtElement(1, g1), CentralExtElement(1j, g2), 1.0)
    assert h.z == pytest.approx(1j * np.exp(1j))
    with pytest.raises(ValueError):
        CentralExtElement(2.0, g1)


def test_invalid_rotation_rejected():
    with pytest.raises(ValueError):
        GalileiElement(np.zeros(3), np.zeros(3), np.diag([1, 1, -1]))
    with pytest.raises(ValueError):
        GalileiElement(np.zeros(3), np.zeros(3), 1.1 * np.eye(3))


def test_projective_relation_deep_band():
    # deep guard band: truncation leakage is far below the compared block
    s = build_space(1, 24)
    rng = np.random.default_rng(0)
    for _ in range(5):
        g1 = GalileiElement(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1))
        g2 = GalileiElement(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1))
        assert projective_residual(s, g1, g2, guard=16) < 1e-6


def test_projective_relation_rotations_exact():
    s = build_space(3, 4)
    g1 = GalileiElement(np.zeros(3), np.zeros(3), rotation_matrix([1, 1, 0], 0.9))
    g2 = GalileiElement(np.zeros(3), np.zeros(3), rotation_matrix([0, 1, 2], -0.4))
    assert projective_residual(s, g1, g2, guard=0) < 1e-12


def test_guard_band_bounds():
    s = build_space(1, 4)
    with pytest.raises(ValueError):
        projective_residual(s, GalileiElement.identity(1), GalileiElement.identity(1), guard=5)


def test_vacuum_displaced_is_coherent():
    s = build_space(1, 30)
    x = PhasePoint([1.0], [-0.5])
    psi = weyl_matrix(s, x)[:, 0]
    a = np.diag(np.sqrt(np.arange(1, s.dim)), 1)
    alpha = (1.0 - 0.5j) / math.sqrt(2)
    assert np.allclose((a @ psi)[:20], alpha * psi[:20], atol=1e-12)
    assert vacuum(s).matrix[0, 0] == 1
