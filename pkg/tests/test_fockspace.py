import math

import numpy as np
import pytest

from phasepovm.fockspace import (
    DensityMatrix,
    ValidationError,
    annihilation,
    build_space,
    compress,
    embed,
    expi,
    number_operator,
    position_momentum,
    projector,
    pure_state,
    vacuum,
    validate_density,
)


@pytest.mark.parametrize("d, n_cut, dim", [(1, 0, 1), (3, 1, 4), (1, 9, 10), (3, 6, 84)])
def test_dimension(d, n_cut, dim):
    assert build_space(d, n_cut).dim == dim == math.comb(n_cut + d, d)


def test_index_roundtrip():
    s = build_space(3, 5)
    for k in range(s.dim):
        assert s.flat_index(s.multi_index(k)) == k
    assert s.flat_index((0, 0, 0)) == 0


def test_smaller_cutoff_is_leading_block():
    big, small = build_space(3, 6), build_space(3, 3)
    assert np.array_equal(big.indices[: small.dim], small.indices)
    assert np.all(np.diff(big.totals) >= 0)


@pytest.mark.parametrize("args", [(2, 3), (1, -1), (1, 3, 0.0), (3, 40)])
def test_build_space_rejects(args):
    with pytest.raises(ValueError):
        build_space(*args)


def test_vacuum_position_moment():
    s = build_space(1, 5)
    Q, P = position_momentum(s, 1)
    v = vacuum(s).matrix
    assert np.trace(v @ Q @ Q).real == pytest.approx(0.5, abs=1e-14)
    assert np.trace(v @ P @ P).real == pytest.approx(0.5, abs=1e-14)


def test_ccr_below_cutoff():
    s = build_space(3, 6)
    for ax in (1, 2, 3):
        Q, P = position_momentum(s, ax)
        C = Q @ P - P @ Q
        keep = s.level_mask(s.n_cut - 1)
        assert np.allclose(C[np.ix_(keep, keep)], 1j * np.eye(keep.sum()), atol=1e-12)


def test_number_operator_is_diagonal_totals():
    s = build_space(3, 4)
    assert np.allclose(np.diag(number_operator(s)), s.totals)
    a = annihilation(s, 1)
    assert np.allclose(a.conj().T @ a + annihilation(s, 2).conj().T @ annihilation(s, 2)
                       + annihilation(s, 3).conj().T @ annihilation(s, 3), number_operator(s))


def test_expi_unitary(rng):
    H = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    H = H + H.conj().T
    U = expi(H)
    assert np.allclose(U @ U.conj().T, np.eye(6), atol=1e-13)


def test_embed_compress_inverse(rng):
    small, big = build_space(1, 4), build_space(1, 9)
    A = rng.normal(size=(5, 5))
    assert np.array_equal(compress(embed(A, small, big), big, small), A)


def test_density_validation():
    s = build_space(1, 3)
    assert validate_density(vacuum(s).matrix).passed
    bad = np.diag([1.2, -0.2, 0, 0])
    rep = validate_density(bad)
    assert not rep.passed and "negative eigenvalue" in rep.reasons()[0]
    with pytest.raises(ValidationError):
        DensityMatrix(s, bad)
    with pytest.raises(ValidationError):
        DensityMatrix(s, 0.5 * np.eye(4))


def test_density_matrix_readonly():
    s = build_space(1, 3)
    rho = projector(s, (2,))
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1


def test_pure_state_normalizes():
    s = build_space(1, 3)
    rho = pure_state(s, [2, 0, 0, 0])
    assert np.allclose(rho.matrix, vacuum(s).matrix)
