"""Operator application, dense assembly, level blocks, eigendecomposition.

Hand-computed stencil values pin the index conventions; the free-column
eigenvalues are known in closed form (2 cos(k pi / (L+1))).
"""

import numpy as np
import pytest

from darboux2d import (BlockJacobi, Field, GridSpec, Potential, ValidationError,
                       apply_hamiltonian, assemble_dense, block_matrices,
                       eigendecompose, make_potential)


def anisotropic_2x2():
    g = GridSpec(1, 0, 1)
    return Potential(g, np.array([[2.0, 3.0]]), np.array([[5.0], [7.0]]),
                     np.array([[0.1, 0.2], [0.3, 0.4]]))


def test_apply_free_constant_field():
    g = GridSpec(2, 0, 2)
    pot = make_potential("free", g)
    out = apply_hamiltonian(pot, Field(g, np.ones((3, 3))))
    # neighbor counts of each site
    assert np.array_equal(out.values, np.array([[2., 3., 2.],
                                                [3., 4., 3.],
                                                [2., 3., 2.]]))


def test_apply_anisotropic_hand_values():
    pot = anisotropic_2x2()
    psi = Field(pot.grid, np.array([[1.0, 2.0], [3.0, 4.0]]))
    out = apply_hamiltonian(pot, psi)
    assert np.allclose(out.flat(), [16.1, 17.4, 30.9, 28.6], rtol=0, atol=1e-14)


def test_assemble_dense_hand_matrix():
    pot = anisotropic_2x2()
    H = assemble_dense(pot)
    expect = np.array([[0.1, 5.0, 2.0, 0.0],
                       [5.0, 0.2, 0.0, 3.0],
                       [2.0, 0.0, 0.3, 7.0],
                       [0.0, 3.0, 7.0, 0.4]])
    assert np.array_equal(H, expect)
    assert np.array_equal(H, H.T)


def test_assembly_routes_agree():
    g = GridSpec(3, -2, 2)
    pot = make_potential("seeded_random", g, seed=2)
    H = assemble_dense(pot)
    assert np.array_equal(H, H.T)
    assert np.array_equal(H, BlockJacobi.from_potential(pot).to_dense())
    rng = np.random.default_rng(0)
    for _ in range(3):
        v = rng.standard_normal(g.site_count)
        f = Field(g, v.reshape(g.n_count, g.width))
        assert np.allclose(apply_hamiltonian(pot, f).flat(), H @ v,
                           rtol=0, atol=1e-13)


def test_block_matrices():
    pot = anisotropic_2x2()
    A0, V0 = block_matrices(pot, 0)
    A1, V1 = block_matrices(pot, 1)
    assert A0 is None
    assert np.array_equal(A1, np.diag([2.0, 3.0]))
    assert np.array_equal(V0, np.array([[0.1, 5.0], [5.0, 0.2]]))
    assert np.array_equal(V1, np.array([[0.3, 7.0], [7.0, 0.4]]))
    with pytest.raises(ValidationError):
        block_matrices(pot, 2)


def test_eigendecompose_free_column():
    # single-column free lattice of 4 sites: eigenvalues 2 cos(k pi / 5)
    g = GridSpec(3, 0, 0)
    pot = make_potential("free", g)
    dec = eigendecompose(assemble_dense(pot))
    phi = (1 + np.sqrt(5)) / 2
    assert np.allclose(dec.eigenvalues, [-phi, -1 / phi, 1 / phi, phi],
                       rtol=0, atol=1e-14)


def test_eigendecompose_verified_properties():
    g = GridSpec(2, 0, 2)
    for pot in (make_potential("free", g),
                make_potential("seeded_random", g, seed=5)):
        H = assemble_dense(pot)
        dec = eigendecompose(H)
        P = g.site_count
        assert np.all(np.diff(dec.eigenvalues) >= 0)
        assert np.abs(dec.vectors.T @ dec.vectors - np.eye(P)).max() < 1e-12
        assert np.abs(H @ dec.vectors - dec.vectors * dec.eigenvalues).max() < 1e-11
        for i in range(P):
            col = dec.vectors[:, i]
            sig = np.abs(col) > 1e-12 * np.abs(col).max()
            assert col[int(np.argmax(sig))] > 0


def test_eigendecompose_rejects_bad_input():
    with pytest.raises(ValidationError):
        eigendecompose(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        eigendecompose(np.eye(2), tol=0.0)


def test_field_validation():
    g = GridSpec(1, 0, 1)
    with pytest.raises(ValidationError):
        Field(g, np.ones((3, 2)))
    with pytest.raises(ValidationError):
        Field(g, np.array([[np.inf, 0.0], [0.0, 0.0]]))
