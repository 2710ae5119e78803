"""Potential reconstruction from the kernel, last-level completion, and the
closed-form ratio routes.

Two-site single-column oracles (free reference, added state at lam = 2 with
unit boundary value): kernel route gives a = sqrt(1.5), c(0) = 1; the
closed-form route gives a = sqrt(3/8), c(0) = -1/2.  Both are hand-derived
from their defining ratios.
"""

import numpy as np
import pytest

from darboux2d import (Field, GridSpec, SingularTransformError,
                       SpectralModification, StructuralInconsistencyError,
                       TransformKernel, ValidationError, assemble_dense,
                       bargmann_potentials, build_Q, complete_last_level,
                       cone_sites, darboux_single, darboux_solution_transform,
                       eval_polytable, factorized_terms, make_potential,
                       propagate_polynomials, reconstruct_potentials_from_K,
                       solve_gl_degenerate, solve_gl_dense, spectral_data,
                       transformed_solutions)


def column2_added():
    g = GridSpec(1, 0, 0)
    pot = make_potential("free", g)
    table, sd = propagate_polynomials(pot), spectral_data(pot)
    mod = SpectralModification(added_states=((2.0, np.array([1.0])),))
    psi0, terms = factorized_terms(table, sd, mod)
    psis, k = solve_gl_degenerate(psi0, terms)
    return pot, table, sd, mod, psi0, psis, k


def test_identity_kernel_reproduces_reference():
    g = GridSpec(2, -1, 2)
    pot = make_potential("seeded_random", g, seed=7)
    k = TransformKernel(g, np.eye(g.site_count))
    out = reconstruct_potentials_from_K(k, pot)
    assert np.array_equal(out.a, pot.a)
    assert np.array_equal(out.b, pot.b)
    assert np.array_equal(out.c, pot.c)
    # last level entries are copies and say so
    assert ("c", 2, 0) in out.flags
    assert ("b", 2, 0) in out.flags
    with pytest.raises(ValidationError):
        reconstruct_potentials_from_K(TransformKernel(GridSpec(1, 0, 1),
                                                      np.eye(4)), pot)


def test_kernel_route_hand_values():
    pot, table, sd, mod, psi0, psis, k = column2_added()
    out = reconstruct_potentials_from_K(k, pot)
    assert abs(out.a[0, 0] - np.sqrt(1.5)) < 1e-12
    assert abs(out.c[0, 0] - 1.0) < 1e-12
    assert out.c[1, 0] == 0.0                 # copied from the free reference
    assert ("c", 1, 0) in out.flags
    assert np.all(out.a > 0)


def test_closed_form_hand_values():
    pot, table, sd, mod, psi0, psis, k = column2_added()
    out = bargmann_potentials(pot, psi0, psis)
    assert abs(out.a[0, 0] - np.sqrt(3.0 / 8.0)) < 1e-12
    assert abs(out.c[0, 0] - (-0.5)) < 1e-12
    single = darboux_single(pot, psi0[0], psis[0])
    assert abs(single.a[0, 0] - np.sqrt(3.0 / 8.0)) < 1e-12
    assert abs(single.c[0, 0] - (-0.5)) < 1e-12


def test_complete_last_level_reweight_exact():
    # eps-compensated reweight on the two-site column: the completed last
    # diagonal entry is -2 eps and the spectrum stays {-1, +1}
    g = GridSpec(1, 0, 0)
    pot = make_potential("free", g)
    table, sd = propagate_polynomials(pot), spectral_data(pot)
    mod = SpectralModification(reweights=((1, np.array([[0.1]])),
                                          (0, np.array([[-0.1]]))))
    k = solve_gl_dense(build_Q(table, sd, mod))
    out = reconstruct_potentials_from_K(k, pot)
    assert abs(out.a[0, 0] - np.sqrt(0.96)) < 1e-12
    assert abs(out.c[0, 0] - 0.2) < 1e-12
    done = complete_last_level(out, k, table, sd, mod)
    assert abs(done.c[1, 0] - (-0.2)) < 1e-13
    assert not any(f[0] == "c" for f in done.flags)
    lam = np.linalg.eigvalsh(assemble_dense(done))
    assert np.abs(lam - [-1.0, 1.0]).max() < 1e-12


def test_complete_last_level_guards_unrealizable_measure():
    # a generic pure added state is not the spectral data of any operator on
    # the same grid; the first-moment matrix of the top level then carries
    # remote off-diagonal mass and the completion must refuse
    g = GridSpec(2, 0, 2)
    pot = make_potential("free", g)
    table, sd = propagate_polynomials(pot), spectral_data(pot)
    mod = SpectralModification(added_states=((4.0, np.array([1.0, 0.7, -0.4])),))
    with pytest.warns(RuntimeWarning):
        k = solve_gl_dense(build_Q(table, sd, mod), on_structural_violation="warn")
    out = reconstruct_potentials_from_K(k, pot)
    with pytest.raises(StructuralInconsistencyError):
        complete_last_level(out, k, table, sd, mod)


def test_closed_form_identity_ratios():
    # constant special solutions on the free lattice: every ratio collapses
    g = GridSpec(2, 0, 2)
    pot = make_potential("free", g)
    one = Field(g, np.ones((3, 3)))
    out = bargmann_potentials(pot, [one], [one])
    assert np.array_equal(out.a, pot.a)
    assert np.allclose(out.c[1], 0.0, atol=1e-15)       # 1 - 1 at n >= 1
    assert np.allclose(out.c[0], -1.0, atol=1e-15)      # no n-1 term at n = 0
    assert np.allclose(out.b[1], 1.0, atol=1e-15)
    assert np.allclose(out.b[0], 0.0, atol=1e-15)
    assert np.array_equal(out.b[2], pot.b[2])           # copied last level
    single = darboux_single(pot, one, one)
    assert np.array_equal(out.a, single.a)
    assert np.allclose(out.b, single.b, rtol=0, atol=1e-15)
    assert np.allclose(out.c, single.c, rtol=0, atol=1e-15)


def test_multi_state_form_reduces_to_single_at_p1():
    g = GridSpec(3, 0, 3)
    pot = make_potential("seeded_random", g, seed=19)
    table, sd = propagate_polynomials(pot), spectral_data(pot)
    lam = float(sd.eigenvalues.max()) + 1.7
    mod = SpectralModification(added_states=((lam, np.array([0.8, -0.4, 0.6, 0.2])),))
    psi0, terms = factorized_terms(table, sd, mod)
    psis, k = solve_gl_degenerate(psi0, terms)
    multi = bargmann_potentials(pot, psi0, psis)
    single = darboux_single(pot, psi0[0], psis[0])
    assert np.abs(multi.a - single.a).max() < 1e-12
    assert np.abs(multi.b - single.b).max() < 1e-12
    assert np.abs(multi.c - single.c).max() < 1e-12


def test_singular_transforms_are_reported():
    g = GridSpec(1, 0, 0)
    pot = make_potential("free", g)
    node = Field(g, np.array([[1.0], [0.0]]))
    ok = Field(g, np.array([[1.0], [1.0]]))
    with pytest.raises(SingularTransformError):
        darboux_single(pot, node, ok)
    with pytest.raises(SingularTransformError):
        bargmann_potentials(pot, [node], [node])
    with pytest.raises(ValidationError):
        bargmann_potentials(pot, [ok], [])


def test_solution_transform_trivial_cases():
    g = GridSpec(2, -1, 1)
    pot = make_potential("seeded_random", g, seed=23)
    table = propagate_polynomials(pot)
    zero = Field(g, np.zeros((3, 3)))
    any_f = Field(g, np.arange(9, dtype=float).reshape(3, 3) + 1.0)
    out = darboux_solution_transform(any_f, zero, table)
    assert not out.coeffs.any()
    # n = 0 cone is the apex alone
    out2 = darboux_solution_transform(any_f, any_f, table)
    for m in range(-1, 2):
        for s in range(-1, 2):
            want = (-any_f.values[0, m + 1] * any_f.values[0, m + 1]
                    if s == m else 0.0)
            got = out2.entry(0, m, s)
            assert abs(got[0] - want) < 1e-14 and not got[1:].any()


def test_solution_transform_matches_direct_summation():
    g = GridSpec(2, 0, 2)
    pot = make_potential("seeded_random", g, seed=29)
    table = propagate_polynomials(pot)
    rng = np.random.default_rng(1)
    f0 = Field(g, rng.standard_normal((3, 3)))
    f1 = Field(g, rng.standard_normal((3, 3)))
    out = darboux_solution_transform(f0, f1, table)
    lam = 0.37
    got = eval_polytable(out, lam)
    ref = eval_polytable(table, lam)
    for n in range(3):
        for m in range(3):
            j = g.site_index(n, m)
            for s in range(3):
                acc = 0.0
                for (n2, m2) in cone_sites(g, n, m).sites:
                    acc += f0.values[n2, m2] * ref[g.site_index(n2, m2), s]
                want = -f1.values[n, m] * acc
                assert abs(got[j, s] - want) < 1e-12


def test_transformed_table_consistency_between_routes():
    # the kernel applied to the added-state field reproduces the transformed
    # special solution, so the table and field routes stay consistent
    pot, table, sd, mod, psi0, psis, k = column2_added()
    new_table = transformed_solutions(k, table)
    at_lam = eval_polytable(new_table, 2.0) @ np.array([1.0])
    assert np.allclose(at_lam, psis[0].flat(), rtol=0, atol=1e-13)
