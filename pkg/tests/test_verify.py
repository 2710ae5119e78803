"""Verification checks: equation residuals, potential comparison, spectrum
comparison, and the report containers."""

import json

import numpy as np
import pytest

from darboux2d import (CheckResult, Field, GridSpec, Potential,
                       ValidationError, VerificationReport, assemble_dense,
                       compare_potentials, eigendecompose, equation_residual,
                       isospectral_check, make_potential,
                       propagate_polynomials, residual_lambdas, spectral_data)


def test_residual_lambdas_seeded_and_bounded():
    eigs = np.array([-2.0, 0.5, 3.0])
    lam1 = residual_lambdas(eigs, seed=11)
    lam2 = residual_lambdas(eigs, seed=11)
    lam3 = residual_lambdas(eigs, seed=12)
    assert np.array_equal(lam1, lam2)
    assert not np.array_equal(lam1, lam3)
    assert lam1.shape == (10,)
    assert lam1.min() >= -3.0 and lam1.max() <= 4.0
    assert residual_lambdas(eigs, seed=0, count=4).shape == (4,)


def test_equation_residual_vanishes_for_reference():
    g = GridSpec(3, -1, 2)
    pot = make_potential("seeded_random", g, seed=3)
    table = propagate_polynomials(pot)
    sd = spectral_data(pot)
    res = equation_residual(pot, table, residual_lambdas(sd.eigenvalues, seed=5))
    assert res.name == "equation_residual"
    assert res.deviation < 1e-12
    assert res.passed


def test_equation_residual_flags_wrong_potential():
    g = GridSpec(3, -1, 2)
    pot = make_potential("seeded_random", g, seed=3)
    table = propagate_polynomials(pot)
    other = make_potential("constant", g, c0=0.5)
    res = equation_residual(other, table, [0.25, 1.5])
    assert res.deviation > 1e-3
    assert not res.passed
    assert res.worst_site is not None and res.worst_lambda in (0.25, 1.5)
    n, m = res.worst_site
    assert 0 <= n < g.n_max and g.m_min <= m <= g.m_max
    with pytest.raises(ValidationError):
        equation_residual(make_potential("free", GridSpec(2, 0, 2)), table, [1.0])


def test_equation_residual_single_level_grid():
    # with n_max = 0 no site keeps its full equation inside the truncation
    g = GridSpec(0, 0, 3)
    pot = make_potential("seeded_random", g, seed=9)
    res = equation_residual(pot, propagate_polynomials(pot), [0.7])
    assert res.deviation == 0.0 and res.worst_site is None


def test_compare_potentials_fields_and_flags():
    g = GridSpec(2, 0, 1)
    pot = make_potential("seeded_random", g, seed=21)
    assert compare_potentials(pot, pot) == {"a": 0.0, "b": 0.0, "c": 0.0}
    c2 = np.array(pot.c)
    c2[2, 1] += 0.25
    bumped = Potential(g, pot.a, pot.b, c2)
    assert compare_potentials(pot, bumped)["c"] == pytest.approx(0.25)
    assert compare_potentials(pot, bumped)["a"] == 0.0
    # the same entry flagged as a copy on either side is excluded
    flagged = Potential(g, pot.a, pot.b, c2, flags=(("c", 2, 1),))
    assert compare_potentials(pot, flagged)["c"] == 0.0
    b2 = np.array(pot.b)
    b2[0, 0] -= 0.125
    assert compare_potentials(pot, Potential(g, pot.a, b2, pot.c))["b"] \
        == pytest.approx(0.125)
    with pytest.raises(ValidationError):
        compare_potentials(pot, make_potential("free", GridSpec(1, 0, 1)))


def test_isospectral_check_identity_states_and_pattern():
    g = GridSpec(2, 0, 2)
    pot = make_potential("seeded_random", g, seed=33)
    dec = eigendecompose(assemble_dense(pot), 1e-12)
    lam0 = float(dec.eigenvalues[0])
    state = Field(g, dec.vectors[:, 0].reshape(g.n_count, g.width))
    checks = isospectral_check(pot, pot, states=[(lam0, state)],
                               added_lambdas=[lam0, 99.0])
    by_name = {c.name: c for c in checks}
    assert by_name["isospectral_eigenvalues"].deviation == 0.0
    assert by_name["eigenfield_residual_0"].deviation < 1e-13
    pattern = by_name["added_eigenvalue_pattern"]
    assert pattern.informational and pattern.passed
    assert pattern.details["%.17g" % lam0] < 1e-12
    assert pattern.details["99"] > 90.0
    with pytest.raises(ValidationError):
        isospectral_check(pot, make_potential("free", GridSpec(1, 0, 1)))


def test_isospectral_check_detects_shift():
    g = GridSpec(1, 0, 1)
    pot = make_potential("free", g)
    shifted = make_potential("constant", g, c0=0.3)
    checks = isospectral_check(pot, shifted)
    assert checks[0].deviation == pytest.approx(0.3, abs=1e-12)
    assert not checks[0].passed


def test_report_serialization():
    rep = VerificationReport()
    rep.add(CheckResult("ok_check", 1e-12, 1e-9, worst_site=(1, -2)))
    assert rep.all_passed
    rep.add(CheckResult("bad_check", 0.5, 1e-9, worst_lambda=2.0))
    rep.add(CheckResult("fyi_check", 42.0, 1e-9, informational=True))
    assert not rep.all_passed
    doc = json.loads(rep.to_json())
    assert doc["all_passed"] is False
    names = [c["name"] for c in doc["checks"]]
    assert names == ["ok_check", "bad_check", "fyi_check"]
    assert doc["checks"][0]["worst_site"] == [1, -2]
    assert doc["checks"][2]["passed"] is True
    text = rep.to_text()
    assert "pass" in text and "FAIL" in text and "info" in text
    assert text.endswith("\n")
