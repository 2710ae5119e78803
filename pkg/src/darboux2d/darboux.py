"""Potential reconstruction from the transform kernel, and the closed-form
ratio expressions built from the special solutions.

The kernel route reads the new coefficient fields off ratios of K entries:

  a(n+1,m) = a0(n+1,m) K(n,m;n,m) / K(n+1,m;n+1,m)
  c(n,m)   = c0(n,m) + a0(n,m) K(n,m;n-1,m) / K(n,m;n,m)
                     - a0(n+1,m) K(n+1,m;n,m) / K(n+1,m;n+1,m)
  b(n,m+1) = b0(n,m+1) K(n,m;n,m) / K(n,m+1;n,m+1)
           + a0(n,m+1) K(n,m;n-1,m+1) / K(n,m+1;n,m+1)
           - a(n+1,m)  K(n+1,m;n,m+1) / K(n,m+1;n,m+1)

valid wherever the referenced entries exist (rows n with n+1 <= n_max for b, c;
the a-ratio covers every stored a row).  The remaining last-level entries of b
and c are either copied from the reference (and flagged) or, for balanced
measures, completed exactly from the first moment of the modified measure.
"""

from __future__ import annotations

import numpy as np

from .errors import ReconstructionError, SingularTransformError, ValidationError
from .gelfand_levitan import (SpectralModification, TransformKernel, modified_atoms,
                              transformed_solutions, _structural_report)
from .lattice import Potential
from .operator import Field
from .polysolve import PolyTable, eval_polytable
from .spectral import SpectralData

_DENOM_GUARD = 1e-12


def reconstruct_potentials_from_K(k: TransformKernel, ref_pot: Potential) -> Potential:
    """Inverse-problem route: new potential from K entry ratios.

    Entries whose formulas reference the level past the truncation (b and c on
    the last level) are copied from the reference and flagged.
    """
    g = ref_pot.grid
    if k.grid != g:
        raise ValidationError("kernel grid does not match potential grid")
    N, W = g.n_count, g.width
    Kd = k.diagonal()
    if np.any(Kd <= 0):
        raise ReconstructionError("transform kernel diagonal must be positive")
    K = k.values

    def kval(n, m, n2, m2):
        return K[g.site_index(n, m), g.site_index(n2, m2)]

    a_new = np.array(ref_pot.a)
    for i in range(g.n_max):                      # row i stores a(n+1) with n = i
        a_new[i] = ref_pot.a[i] * Kd[i] / Kd[i + 1]

    c_new = np.array(ref_pot.c)
    flags = []
    for n in range(N - 1):
        for j, m in enumerate(range(g.m_min, g.m_max + 1)):
            val = ref_pot.c[n, j]
            if n >= 1:
                val += ref_pot.a[n - 1, j] * kval(n, m, n - 1, m) / Kd[n, j]
            val -= ref_pot.a[n, j] * kval(n + 1, m, n, m) / Kd[n + 1, j]
            c_new[n, j] = val
    for j, m in enumerate(range(g.m_min, g.m_max + 1)):
        flags.append(("c", N - 1, m))

    b_new = np.array(ref_pot.b)
    for n in range(N - 1):
        for j in range(W - 1):                    # bond between columns j and j+1
            m = g.m_min + j
            val = ref_pot.b[n, j] * Kd[n, j] / Kd[n, j + 1]
            if n >= 1:
                val += ref_pot.a[n - 1, j + 1] * kval(n, m, n - 1, m + 1) / Kd[n, j + 1]
            val -= a_new[n, j] * kval(n + 1, m, n, m + 1) / Kd[n, j + 1]
            b_new[n, j] = val
    for j in range(W - 1):
        flags.append(("b", N - 1, g.m_min + 1 + j))

    return Potential(g, a_new, b_new, c_new, flags=tuple(flags))


def complete_last_level(pot: Potential, k: TransformKernel, ref_table: PolyTable,
                        ref_sd: SpectralData, mod: SpectralModification,
                        structural_tol=1e-9,
                        on_structural_violation="error") -> Potential:
    """Fill the last-level b and c entries exactly from the modified measure.

    Valid for balanced measures (total weight preserved): the transformed
    polynomials are then complete under the modified measure, and the operator's
    last diagonal block is its first moment restricted to the top level,
    M = sum_atoms lam F(lam) C F(lam)^T with F the top-level slice of the
    transformed table.  M must come out tridiagonal; remote off-diagonal mass
    signals a non-realizable measure and trips the structural check.
    """
    g = pot.grid
    N, W = g.n_count, g.width
    atoms = modified_atoms(ref_sd, mod)
    new_table = transformed_solutions(k, ref_table)
    M = np.zeros((W, W))
    for lam, C, _touched in atoms:
        F = eval_polytable(new_table, lam)[(N - 1) * W:, :]
        M += lam * (F @ C @ F.T)
    far = 0.0
    for i in range(W):
        for j in range(i + 2, W):
            far = max(far, abs(M[i, j]))
    scale = max(1.0, float(np.abs(M).max()))
    _structural_report(far, scale, structural_tol, on_structural_violation)
    c_new = np.array(pot.c)
    b_new = np.array(pot.b)
    c_new[N - 1] = np.diag(M)
    for j in range(W - 1):
        b_new[N - 1, j] = 0.5 * (M[j, j + 1] + M[j + 1, j])
    flags = tuple(f for f in pot.flags if f[1] != N - 1 or f[0] == "a")
    return Potential(g, pot.a, b_new, c_new, flags=flags)


def _pair_sum(psi_list, psi0_list, j1, j2):
    """sum_mu psi_mu[j1] psi0_mu[j2] over flat site indices."""
    return sum(p.flat()[j1] * p0.flat()[j2] for p, p0 in zip(psi_list, psi0_list))


def bargmann_potentials(ref_pot: Potential, psi0, psi) -> Potential:
    """Closed-form ratio route for p special solutions.

    a(n+1,m) = a0(n+1,m) S(n,m;n,m) / S(n+1,m;n+1,m)
    c(n,m)   = c0 + a0(n,m) S(n,m;n-1,m)/S(n,m;n,m)
                  - a0(n+1,m) S(n+1,m;n,m)/S(n+1,m;n+1,m)
    b(n,m+1) = b0 S(n,m;n,m)/S(n,m+1;n,m+1)
             + a0(n,m+1) S(n,m;n-1,m+1)/S(n,m+1;n,m+1)
             - a(n+1,m)  S(n+1,m;n,m+1)/S(n,m+1;n,m+1)

    with S(j1;j2) = sum_mu psi_mu(j1) psi0_mu(j2).  Out-of-window entries are
    copied and flagged like the kernel route.
    """
    if len(psi0) != len(psi) or not psi0:
        raise ValidationError("psi0 and psi must be nonempty lists of equal length")
    g = ref_pot.grid
    for f in list(psi0) + list(psi):
        if f.grid != g:
            raise ValidationError("solution fields live on a different grid")
    N, W = g.n_count, g.width
    scale = max(max(np.abs(f.values).max() for f in psi0),
                max(np.abs(f.values).max() for f in psi), 1e-300)
    guard = _DENOM_GUARD * scale * scale

    def S(n1, m1, n2, m2):
        if n2 < 0:
            return 0.0
        return _pair_sum(psi, psi0, g.site_index(n1, m1), g.site_index(n2, m2))

    def checked(value, n, m):
        if abs(value) < guard:
            raise SingularTransformError(
                "vanishing denominator at site (%d, %d)" % (n, m))
        return value

    a_new = np.array(ref_pot.a)
    c_new = np.array(ref_pot.c)
    b_new = np.array(ref_pot.b)
    flags = []
    for n in range(N - 1):
        for j, m in enumerate(range(g.m_min, g.m_max + 1)):
            a_new[n, j] = (ref_pot.a[n, j] * S(n, m, n, m)
                           / checked(S(n + 1, m, n + 1, m), n + 1, m))
    for n in range(N - 1):
        for j, m in enumerate(range(g.m_min, g.m_max + 1)):
            val = ref_pot.c[n, j]
            if n >= 1:
                val += ref_pot.a[n - 1, j] * S(n, m, n - 1, m) / checked(S(n, m, n, m), n, m)
            val -= (ref_pot.a[n, j] * S(n + 1, m, n, m)
                    / checked(S(n + 1, m, n + 1, m), n + 1, m))
            c_new[n, j] = val
    for n in range(N - 1):
        for j in range(W - 1):
            m = g.m_min + j
            den = checked(S(n, m + 1, n, m + 1), n, m + 1)
            val = ref_pot.b[n, j] * S(n, m, n, m) / den
            if n >= 1:
                val += ref_pot.a[n - 1, j + 1] * S(n, m, n - 1, m + 1) / den
            val -= a_new[n, j] * S(n + 1, m, n, m + 1) / den
            b_new[n, j] = val
    for j, m in enumerate(range(g.m_min, g.m_max + 1)):
        flags.append(("c", N - 1, m))
    for j in range(W - 1):
        flags.append(("b", N - 1, g.m_min + 1 + j))
    return Potential(g, a_new, b_new, c_new, flags=tuple(flags))


def darboux_single(ref_pot: Potential, psi0: Field, psi: Field) -> Potential:
    """One-solution specialization of the closed forms.

    a(n+1,m) = a0(n+1,m) psi(n,m) psi0(n,m) / [psi(n+1,m) psi0(n+1,m)]
    b(n,m+1) = psi(n,m)/psi(n,m+1) * ( b0 psi0(n,m)/psi0(n,m+1)
               + a0(n,m+1) psi0(n-1,m+1)/psi0(n,m+1)
               - a0(n+1,m) psi0(n,m)/psi0(n+1,m) )
    c(n,m)   = c0 + a0(n,m) psi0(n-1,m)/psi0(n,m) - a0(n+1,m) psi0(n,m)/psi0(n+1,m)
    """
    g = ref_pot.grid
    if psi0.grid != g or psi.grid != g:
        raise ValidationError("solution fields live on a different grid")
    N, W = g.n_count, g.width
    v0, v = psi0.values, psi.values
    scale0 = max(float(np.abs(v0).max()), 1e-300)
    scale1 = max(float(np.abs(v).max()), 1e-300)

    def inv0(n, j):
        d = v0[n, j]
        if abs(d) < _DENOM_GUARD * scale0:
            raise SingularTransformError(
                "reference solution vanishes at site (%d, %d)" % (n, g.m_min + j))
        return d

    def inv1(n, j):
        d = v[n, j]
        if abs(d) < _DENOM_GUARD * scale1:
            raise SingularTransformError(
                "transformed solution vanishes at site (%d, %d)" % (n, g.m_min + j))
        return d

    def v0_at(n, j):
        return v0[n, j] if n >= 0 else 0.0

    a_new = np.array(ref_pot.a)
    c_new = np.array(ref_pot.c)
    b_new = np.array(ref_pot.b)
    flags = []
    for n in range(N - 1):
        for j in range(W):
            a_new[n, j] = (ref_pot.a[n, j] * v[n, j] * v0[n, j]
                           / (inv1(n + 1, j) * inv0(n + 1, j)))
    for n in range(N - 1):
        for j in range(W):
            val = ref_pot.c[n, j]
            if n >= 1:
                val += ref_pot.a[n - 1, j] * v0[n - 1, j] / inv0(n, j)
            val -= ref_pot.a[n, j] * v0[n, j] / inv0(n + 1, j)
            c_new[n, j] = val
    for n in range(N - 1):
        for j in range(W - 1):
            inner = ref_pot.b[n, j] * v0[n, j] / inv0(n, j + 1)
            if n >= 1:
                inner += ref_pot.a[n - 1, j + 1] * v0_at(n - 1, j + 1) / inv0(n, j + 1)
            inner -= ref_pot.a[n, j] * v0[n, j] / inv0(n + 1, j)
            b_new[n, j] = v[n, j] / inv1(n, j + 1) * inner
    for j, m in enumerate(range(g.m_min, g.m_max + 1)):
        flags.append(("c", N - 1, m))
    for j in range(W - 1):
        flags.append(("b", N - 1, g.m_min + 1 + j))
    return Potential(g, a_new, b_new, c_new, flags=tuple(flags))


def darboux_solution_transform(psi0: Field, psi: Field,
                               ref_table: PolyTable) -> PolyTable:
    """Solution map of the one-solution transform:
    new phi_ms(lam,n) = -psi(n,m) * sum over the cone of psi0(n',m') old phi_m's(lam,n')."""
    g = ref_table.grid
    if psi0.grid != g or psi.grid != g:
        raise ValidationError("solution fields live on a different grid")
    from .lattice import cone_sites
    P = g.site_count
    flat0 = psi0.flat()
    flat1 = psi.flat()
    M = np.zeros((P, P))
    for n in range(g.n_count):
        for m in range(g.m_min, g.m_max + 1):
            j = g.site_index(n, m)
            for site in cone_sites(g, n, m).sites:
                jj = g.site_index(*site)
                M[j, jj] = -flat1[j] * flat0[jj]
    new = (M @ ref_table.coeffs.reshape(P, -1)).reshape(ref_table.coeffs.shape)
    return PolyTable(g, new, provenance=None)
