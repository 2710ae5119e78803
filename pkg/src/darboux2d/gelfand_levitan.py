"""Orthogonalization kernels: from a prescribed change of the spectral measure to
the triangular transform coefficients K, by two independent routes.

The modified measure is the reference one plus a finite list of new atoms
(added bound states) and symmetric updates of existing atom weights
(reweights).  The input kernel Q collects the change evaluated through the
reference polynomials; the transform kernel K re-orthonormalizes the
polynomial family under the modified measure, site by site, respecting the
triangular cone structure.

Routes:
  solve_gl_dense      works on the explicit Gram matrix I + Q; per site it
                      solves the cone-restricted normal equations directly.
  solve_gl_degenerate never forms Q; it uses the factorized terms and solves a
                      small t x t system per site (t = number of terms).

For measures realizable by an operator on the same grid the two routes agree
and the same-level couplings vanish; non-realizable measures trip a structural
check that can be downgraded to a warning.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (SpectralInadmissibilityError, StructuralInconsistencyError,
                     ValidationError)
from .lattice import GridSpec, Potential, cone_sites
from .operator import Field, eigendecompose
from .polysolve import PolyTable, eval_polytable
from .spectral import SpectralData

# relative eigenvalue threshold below which a kept reweight direction is dropped
_TERM_CUTOFF = 1e-13


@dataclass(frozen=True)
class SpectralModification:
    """Prescribed difference of the spectral measure from the reference one.

    added_states: tuple of (lam, gamma) pairs, gamma a vector over s.
    reweights:    tuple of (nu_index, delta_c) pairs; delta_c is the symmetric
                  change of the atom weight matrix at reference eigenvalue
                  number nu_index.
    """

    added_states: tuple = ()
    reweights: tuple = ()

    def __post_init__(self):
        added = []
        for lam, gamma in self.added_states:
            g = np.array(gamma, dtype=float)
            g.setflags(write=False)
            if not np.isfinite(lam) or not np.all(np.isfinite(g)):
                raise ValidationError("non-finite added state data")
            if not np.any(g):
                raise ValidationError("added state at lam=%g has zero gamma" % lam)
            added.append((float(lam), g))
        rw = []
        for nu, dc in self.reweights:
            d = np.array(dc, dtype=float)
            d.setflags(write=False)
            if not np.all(np.isfinite(d)):
                raise ValidationError("non-finite reweight matrix")
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ValidationError("reweight matrix must be square")
            if np.abs(d - d.T).max() > 1e-12 * max(1.0, np.abs(d).max()):
                raise ValidationError("reweight matrix must be symmetric")
            rw.append((int(nu), d))
        object.__setattr__(self, "added_states", tuple(added))
        object.__setattr__(self, "reweights", tuple(rw))

    @property
    def is_empty(self):
        return not self.added_states and not self.reweights

    def to_dict(self, grid: GridSpec):
        out = {"added_states": [], "reweights": []}
        for lam, gamma in self.added_states:
            out["added_states"].append({"lambda": lam, "gamma": list(gamma)})
        for nu, dc in self.reweights:
            entries = []
            for i in range(dc.shape[0]):
                for j in range(i, dc.shape[1]):
                    if dc[i, j] != 0.0:
                        entries.append({"s": grid.m_min + i, "s_prime": grid.m_min + j,
                                        "value": dc[i, j]})
            out["reweights"].append({"nu": nu, "delta_c": entries})
        return out

    def to_json(self, grid: GridSpec):
        return json.dumps(self.to_dict(grid), indent=2)

    @staticmethod
    def from_dict(d, grid: GridSpec):
        try:
            added = [(float(e["lambda"]), np.array(e["gamma"], dtype=float))
                     for e in d.get("added_states", [])]
            rw = []
            for e in d.get("reweights", []):
                dc = np.zeros((grid.width, grid.width))
                for t in e["delta_c"]:
                    i, j = int(t["s"]) - grid.m_min, int(t["s_prime"]) - grid.m_min
                    if not (0 <= i < grid.width and 0 <= j < grid.width):
                        raise ValidationError("reweight index outside m-range")
                    dc[i, j] = float(t["value"])
                    dc[j, i] = float(t["value"])
                rw.append((int(e["nu"]), dc))
            for lam, g in added:
                if g.shape != (grid.width,):
                    raise ValidationError("gamma length does not match grid width")
            return SpectralModification(tuple(added), tuple(rw))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError("malformed modification document: %s" % exc)

    @staticmethod
    def from_json(text, grid: GridSpec):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError("modification document is not valid JSON: %s" % exc)
        return SpectralModification.from_dict(d, grid)


def completeness_defect(sd: SpectralData, mod: SpectralModification) -> float:
    """Max deviation of the modified measure's total weight from the identity.
    Exactly solvable scenarios on the fixed grid must keep this at zero."""
    W = sd.provenance.grid.width
    acc = sd.gammas.T @ sd.gammas - np.eye(W)
    for lam, gamma in mod.added_states:
        acc = acc + np.outer(gamma, gamma)
    for nu, dc in mod.reweights:
        acc = acc + dc
    return float(np.abs(acc).max())


@dataclass(frozen=True)
class QKernel:
    """Symmetric site-pair kernel of the measure change, dense in flat site order."""

    grid: GridSpec
    values: np.ndarray
    provenance: tuple = field(default=(None, None))   # (Potential, SpectralModification)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        P = self.grid.site_count
        if v.shape != (P, P):
            raise ValidationError("Q kernel shape %s does not match grid" % (v.shape,))
        if np.abs(v - v.T).max() > 1e-12 * max(1.0, np.abs(v).max()):
            raise ValidationError("Q kernel must be symmetric")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def build_Q(ref_table: PolyTable, ref_sd: SpectralData, mod: SpectralModification) -> QKernel:
    """Evaluate the measure change through the reference polynomials:

      Q(j, j') = sum_added psi0(j) psi0(j')
               + sum_reweights [Phi(lam_nu) delta_c Phi(lam_nu)^T](j, j')

    with psi0(j) = [Phi(lam_mu) gamma](j).  Added eigenvalues must stay clear of
    the reference spectrum (confluent atoms are unsupported).
    """
    grid = ref_table.grid
    P = grid.site_count
    lam_scale = max(1.0, float(np.abs(ref_sd.eigenvalues).max()))
    Q = np.zeros((P, P))
    for lam, gamma in mod.added_states:
        if np.abs(ref_sd.eigenvalues - lam).min() <= 1e-9 * lam_scale:
            raise ValidationError(
                "added eigenvalue %.17g collides with the reference spectrum" % lam)
        if gamma.shape != (grid.width,):
            raise ValidationError("gamma length does not match grid width")
        psi0 = eval_polytable(ref_table, lam) @ gamma
        Q += np.outer(psi0, psi0)
    for nu, dc in mod.reweights:
        if not 0 <= nu < ref_sd.count:
            raise ValidationError("reweight index nu=%d out of range" % nu)
        phi = eval_polytable(ref_table, ref_sd.eigenvalues[nu])
        Q += phi @ dc @ phi.T
    Q = 0.5 * (Q + Q.T)   # kill roundoff asymmetry
    return QKernel(grid, Q, provenance=(ref_table.provenance, mod))


def factorized_terms(ref_table: PolyTable, ref_sd: SpectralData,
                     mod: SpectralModification):
    """Signed rank-1 factorization of the measure change, for the degenerate route.

    Returns (psi0_fields, reweight_terms): one field per added state (sign +1
    implied), and (field, sign) pairs from the eigendecomposition of each
    reweight matrix, directions with relatively negligible weight dropped.
    """
    grid = ref_table.grid
    lam_scale = max(1.0, float(np.abs(ref_sd.eigenvalues).max()))
    psi0_fields = []
    for lam, gamma in mod.added_states:
        if np.abs(ref_sd.eigenvalues - lam).min() <= 1e-9 * lam_scale:
            raise ValidationError(
                "added eigenvalue %.17g collides with the reference spectrum" % lam)
        vec = eval_polytable(ref_table, lam) @ gamma
        psi0_fields.append(Field(grid, vec.reshape(grid.n_count, grid.width)))
    reweight_terms = []
    for nu, dc in mod.reweights:
        if not 0 <= nu < ref_sd.count:
            raise ValidationError("reweight index nu=%d out of range" % nu)
        evals, evecs = np.linalg.eigh(dc)
        cut = _TERM_CUTOFF * max(np.abs(evals).max(), 1e-300)
        phi = eval_polytable(ref_table, ref_sd.eigenvalues[nu])
        for e, w in zip(evals, evecs.T):
            if abs(e) <= cut:
                continue
            vec = np.sqrt(abs(e)) * (phi @ w)
            reweight_terms.append((Field(grid, vec.reshape(grid.n_count, grid.width)),
                                   1.0 if e > 0 else -1.0))
    return psi0_fields, reweight_terms


@dataclass(frozen=True)
class TransformKernel:
    """Triangular orthogonalization coefficients K(n,m;n',m'), dense storage with
    exact zeros outside the cone pattern; positive diagonal.

    same_level_coupling records the largest residual coupling between distinct
    sites of one level under the modified measure (zero for realizable data).
    """

    grid: GridSpec
    values: np.ndarray
    same_level_coupling: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        P = self.grid.site_count
        if v.shape != (P, P):
            raise ValidationError("K kernel shape %s does not match grid" % (v.shape,))
        if np.any(np.diag(v) <= 0):
            raise ValidationError("K diagonal must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def entry(self, n, m, n2, m2):
        g = self.grid
        return self.values[g.site_index(n, m), g.site_index(n2, m2)]

    def diagonal(self):
        g = self.grid
        return np.diag(self.values).reshape(g.n_count, g.width)

    def to_csv(self):
        """Rows (n, m, n_prime, m_prime, value) over the stored cone pattern."""
        g = self.grid
        lines = ["n,m,n_prime,m_prime,value"]
        for n in range(g.n_count):
            for m in range(g.m_min, g.m_max + 1):
                j = g.site_index(n, m)
                for (n2, m2) in cone_sites(g, n, m).sites:
                    lines.append("%d,%d,%d,%d,%.17g"
                                 % (n, m, n2, m2, self.values[j, g.site_index(n2, m2)]))
        return "\n".join(lines) + "\n"


def _structural_report(max_coupling, scale, tol, mode):
    if max_coupling <= tol * scale:
        return
    msg = ("same-level coupling %.3e exceeds %.1e * scale %.3e: the modified "
           "measure is not realizable by an operator on this grid"
           % (max_coupling, tol, scale))
    if mode == "warn":
        warnings.warn(msg, RuntimeWarning)
    else:
        raise StructuralInconsistencyError(msg)


def solve_gl_dense(q: QKernel, on_structural_violation="error",
                   structural_tol=1e-9) -> TransformKernel:
    """Oracle route on the explicit Gram matrix G = I + Q.

    Level by level, each site's row is found by projecting out the span of all
    polynomials in the cone below the site and normalizing; the residual
    couplings between distinct sites of one level, which vanish exactly for
    realizable measures, are reported through the structural check.
    """
    if on_structural_violation not in ("error", "warn"):
        raise ValidationError("on_structural_violation must be 'error' or 'warn'")
    g = q.grid
    P, W = g.site_count, g.width
    G = np.eye(P) + q.values
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise SpectralInadmissibilityError(
            "Gram matrix I + Q is not positive definite")
    scale = max(1.0, float(np.abs(G).max()))
    K = np.zeros((P, P))
    max_coupling = 0.0
    for n in range(g.n_count):
        rows = []
        for m in range(g.m_min, g.m_max + 1):
            j = g.site_index(n, m)
            cs = [g.site_index(*site) for site in cone_sites(g, n, m).below]
            idx = cs + [j]
            S = G[np.ix_(idx, idx)]
            v = np.zeros(P)
            v[j] = 1.0
            if cs:
                v[cs] = -np.linalg.solve(S[:-1, :-1], S[:-1, -1])
            nrm2 = float(v[idx] @ S @ v[idx])
            if nrm2 <= 1e-13 * scale:
                raise SpectralInadmissibilityError(
                    "vanishing norm at site (%d, %d): measure inadmissible" % (n, m))
            rows.append(v / np.sqrt(nrm2))
        V = np.array(rows)
        if W > 1:
            level_gram = V @ G @ V.T
            off = np.abs(level_gram - np.diag(np.diag(level_gram))).max()
            max_coupling = max(max_coupling, float(off))
        K[n * W:(n + 1) * W] = V
    _structural_report(max_coupling, scale, structural_tol, on_structural_violation)
    return TransformKernel(g, K, same_level_coupling=max_coupling)


def _solve_site_system(B, sg, rhs):
    """Solve the site system for z with A = diag(sg) + B B^T, where B holds the
    term values on the cone below the site.  All-positive signs give a positive
    definite A, solved by its triangular factor; mixed signs fall back to a
    general symmetric solve."""
    A = np.diag(sg) + B @ B.T
    if np.all(sg > 0):
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise SpectralInadmissibilityError("site system not positive definite")
        y = np.linalg.solve(L, rhs)
        return np.linalg.solve(L.T, y)
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        raise SpectralInadmissibilityError("singular site system")


def solve_gl_degenerate(psi0_tables, reweight_terms=(), grid=None):
    """Degenerate-kernel route.  Never forms Q; at each site (n, m) it solves a
    t x t system over the modification terms restricted to the cone below the
    site, yielding the diagonal normalizer, the transformed special solutions,
    and the K row in factorized form.

    Returns (psi_tables, k): the transformed fields for the added-state terms
    (in input order) and the transform kernel.
    """
    fields = list(psi0_tables) + [f for f, _ in reweight_terms]
    signs = np.array([1.0] * len(psi0_tables) + [s for _, s in reweight_terms])
    if fields:
        grid = fields[0].grid
        for f in fields:
            if f.grid != grid:
                raise ValidationError("term fields live on different grids")
    elif grid is None:
        raise ValidationError("grid required for an empty modification")
    g = grid
    P, W = g.site_count, g.width
    T = len(fields)
    U = np.array([f.flat() for f in fields]).reshape(T, P)
    K = np.zeros((P, P))
    psi = np.zeros((T, P))
    for n in range(g.n_count):
        for m in range(g.m_min, g.m_max + 1):
            j = g.site_index(n, m)
            if T == 0:
                K[j, j] = 1.0
                continue
            cs = [g.site_index(*site) for site in cone_sites(g, n, m).below]
            B = U[:, cs] if cs else np.zeros((T, 0))
            u = U[:, j]
            z = _solve_site_system(B, signs, u)
            kd2 = 1.0 + float(u @ z)
            if kd2 <= 0:
                raise SpectralInadmissibilityError(
                    "non-positive normalizer at site (%d, %d): "
                    "measure inadmissible" % (n, m))
            kd = kd2 ** -0.5
            K[j, j] = kd
            psi[:, j] = kd * (signs * z)
            if cs:
                K[j, cs] = -kd * (z @ B)
    psi_out = [Field(g, psi[t].reshape(g.n_count, W)) for t in range(len(psi0_tables))]
    return psi_out, TransformKernel(g, K)


def transformed_solutions(k: TransformKernel, ref_table: PolyTable) -> PolyTable:
    """Linear combination of the reference polynomials over each site's cone:
    new phi_ms(lam, n) = sum_cone K(n,m;n',m') old phi_m's(lam, n').  Acts on
    coefficient vectors, preserving cone support exactly."""
    g = ref_table.grid
    if k.grid != g:
        raise ValidationError("kernel and table grids differ")
    P = g.site_count
    flat = ref_table.coeffs.reshape(P, -1)
    new = (k.values @ flat).reshape(ref_table.coeffs.shape)
    return PolyTable(g, new, provenance=None)


def modified_atoms(ref_sd: SpectralData, mod: SpectralModification):
    """Atoms of the modified measure: reference atoms grouped by eigenvalue
    proximity, reweights folded in, added states appended, and fully removed
    atoms dropped.  Returns (lam, C, touched) triples sorted by lam, where
    ``touched`` marks atoms altered by the modification."""
    lam_scale = max(1.0, float(np.abs(ref_sd.eigenvalues).max()))
    atol = 1e-9 * lam_scale
    atoms = []           # list of [lam, C, member_indices, touched]
    for nu, (lam, gamma) in enumerate(zip(ref_sd.eigenvalues, ref_sd.gammas)):
        if atoms and abs(lam - atoms[-1][0]) <= atol:
            atoms[-1][1] += np.outer(gamma, gamma)
            atoms[-1][2].append(nu)
        else:
            atoms.append([float(lam), np.outer(gamma, gamma), [nu], False])
    for nu, dc in mod.reweights:
        hit = [a for a in atoms if nu in a[2]]
        if not hit:
            raise ValidationError("reweight index nu=%d out of range" % nu)
        hit[0][1] += dc
        hit[0][3] = True
    for lam, gamma in mod.added_states:
        placed = False
        for a in atoms:
            if abs(lam - a[0]) <= atol:
                a[1] += np.outer(gamma, gamma)
                a[3] = True
                placed = True
                break
        if not placed:
            atoms.append([float(lam), np.outer(gamma, gamma), [], True])
    scale = max(1e-300, max(np.abs(a[1]).max() for a in atoms))
    kept = [(a[0], a[1], a[3]) for a in atoms if np.abs(a[1]).max() > 1e-13 * scale]
    return sorted(kept, key=lambda t: t[0])


# ---------------------------------------------------------------------------
# scenario builders for exactly solvable modifications on separable lattices
# ---------------------------------------------------------------------------

def separable_factors(pot: Potential):
    """Split a potential into 1D chain factors when it has product structure:
    a(n,m) independent of m, b(n,m) independent of n, c(n,m) = beta(n) + g(m).

    Returns (n_diag, n_hop, m_diag, m_hop); raises ValidationError otherwise.
    """
    g = pot.grid
    scale = max(1.0, max(np.abs(x).max() if x.size else 0.0
                         for x in (pot.a, pot.b, pot.c)))
    tol = 1e-12 * scale
    if pot.a.size and np.abs(pot.a - pot.a[:, :1]).max() > tol:
        raise ValidationError("potential not separable: a varies along m")
    if pot.b.size and np.abs(pot.b - pot.b[:1, :]).max() > tol:
        raise ValidationError("potential not separable: b varies along n")
    m_diag = pot.c[0].copy()
    n_diag = pot.c[:, 0] - pot.c[0, 0]
    if np.abs(pot.c - (n_diag[:, None] + m_diag[None, :])).max() > tol:
        raise ValidationError("potential not separable: c is not a sum of"
                              " a row term and a column term")
    n_hop = pot.a[:, 0].copy() if pot.a.size else np.zeros(0)
    m_hop = pot.b[0].copy() if pot.b.size else np.zeros(0)
    return n_diag, n_hop, m_diag, m_hop


def _chain_eigen(diag, hop):
    J = np.diag(diag)
    if len(hop):
        J += np.diag(hop, 1) + np.diag(hop, -1)
    dec = eigendecompose(J, 1e-12)
    return dec.eigenvalues, dec.vectors


def _nearest_eigen_index(sd: SpectralData, lam, atol):
    d = np.abs(sd.eigenvalues - lam)
    nu = int(np.argmin(d))
    if d[nu] > atol:
        raise ValidationError(
            "no reference eigenvalue near %.17g (closest at distance %.3e)"
            % (lam, d[nu]))
    return nu


def weight_transfer_modification(ref_pot: Potential, ref_sd: SpectralData,
                                 from_level: int, to_level: int,
                                 fraction: float) -> SpectralModification:
    """Compensated reweight pair on a separable lattice: move the given fraction
    of the row-factor level's boundary weight to another level, uniformly on
    every column fiber.  The total weight is conserved, so the modified measure
    is exactly realizable and isospectral to the reference."""
    n_diag, n_hop, m_diag, m_hop = separable_factors(ref_pot)
    mu, Un = _chain_eigen(n_diag, n_hop)
    nu_vals, Vm = _chain_eigen(m_diag, m_hop)
    nlev = len(mu)
    if not (0 <= from_level < nlev and 0 <= to_level < nlev):
        raise ValidationError("factor level out of range 0..%d" % (nlev - 1))
    if from_level == to_level:
        raise ValidationError("from_level and to_level must differ")
    if not 0.0 < fraction < 1.0:
        raise ValidationError("fraction must lie strictly between 0 and 1")
    tau = fraction * float(Un[0, from_level] ** 2)
    if tau <= 0:
        raise ValidationError("source level carries no boundary weight")
    lam_scale = max(1.0, float(np.abs(ref_sd.eigenvalues).max()))
    rw = []
    for l in range(len(nu_vals)):
        vl = Vm[:, l]
        dc = tau * np.outer(vl, vl)
        src = _nearest_eigen_index(ref_sd, mu[from_level] + nu_vals[l], 1e-8 * lam_scale)
        dst = _nearest_eigen_index(ref_sd, mu[to_level] + nu_vals[l], 1e-8 * lam_scale)
        rw.append((src, -dc))
        rw.append((dst, dc))
    return SpectralModification(added_states=(), reweights=tuple(rw))


def jacobi_from_measure(xs, ws):
    """Three-term recurrence coefficients of the orthonormal polynomials of a
    discrete measure (atoms xs, weights ws > 0), with full reorthogonalization.
    The returned tridiagonal matrix has spectrum xs and boundary weights ws/sum(ws)."""
    xs = np.asarray(xs, dtype=float)
    ws = np.asarray(ws, dtype=float)
    N = len(xs)
    if len(ws) != N or N == 0:
        raise ValidationError("measure atoms and weights must match and be nonempty")
    if np.any(ws <= 0):
        raise ValidationError("measure weights must be strictly positive")
    if N > 1 and np.min(np.diff(np.sort(xs))) <= 1e-12 * max(1.0, np.abs(xs).max()):
        raise ValidationError("measure atoms must be distinct")
    p_prev = np.zeros(N)
    p = np.ones(N) / np.sqrt(ws.sum())
    alpha = np.zeros(N)
    beta = np.zeros(max(N - 1, 0))
    basis = [p]
    for k in range(N):
        q = xs * p
        alpha[k] = float(np.sum(ws * q * p))
        q = q - alpha[k] * p - (beta[k - 1] * p_prev if k > 0 else 0.0)
        for pb in basis:   # full reorthogonalization, cheap at desk scale
            q = q - float(np.sum(ws * q * pb)) * pb
        if k < N - 1:
            beta[k] = float(np.sqrt(np.sum(ws * q * q)))
            if beta[k] <= 0:
                raise ValidationError("measure degenerated during reconstruction")
            p_prev, p = p, q / beta[k]
            basis.append(p)
    return alpha, beta


def factor_shift_modification(ref_pot: Potential, ref_sd: SpectralData, shifts):
    """Exactly solvable added-state scenario on a separable lattice: move the
    selected row-factor eigenvalues to new positions, keeping their boundary
    weights.  Each moved factor level contributes one removed and one added
    atom per column fiber, so the measure stays balanced.

    ``shifts`` is a sequence of (level_index, new_value).  Returns the
    modification together with the closed-form target potential it realizes.
    """
    g = ref_pot.grid
    n_diag, n_hop, m_diag, m_hop = separable_factors(ref_pot)
    mu, Un = _chain_eigen(n_diag, n_hop)
    nu_vals, Vm = _chain_eigen(m_diag, m_hop)
    wk = Un[0, :] ** 2
    mu_new = mu.copy()
    moved = []
    for k, val in shifts:
        k = int(k)
        if not 0 <= k < len(mu):
            raise ValidationError("factor level %d out of range" % k)
        mu_new[k] = float(val)
        moved.append(k)
    if len(set(moved)) != len(moved):
        raise ValidationError("each factor level may be shifted once")
    span = max(1.0, float(np.abs(mu_new).max()))
    if np.min(np.diff(np.sort(mu_new))) <= 1e-9 * span:
        raise ValidationError("shifted factor spectrum must stay simple")
    lam_scale = max(1.0, float(np.abs(ref_sd.eigenvalues).max()))
    added, rw = [], []
    for k in moved:
        for l in range(len(nu_vals)):
            vl = Vm[:, l]
            lam_new = float(mu_new[k] + nu_vals[l])
            if np.abs(ref_sd.eigenvalues - lam_new).min() <= 1e-8 * lam_scale:
                raise ValidationError(
                    "shifted atom %.17g lands on the reference spectrum; "
                    "choose a different shift" % lam_new)
            added.append((lam_new, np.sqrt(wk[k]) * vl))
            src = _nearest_eigen_index(ref_sd, mu[k] + nu_vals[l], 1e-8 * lam_scale)
            rw.append((src, -wk[k] * np.outer(vl, vl)))
    alpha2, beta2 = jacobi_from_measure(mu_new, wk)
    a_t = np.tile(beta2[:, None], (1, g.width))
    c_t = alpha2[:, None] + m_diag[None, :]
    # the rebuilt factor reproduces the reference gauge: alpha2 -> n_diag + c(0,0)
    target = Potential(g, a_t, ref_pot.b.copy(), c_t)
    return SpectralModification(tuple(added), tuple(rw)), target
