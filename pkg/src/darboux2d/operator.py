"""Assembly and application of the lattice operator, plus its eigendecomposition.

The operator acts on fields psi(n, m) as

  (H psi)(n,m) = a(n,m) psi(n-1,m) + a(n+1,m) psi(n+1,m)
               + b(n,m) psi(n,m-1) + b(n,m+1) psi(n,m+1) + c(n,m) psi(n,m)

with every out-of-grid reference taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .lattice import GridSpec, Potential


@dataclass(frozen=True)
class Field:
    """A real-valued function on the lattice, stored as a (n_count, width) array."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_count, self.grid.width):
            raise ValidationError(
                "field shape %s does not match grid (%d, %d)"
                % (v.shape, self.grid.n_count, self.grid.width))
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite field values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def flat(self):
        return self.values.reshape(-1)


def apply_hamiltonian(pot: Potential, psi: Field) -> Field:
    """Apply the operator by its five-point stencil."""
    if psi.grid != pot.grid:
        raise ValidationError("field grid does not match potential grid")
    v = psi.values
    out = pot.c * v
    # n-hopping: pot.a row i is the bond between lattice rows i and i+1
    if pot.grid.n_max >= 1:
        out[:-1] += pot.a * v[1:]
        out[1:] += pot.a * v[:-1]
    # m-hopping: pot.b col j is the bond between lattice cols j and j+1
    if pot.grid.width >= 2:
        out[:, :-1] += pot.b * v[:, 1:]
        out[:, 1:] += pot.b * v[:, :-1]
    return Field(pot.grid, out)


def assemble_dense(pot: Potential) -> np.ndarray:
    """Dense symmetric matrix of the operator in flat site order (n outer, m inner).

    Each off-diagonal entry is written once and mirrored, so the result is
    exactly symmetric.
    """
    g = pot.grid
    W, P = g.width, g.site_count
    M = np.zeros((P, P))
    for n in range(g.n_count):
        base = n * W
        for j in range(W):
            M[base + j, base + j] = pot.c[n, j]
        for j in range(W - 1):
            M[base + j, base + j + 1] = pot.b[n, j]
            M[base + j + 1, base + j] = pot.b[n, j]
        if n < g.n_max:
            for j in range(W):
                M[base + j, base + W + j] = pot.a[n, j]
                M[base + W + j, base + j] = pot.a[n, j]
    return M


def block_matrices(pot: Potential, n: int):
    """Level blocks (A_n, V_n): A_n diagonal of a(n, .) (None for n = 0),
    V_n tridiagonal with diagonal c(n, .) and off-diagonal b(n, .)."""
    g = pot.grid
    if not 0 <= n <= g.n_max:
        raise ValidationError("level n=%d out of range 0..%d" % (n, g.n_max))
    A = np.diag(pot.a[n - 1]) if n >= 1 else None
    V = np.diag(pot.c[n])
    for j in range(g.width - 1):
        V[j, j + 1] = pot.b[n, j]
        V[j + 1, j] = pot.b[n, j]
    return A, V


@dataclass(frozen=True)
class BlockJacobi:
    """Block-tridiagonal form: diagonal blocks V_n, off-diagonal blocks A_n."""

    grid: GridSpec
    a_blocks: tuple   # A_1..A_{n_max}
    v_blocks: tuple   # V_0..V_{n_max}

    @staticmethod
    def from_potential(pot: Potential):
        a_blocks, v_blocks = [], []
        for n in range(pot.grid.n_count):
            A, V = block_matrices(pot, n)
            if n >= 1:
                a_blocks.append(A)
            v_blocks.append(V)
        return BlockJacobi(pot.grid, tuple(a_blocks), tuple(v_blocks))

    def to_dense(self):
        W, P = self.grid.width, self.grid.site_count
        M = np.zeros((P, P))
        for n, V in enumerate(self.v_blocks):
            M[n * W:(n + 1) * W, n * W:(n + 1) * W] = V
        for n, A in enumerate(self.a_blocks, start=1):
            M[(n - 1) * W:n * W, n * W:(n + 1) * W] = A
            M[n * W:(n + 1) * W, (n - 1) * W:n * W] = A
        return M


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues ascending, orthonormal eigenvectors as columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray


def eigendecompose(matrix, tol=1e-12) -> SpectralDecomposition:
    """Symmetric eigendecomposition with a deterministic sign convention.

    Eigenvalues are sorted ascending.  Each eigenvector is flipped so that its
    first component of significant magnitude (in site order) is positive.  The
    result is verified: residual ||M v - lam v||_inf <= tol * ||M||_inf and
    orthonormality to tol.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("matrix must be square")
    lam, V = np.linalg.eigh(M)
    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]
    for i in range(V.shape[1]):
        col = V[:, i]
        sig = np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300)
        k = int(np.argmax(sig))
        if col[k] < 0:
            V[:, i] = -col
    scale = max(np.abs(M).max(), 1e-300)
    resid = np.abs(M @ V - V * lam[None, :]).max()
    ortho = np.abs(V.T @ V - np.eye(V.shape[1])).max()
    if resid > tol * scale or ortho > max(tol, 1e-12) * 10:
        raise NumericError(
            "eigendecomposition failed verification: residual %.3e (scale %.3e), "
            "orthonormality defect %.3e, tol %.1e" % (resid, scale, ortho, tol))
    lam.setflags(write=False)
    V.setflags(write=False)
    return SpectralDecomposition(lam, V)
