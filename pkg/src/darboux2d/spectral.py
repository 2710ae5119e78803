"""Exact spectral data of the truncated operator and its orthogonality relations.

The spectral measure of the finite lattice is purely atomic: one atom per
eigenpair, located at lam_nu and weighted by the outer product of the boundary
vector Gamma_nu = psi_nu(n=0, .).  The polynomial solutions are orthonormal
under that measure, which is what ``check_orthogonality`` tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lattice import Potential, potentials_equal
from .operator import Field, assemble_dense, eigendecompose
from .polysolve import PolyTable, eval_polytable


@dataclass(frozen=True)
class SpectralData:
    """eigenvalues ascending; gammas[nu] = boundary vector over s; eigenfields
    holds the full orthonormal eigenvectors as columns."""

    eigenvalues: np.ndarray
    gammas: np.ndarray
    eigenfields: np.ndarray
    provenance: Potential

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        G = np.asarray(self.gammas, dtype=float)
        V = np.asarray(self.eigenfields, dtype=float)
        P = self.provenance.grid.site_count
        W = self.provenance.grid.width
        if lam.shape != (P,) or G.shape != (P, W) or V.shape != (P, P):
            raise ValidationError("spectral data shapes do not match grid")
        if np.abs(G.T @ G - np.eye(W)).max() > 1e-10:
            raise ValidationError("boundary completeness defect above 1e-10")
        if np.abs(V.T @ V - np.eye(P)).max() > 1e-10:
            raise ValidationError("eigenfields not orthonormal to 1e-10")

    @property
    def count(self):
        return len(self.eigenvalues)


def spectral_data(pot: Potential, tol=1e-12) -> SpectralData:
    """Diagonalize the dense operator and read off boundary vectors."""
    dec = eigendecompose(assemble_dense(pot), tol)
    W = pot.grid.width
    gammas = dec.vectors[:W, :].T.copy()     # n = 0 slice of each eigenvector
    return SpectralData(dec.eigenvalues, gammas, dec.vectors, provenance=pot)


def _require_same_provenance(table: PolyTable, sd: SpectralData):
    if table.provenance is None or not potentials_equal(table.provenance, sd.provenance):
        raise ValidationError(
            "polynomial table and spectral data come from different potentials")


def check_orthogonality(table: PolyTable, sd: SpectralData) -> float:
    """Max deviation of the polynomial Gram matrix under the spectral measure
    from the identity:  max |sum_nu w_nu w_nu^T - I|  with w_nu = Phi(lam_nu) Gamma_nu."""
    _require_same_provenance(table, sd)
    P = table.grid.site_count
    acc = np.zeros((P, P))
    for lam, gamma in zip(sd.eigenvalues, sd.gammas):
        w = eval_polytable(table, lam) @ gamma
        acc += np.outer(w, w)
    return float(np.abs(acc - np.eye(P)).max())


def synthesize_state(table_or_phi, gamma, lam, grid=None) -> Field:
    """Combine boundary data into a lattice field:  psi(n,m) = sum_s phi_ms(lam,n) gamma_s.

    Accepts either a PolyTable (evaluated at lam) or an already evaluated
    (site_count, width) matrix, in which case ``grid`` is required.
    """
    if isinstance(table_or_phi, PolyTable):
        grid = table_or_phi.grid
        phi = eval_polytable(table_or_phi, lam)
    else:
        if grid is None:
            raise ValidationError("grid required when passing an evaluated matrix")
        phi = np.asarray(table_or_phi, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if phi.shape != (grid.site_count, grid.width) or gamma.shape != (grid.width,):
        raise ValidationError("shape mismatch in synthesize_state")
    return Field(grid, (phi @ gamma).reshape(grid.n_count, grid.width))
