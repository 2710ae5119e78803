"""Polynomial solutions of the lattice equation, propagated as coefficient vectors.

For every boundary column s the solution phi_ms(lam, n) is generated from
phi(-1) = 0, phi(0, m) = delta_ms by the level recursion

  phi(n+1, m) = [lam phi(n,m) - a(n,m) phi(n-1,m) - b(n,m) phi(n,m-1)
                 - b(n,m+1) phi(n,m+1) - c(n,m) phi(n,m)] / a(n+1,m).

Each entry is a real polynomial in lam, stored as ascending coefficients.
Entries vanish identically outside the cone |s - m| <= n; inside an unclipped
cone the degree is exactly n - |s - m|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lattice import GridSpec, Potential

# coefficients smaller than this (relative to the entry's largest one) are
# flushed to exact zero after every propagation step, keeping cone-support
# zeros exact
COEFF_TRUNCATION = 1e-13


@dataclass(frozen=True)
class PolyTable:
    """Coefficient table, indexed [n, m_offset, s_offset, power].

    m_offset = m - m_min and s_offset = s - m_min; the power axis has
    n_max + 1 slots (the largest possible degree is n_max).
    """

    grid: GridSpec
    coeffs: np.ndarray
    provenance: Potential | None = None

    def __post_init__(self):
        g = self.grid
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (g.n_count, g.width, g.width, g.n_count):
            raise ValidationError(
                "coefficient table shape %s does not match grid" % (c.shape,))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def entry(self, n, m, s):
        """Coefficient vector of phi_ms(., n)."""
        g = self.grid
        return self.coeffs[n, m - g.m_min, s - g.m_min]


def _truncate_small(block):
    """Flush per-entry relatively tiny coefficients to zero, in place."""
    mx = np.abs(block).max(axis=-1, keepdims=True)
    block[np.abs(block) <= COEFF_TRUNCATION * mx] = 0.0


def propagate_polynomials(pot: Potential) -> PolyTable:
    g = pot.grid
    N, W = g.n_count, g.width
    coeffs = np.zeros((N, W, W, N))
    coeffs[0, :, :, 0] = np.eye(W)
    for n in range(g.n_max):
        cur = coeffs[n]
        new = np.zeros((W, W, N))
        new[:, :, 1:] = cur[:, :, :-1]                      # lam * phi(n)
        new -= pot.c[n][:, None, None] * cur                # - c(n,m) phi(n)
        if W >= 2:
            # b(n,m) couples columns m-1 and m
            new[1:] -= pot.b[n][:, None, None] * cur[:-1]
            new[:-1] -= pot.b[n][:, None, None] * cur[1:]
        if n >= 1:
            new -= pot.a[n - 1][:, None, None] * coeffs[n - 1]   # - a(n,m) phi(n-1)
        new /= pot.a[n][:, None, None]                      # / a(n+1,m)
        _truncate_small(new)
        coeffs[n + 1] = new
    return PolyTable(g, coeffs, provenance=pot)


def degree_map(table: PolyTable, s: int) -> np.ndarray:
    """Integer grid of polynomial degrees for boundary column s; -1 marks the
    identically zero entries outside the cone."""
    g = table.grid
    if not g.m_min <= s <= g.m_max:
        raise ValidationError("s=%d outside m-range %d..%d" % (s, g.m_min, g.m_max))
    block = table.coeffs[:, :, s - g.m_min, :]              # (N, W, N)
    nonzero = block != 0.0
    degs = np.where(nonzero.any(axis=-1),
                    nonzero.shape[-1] - 1 - np.argmax(nonzero[:, :, ::-1], axis=-1),
                    -1)
    return degs.astype(int)


def eval_polytable(table: PolyTable, lam: float) -> np.ndarray:
    """Horner evaluation; returns the matrix Phi(lam) of shape (site_count, width),
    rows in flat site order, columns indexed by s."""
    if not np.isfinite(lam):
        raise ValidationError("lambda must be finite")
    c = table.coeffs
    out = c[..., -1].copy()
    for k in range(c.shape[-1] - 2, -1, -1):
        out = out * lam + c[..., k]
    g = table.grid
    return out.reshape(g.site_count, g.width)


def leading_coefficients(table: PolyTable) -> np.ndarray:
    """Leading coefficient of the diagonal entries phi_ss(n), shape (N, W).
    Inside the lattice these equal 1 / prod_{k=1..n} a(k, s)."""
    g = table.grid
    out = np.zeros((g.n_count, g.width))
    for n in range(g.n_count):
        for j in range(g.width):
            vec = table.coeffs[n, j, j]
            nz = np.nonzero(vec)[0]
            out[n, j] = vec[nz[-1]] if nz.size else 0.0
    return out


def table_to_csv(table: PolyTable) -> str:
    """Rows (n, m, s, degree, coefficients 0..degree); zero entries get degree -1
    and no coefficients."""
    g = table.grid
    lines = ["n,m,s,degree,coefficients"]
    for n in range(g.n_count):
        for m in range(g.m_min, g.m_max + 1):
            for s in range(g.m_min, g.m_max + 1):
                vec = table.entry(n, m, s)
                nz = np.nonzero(vec)[0]
                d = int(nz[-1]) if nz.size else -1
                cs = ",".join("%.17g" % x for x in vec[:d + 1])
                lines.append("%d,%d,%d,%d%s" % (n, m, s, d, "," + cs if d >= 0 else ""))
    return "\n".join(lines) + "\n"


def table_from_csv(text: str, grid: GridSpec) -> PolyTable:
    coeffs = np.zeros((grid.n_count, grid.width, grid.width, grid.n_count))
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("n,m,s"):
        raise ValidationError("not a polynomial table CSV")
    for ln in lines[1:]:
        parts = ln.split(",")
        try:
            n, m, s, d = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
            cs = [float(x) for x in parts[4:4 + d + 1]] if d >= 0 else []
        except (ValueError, IndexError) as exc:
            raise ValidationError("malformed table row %r: %s" % (ln, exc))
        for k, x in enumerate(cs):
            coeffs[n, m - grid.m_min, s - grid.m_min, k] = x
    return PolyTable(grid, coeffs, provenance=None)
