"""Finite lattice geometry, cone index sets, and storage of discrete potentials.

Sites live on the rectangle 0 <= n <= n_max, m_min <= m <= m_max with zero
Dirichlet closure outside (couplings past the edges multiply zero values).
The flattened site order used everywhere is n outer, m inner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class GridSpec:
    """Rectangular lattice extent: n in 0..n_max, m in m_min..m_max."""

    n_max: int
    m_min: int
    m_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValidationError("n_max must be >= 0, got %d" % self.n_max)
        if self.m_max < self.m_min:
            raise ValidationError(
                "m_max (%d) must be >= m_min (%d)" % (self.m_max, self.m_min))

    @property
    def width(self):
        return self.m_max - self.m_min + 1

    @property
    def n_count(self):
        return self.n_max + 1

    @property
    def site_count(self):
        return self.n_count * self.width

    def contains(self, n, m):
        return 0 <= n <= self.n_max and self.m_min <= m <= self.m_max

    def site_index(self, n, m):
        """Flat index of site (n, m), n outer, m inner."""
        if not self.contains(n, m):
            raise ValidationError("site (%d, %d) outside grid" % (n, m))
        return n * self.width + (m - self.m_min)

    def sites(self):
        """All sites in flat order."""
        return [(n, m)
                for n in range(self.n_max + 1)
                for m in range(self.m_min, self.m_max + 1)]


@dataclass(frozen=True)
class ConeDomain:
    """The dependency cone of a site: all (n', m') with n' <= n and
    |m' - m| <= n - n', clipped to the grid.

    ``sites`` is ordered n' ascending then m' ascending, so the apex is the
    last entry (the unique site with n' = n).
    """

    apex: tuple
    sites: tuple

    @property
    def below(self):
        """Cone sites strictly below the apex level (n' < n)."""
        return self.sites[:-1]


def cone_sites(grid: GridSpec, n: int, m: int) -> ConeDomain:
    """Index set of the triangular dependency cone with apex (n, m)."""
    if not grid.contains(n, m):
        raise ValidationError("cone apex (%d, %d) outside grid" % (n, m))
    out = []
    for np_ in range(n + 1):
        half = n - np_
        lo = max(grid.m_min, m - half)
        hi = min(grid.m_max, m + half)
        for mp in range(lo, hi + 1):
            out.append((np_, mp))
    return ConeDomain(apex=(n, m), sites=tuple(out))


def _freeze(arr):
    a = np.array(arr, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Potential:
    """The three coefficient fields of the lattice operator.

    a[i, j] = a(n=i+1, m=m_min+j)   hopping along n, rows n = 1..n_max
    b[i, j] = b(n=i,   m=m_min+1+j) hopping along m, coupling (n,m-1) <-> (n,m)
    c[i, j] = c(n=i,   m=m_min+j)   on-site term

    ``flags`` lists entries copied from a reference rather than reconstructed,
    as (field_name, n, m) triples.
    """

    grid: GridSpec
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    flags: tuple = field(default=())

    def __post_init__(self):
        g = self.grid
        object.__setattr__(self, "a", _freeze(self.a))
        object.__setattr__(self, "b", _freeze(self.b))
        object.__setattr__(self, "c", _freeze(self.c))
        object.__setattr__(self, "flags", tuple(tuple(f) for f in self.flags))
        if self.a.shape != (g.n_max, g.width):
            raise ValidationError(
                "a must have shape (%d, %d), got %s" % (g.n_max, g.width, self.a.shape))
        if self.b.shape != (g.n_max + 1, g.width - 1):
            raise ValidationError(
                "b must have shape (%d, %d), got %s"
                % (g.n_max + 1, g.width - 1, self.b.shape))
        if self.c.shape != (g.n_max + 1, g.width):
            raise ValidationError(
                "c must have shape (%d, %d), got %s" % (g.n_max + 1, g.width, self.c.shape))
        for name, arr in (("a", self.a), ("b", self.b), ("c", self.c)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValidationError("non-finite entries in field %s" % name)
        if self.a.size and np.any(self.a <= 0):
            raise ValidationError("a must be strictly positive everywhere")

    # index helpers translating lattice coordinates to storage rows/cols

    def a_at(self, n, m):
        """a(n, m) for n in 1..n_max."""
        return self.a[n - 1, m - self.grid.m_min]

    def b_at(self, n, m):
        """b(n, m) for m in m_min+1..m_max (bond (n,m-1) <-> (n,m))."""
        return self.b[n, m - self.grid.m_min - 1]

    def c_at(self, n, m):
        return self.c[n, m - self.grid.m_min]

    def to_dict(self):
        g = self.grid
        return {
            "grid": {"n_max": g.n_max, "m_min": g.m_min, "m_max": g.m_max},
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "flags": [list(f) for f in self.flags],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def from_dict(d):
        try:
            g = GridSpec(int(d["grid"]["n_max"]), int(d["grid"]["m_min"]),
                         int(d["grid"]["m_max"]))
            flags = tuple((str(f[0]), int(f[1]), int(f[2])) for f in d.get("flags", []))
            return Potential(g, np.array(d["a"], dtype=float).reshape(g.n_max, g.width),
                             np.array(d["b"], dtype=float).reshape(g.n_max + 1, g.width - 1),
                             np.array(d["c"], dtype=float).reshape(g.n_max + 1, g.width),
                             flags=flags)
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError("malformed potential document: %s" % exc)

    @staticmethod
    def from_json(text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError("potential document is not valid JSON: %s" % exc)
        return Potential.from_dict(d)


def potentials_equal(p1: Potential, p2: Potential) -> bool:
    """Exact equality of grid and all field entries."""
    return (p1.grid == p2.grid and np.array_equal(p1.a, p2.a)
            and np.array_equal(p1.b, p2.b) and np.array_equal(p1.c, p2.c))


_DEFAULT_RANGES = {"a": (0.5, 1.5), "b": (-1.0, 1.0), "c": (-1.0, 1.0)}


def make_potential(preset, grid: GridSpec, c0=0.0, seed=0, ranges=None) -> Potential:
    """Construct a potential from a named preset.

    free:                a = 1, b = 1, c = 0
    constant:            a = 1, b = 1, c = c0
    seeded_random:       entries drawn uniformly from ``ranges`` with a fixed
                         draw order, reproducible from ``seed``; the a-range
                         must be strictly positive.
    """
    na, wb, nc = grid.n_max, grid.width, grid.n_count
    if preset == "free":
        return Potential(grid, np.ones((na, wb)), np.ones((nc, wb - 1)),
                         np.zeros((nc, wb)))
    if preset == "constant":
        return Potential(grid, np.ones((na, wb)), np.ones((nc, wb - 1)),
                         np.full((nc, wb), float(c0)))
    if preset == "seeded_random":
        r = dict(_DEFAULT_RANGES)
        r.update(ranges or {})
        lo, hi = r["a"]
        if lo <= 0:
            raise ValidationError(
                "a-range must be strictly positive, got [%g, %g]" % (lo, hi))
        rng = np.random.default_rng(seed)
        a = rng.uniform(lo, hi, size=(na, wb))
        b = rng.uniform(r["b"][0], r["b"][1], size=(nc, wb - 1))
        c = rng.uniform(r["c"][0], r["c"][1], size=(nc, wb))
        return Potential(grid, a, b, c)
    raise ValidationError("unknown preset %r" % (preset,))
