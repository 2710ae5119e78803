"""Independent verification checks and machine-readable reports.

Every check returns a CheckResult with the measured deviation, the tolerance it
was held to, and the location of the worst violation; a report aggregates them
and serializes to JSON or a plain-text table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .lattice import Potential
from .operator import Field, apply_hamiltonian, assemble_dense, eigendecompose
from .polysolve import PolyTable, eval_polytable


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    worst_site: tuple | None = None
    worst_lambda: float | None = None
    informational: bool = False
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.informational or self.deviation <= self.tolerance

    def to_dict(self):
        return {
            "name": self.name,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "informational": self.informational,
            "worst_site": list(self.worst_site) if self.worst_site else None,
            "worst_lambda": self.worst_lambda,
            "details": self.details,
        }


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    def add(self, check: CheckResult):
        self.checks.append(check)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def to_json(self):
        return json.dumps({"all_passed": self.all_passed,
                           "checks": [c.to_dict() for c in self.checks]}, indent=2)

    def to_text(self):
        lines = ["%-34s %-6s %12s %12s  %s" % ("check", "status", "deviation",
                                               "tolerance", "worst at")]
        for c in self.checks:
            where = ""
            if c.worst_site is not None:
                where = "site %s" % (c.worst_site,)
            if c.worst_lambda is not None:
                where += (" " if where else "") + "lambda=%.17g" % c.worst_lambda
            status = "info" if c.informational else ("pass" if c.passed else "FAIL")
            lines.append("%-34s %-6s %12.3e %12.1e  %s"
                         % (c.name, status, c.deviation, c.tolerance, where))
        return "\n".join(lines) + "\n"


def residual_lambdas(sd_eigenvalues, seed, count=10):
    """Seeded sample of spectral parameters, drawn from one unit beyond the
    spectral hull of the reference."""
    lam = np.asarray(sd_eigenvalues, dtype=float)
    rng = np.random.default_rng(seed)
    return rng.uniform(lam.min() - 1.0, lam.max() + 1.0, size=count)


def equation_residual(pot: Potential, table: PolyTable, lambdas,
                      tolerance=1e-9, name="equation_residual") -> CheckResult:
    """Worst relative residual of the lattice equation over the given spectral
    parameters, all boundary columns, and all sites whose equation stays inside
    the truncation (n + 1 <= n_max)."""
    g = pot.grid
    if table.grid != g:
        raise ValidationError("table grid does not match potential grid")
    rows = g.n_max * g.width       # sites with n + 1 <= n_max, flat order
    worst, worst_site, worst_lam = 0.0, None, None
    for lam in lambdas:
        phi = eval_polytable(table, float(lam))
        norm = max(1.0, float(np.abs(phi).max()))
        for s in range(g.width):
            f = Field(g, phi[:, s].reshape(g.n_count, g.width))
            r = apply_hamiltonian(pot, f).flat() - lam * phi[:, s]
            if rows:
                dev = float(np.abs(r[:rows]).max()) / norm
                if dev > worst:
                    worst = dev
                    flat = int(np.argmax(np.abs(r[:rows])))
                    worst_site = (flat // g.width, g.m_min + flat % g.width)
                    worst_lam = float(lam)
    return CheckResult(name, worst, tolerance, worst_site=worst_site,
                       worst_lambda=worst_lam)


def compare_potentials(p1: Potential, p2: Potential) -> dict:
    """Max entrywise differences per field over the shared reconstructible
    domain (entries flagged as copied in either input are excluded)."""
    if p1.grid != p2.grid:
        raise ValidationError("potentials live on different grids")
    g = p1.grid
    flagged = set(p1.flags) | set(p2.flags)
    out = {}
    for fname, a1, a2 in (("a", p1.a, p2.a), ("b", p1.b, p2.b), ("c", p1.c, p2.c)):
        diff = np.abs(np.array(a1) - np.array(a2))
        for (fn, n, m) in flagged:
            if fn != fname:
                continue
            if fname == "a":
                diff[n - 1, m - g.m_min] = 0.0
            elif fname == "b":
                diff[n, m - g.m_min - 1] = 0.0
            else:
                diff[n, m - g.m_min] = 0.0
        out[fname] = float(diff.max()) if diff.size else 0.0
    return out


def isospectral_check(ref_pot: Potential, new_pot: Potential, tol=1e-8,
                      states=(), added_lambdas=()) -> list:
    """Spectrum comparison plus eigenfield tests.

    Returns a list of CheckResults: the sorted-eigenvalue comparison, one
    eigenfield residual per supplied (lam, Field) state, and an informational
    entry locating each added eigenvalue in the new spectrum.
    """
    if ref_pot.grid != new_pot.grid:
        raise ValidationError("potentials live on different grids")
    ref_dec = eigendecompose(assemble_dense(ref_pot), 1e-12)
    new_dec = eigendecompose(assemble_dense(new_pot), 1e-12)
    diff = float(np.abs(ref_dec.eigenvalues - new_dec.eigenvalues).max())
    nu = int(np.argmax(np.abs(ref_dec.eigenvalues - new_dec.eigenvalues)))
    results = [CheckResult("isospectral_eigenvalues", diff, tol,
                           worst_lambda=float(ref_dec.eigenvalues[nu]))]
    H = assemble_dense(new_pot)
    scale = max(1.0, float(np.abs(H).max()))
    for i, (lam, st) in enumerate(states):
        v = st.flat()
        nrm = max(float(np.abs(v).max()), 1e-300)
        r = float(np.abs(H @ v - lam * v).max()) / (nrm * scale)
        results.append(CheckResult("eigenfield_residual_%d" % i, r, tol,
                                   worst_lambda=float(lam)))
    if len(added_lambdas):
        found = {}
        for lam in added_lambdas:
            d = float(np.abs(new_dec.eigenvalues - lam).min())
            found["%.17g" % lam] = d
        worst_ins = max(found.values())
        results.append(CheckResult("added_eigenvalue_pattern", worst_ins, tol,
                                   informational=True, details=found))
    return results
