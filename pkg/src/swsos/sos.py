"""SOS decomposition and Positivstellensatz constraint assembly.

Constraint templates follow the classic recipe: a target polynomial minus
free-multiplier combinations of equality generators, minus SOS-multiplier
combinations of inequality generators, minus a strictness margin, must equal
one master SOS form.  Everything is flattened coefficient-wise into an
abstract block-PSD feasibility program for the conic backend.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .backend import (
    FEASIBLE,
    INFEASIBLE,
    SdpProblem,
    SdpSolution,
    default_backend,
)
from .poly import Monomial, Polynomial, grlex_key, monomial_basis

GRAM_SYM_TOL = 1e-9
GRAM_EIG_TOL = 1e-7
RESIDUAL_OK = 1e-7
RESIDUAL_MARGINAL = 1e-5


class DegreeBookkeepingError(ValueError):
    """A multiplier/generator product exceeds the declared degree cap."""


class NumericalInfeasibility(RuntimeError):
    """A Gram matrix fails its PSD tolerance; extraction refused."""


# -- decision polynomials --------------------------------------------------

class LinPoly:
    """Polynomial whose coefficients are affine expressions in named scalars.

    terms maps monomial -> {None: constant, var_name: coefficient}.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict | None = None):
        self.dim = dim
        self.terms = {}
        for mono, expr in (terms or {}).items():
            cleaned = {k: float(v) for k, v in expr.items() if v != 0.0}
            if cleaned:
                self.terms[tuple(mono)] = cleaned

    @staticmethod
    def from_poly(p: Polynomial) -> "LinPoly":
        return LinPoly(p.dim, {m: {None: c} for m, c in p.terms.items()})

    @staticmethod
    def decision(dim: int, name: str, monomials) -> "LinPoly":
        """Fresh decision polynomial with one scalar per basis monomial."""
        return LinPoly(dim, {m: {f"{name}[{_mono_tag(m)}]": 1.0} for m in monomials})

    def variables(self):
        out = set()
        for expr in self.terms.values():
            out.update(k for k in expr if k is not None)
        return out

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def min_degree(self) -> int:
        return min((sum(m) for m in self.terms), default=0)

    def __add__(self, other):
        if isinstance(other, Polynomial):
            other = LinPoly.from_poly(other)
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        t = {m: dict(e) for m, e in self.terms.items()}
        for m, expr in other.terms.items():
            acc = t.setdefault(m, {})
            for k, v in expr.items():
                acc[k] = acc.get(k, 0.0) + v
        return LinPoly(self.dim, t)

    def __sub__(self, other):
        if isinstance(other, Polynomial):
            other = LinPoly.from_poly(other)
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "LinPoly":
        return LinPoly(self.dim, {m: {k: v * c for k, v in e.items()} for m, e in self.terms.items()})

    def mul_poly(self, p: Polynomial) -> "LinPoly":
        t = {}
        for m1, expr in self.terms.items():
            for m2, c in p.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                acc = t.setdefault(m, {})
                for k, v in expr.items():
                    acc[k] = acc.get(k, 0.0) + v * c
        return LinPoly(self.dim, t)

    def diff(self, k: int) -> "LinPoly":
        t = {}
        for m, expr in self.terms.items():
            if m[k] == 0:
                continue
            dm = list(m)
            dm[k] -= 1
            dm = tuple(dm)
            acc = t.setdefault(dm, {})
            for key, v in expr.items():
                acc[key] = acc.get(key, 0.0) + v * m[k]
        return LinPoly(self.dim, t)

    def lie(self, F) -> "LinPoly":
        """<grad self, F> for a fixed PolyVector F."""
        out = LinPoly(self.dim)
        for k in range(self.dim):
            out = out + self.diff(k).mul_poly(F[k])
        return out

    def instantiate(self, values: dict) -> Polynomial:
        terms = {}
        for m, expr in self.terms.items():
            c = expr.get(None, 0.0) + sum(v * values[k] for k, v in expr.items() if k is not None)
            if c != 0.0:
                terms[m] = c
        return Polynomial(self.dim, terms)


def _mono_tag(m: Monomial) -> str:
    return ",".join(str(e) for e in m)


def mono_from_tag(tag: str) -> Monomial:
    return tuple(int(s) for s in tag.split(","))


# -- Gram machinery --------------------------------------------------------

@dataclass
class GramRepresentation:
    basis: list            # ordered monomials
    gram: np.ndarray       # symmetric matrix, len(basis) square

    def polynomial(self, dim: int) -> Polynomial:
        terms = {}
        b = self.basis
        Q = self.gram
        for i in range(len(b)):
            for j in range(i, len(b)):
                m = tuple(a + c for a, c in zip(b[i], b[j]))
                w = Q[i, j] if i == j else 2.0 * Q[i, j]
                terms[m] = terms.get(m, 0.0) + w
        return Polynomial(dim, terms)

    def check(self) -> dict:
        Q = self.gram
        sym = float(np.abs(Q - Q.T).max()) if Q.size else 0.0
        scale = float(np.linalg.norm(Q)) if Q.size else 0.0
        mineig = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min()) if Q.size else 0.0
        return {
            "symmetry_defect": sym,
            "min_eigenvalue": mineig,
            "norm": scale,
            "psd_ok": mineig >= -GRAM_EIG_TOL * max(1.0, scale),
        }


def gram_basis(dim: int, max_half_deg: int, min_half_deg: int = 0) -> list:
    """Monomials of total degree in [min_half_deg, max_half_deg], grlex."""
    monos = [m for m in monomial_basis(dim, max_half_deg) if sum(m) >= min_half_deg]
    return sorted(monos, key=grlex_key)


# -- constraints -----------------------------------------------------------

@dataclass
class PositivityConstraint:
    """target - sum r_i * a_i - sum s_j * b_j - margin must be SOS."""

    cid: str
    target: object                      # Polynomial or LinPoly
    equality_generators: list = field(default_factory=list)
    inequality_generators: list = field(default_factory=list)
    margin: float = 0.0
    margin_poly: Polynomial | None = None   # optional positive-definite margin
    multiplier_degrees: dict = field(default_factory=dict)  # overrides per generator index

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        dims = {g.dim for g in self.equality_generators}
        dims |= {g.dim for g in self.inequality_generators}
        dims.add(self.target.dim)
        if self.margin_poly is not None:
            dims.add(self.margin_poly.dim)
        if len(dims) != 1:
            raise ValueError("all constraint polynomials must share one dimension")
        self.dim = dims.pop()

    def as_linpoly(self) -> LinPoly:
        t = self.target
        return t if isinstance(t, LinPoly) else LinPoly.from_poly(t)


def _even_up(d: int) -> int:
    return d if d % 2 == 0 else d + 1


@dataclass
class SosCertificate:
    gram_blocks: dict = field(default_factory=dict)       # id -> GramRepresentation
    free_multipliers: dict = field(default_factory=dict)  # id -> Polynomial
    residual_norm: float = float("nan")
    min_eigenvalues: dict = field(default_factory=dict)
    status: str = FEASIBLE
    solver_status: str = ""
    scalar_values: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def quality(self) -> str:
        if self.residual_norm <= RESIDUAL_OK and all(
            e >= -GRAM_EIG_TOL for e in self.min_eigenvalues.values()
        ):
            return "ok"
        if self.residual_norm <= RESIDUAL_MARGINAL:
            return "marginal"
        return "poor"


# -- assembly --------------------------------------------------------------

def assemble(constraints, identities=()) -> SdpProblem:
    """Flatten Positivstellensatz constraints into one block-PSD program.

    identities: extra LinPoly expressions required to vanish identically
    (exact linear equality rows, no PSD block).
    """
    problem = SdpProblem()
    scalars = {}

    def declare_scalar(name):
        if name not in scalars:
            scalars[name] = True
            problem.free_scalars.append(name)

    gram_layout = {}   # block id -> (basis, constraint id, role)

    for cons in constraints:
        dim = cons.dim
        target = cons.as_linpoly()
        for v in sorted(target.variables()):
            declare_scalar(v)

        d_t = target.degree()
        if cons.margin_poly is not None:
            d_t = max(d_t, cons.margin_poly.degree())
        d0 = _even_up(d_t)

        # rows[mono] = (terms dict, rhs); identity is
        #   target - margin - sum r a - sum s b - s0 = 0 coefficient-wise
        rows = {}

        def row(mono):
            if mono not in rows:
                rows[mono] = ({}, 0.0)
            return mono

        def add_var(mono, key, coef):
            terms, rhs = rows[row(mono)]
            terms[key] = terms.get(key, 0.0) + coef
            rows[mono] = (terms, rhs)

        def add_const(mono, value):
            # moves a known value to the right-hand side
            terms, rhs = rows[row(mono)]
            rows[mono] = (terms, rhs - value)

        # target
        for mono, expr in target.terms.items():
            for k, v in expr.items():
                if k is None:
                    add_const(mono, v)
                else:
                    add_var(mono, ("s", k), v)
        # margin
        zero_mono = (0,) * dim
        if cons.margin:
            add_const(zero_mono, -cons.margin)
        if cons.margin_poly is not None:
            for mono, c in cons.margin_poly.terms.items():
                add_const(mono, -c)

        # free multipliers r_i on equality generators
        for idx, a in enumerate(cons.equality_generators):
            cap = cons.multiplier_degrees.get(("eq", idx), d_t - a.degree())
            if cap < 0 and ("eq", idx) not in cons.multiplier_degrees:
                # generator degree exceeds the target's: the only multiplier
                # that keeps the identity balanced is zero, so drop it
                continue
            if cap < 0 or cap + a.degree() > d0:
                raise DegreeBookkeepingError(
                    f"{cons.cid}: free multiplier for equality generator {idx} "
                    f"(degree {a.degree()}) exceeds cap (target degree {d_t})"
                )
            rbasis = monomial_basis(dim, cap)
            for mono_r in rbasis:
                var = ("s", f"{cons.cid}:r{idx}[{_mono_tag(mono_r)}]")
                declare_scalar(var[1])
                for mono_a, ca in a.terms.items():
                    m = tuple(x + y for x, y in zip(mono_r, mono_a))
                    add_var(m, var, -ca)

        # When the identity has no constant term and every generator is
        # nonnegative at the origin, each SOS multiplier attached to a
        # generator that is strictly positive there is forced to vanish at 0.
        # Dropping the constant monomial from those Gram bases is then
        # lossless and removes a structurally singular row (the problem
        # would otherwise have no strictly feasible point).
        zero_mono = (0,) * dim
        zt = rows.get(zero_mono)
        origin_forced = (
            (zt is None or (not zt[0] and zt[1] == 0.0))
            and all(a.terms.get(zero_mono, 0.0) == 0.0 for a in cons.equality_generators)
            and all(b.terms.get(zero_mono, 0.0) >= 0.0 for b in cons.inequality_generators)
        )

        # SOS multipliers s_j on inequality generators
        for idx, b in enumerate(cons.inequality_generators):
            sdeg = cons.multiplier_degrees.get(("ineq", idx), None)
            if sdeg is None:
                sdeg = d_t - b.degree()
                sdeg -= sdeg % 2
            if sdeg < 0 or sdeg + b.degree() > d0:
                raise DegreeBookkeepingError(
                    f"{cons.cid}: SOS multiplier for inequality generator {idx} "
                    f"(degree {b.degree()}) exceeds cap (target degree {d_t})"
                )
            bid = f"{cons.cid}:s{idx + 1}"
            lo_j = 1 if (origin_forced and b.terms.get(zero_mono, 0.0) > 0.0) else 0
            basis = gram_basis(dim, sdeg // 2, min_half_deg=min(lo_j, sdeg // 2))
            gram_layout[bid] = basis
            problem.psd_blocks.append((bid, len(basis)))
            for i in range(len(basis)):
                for j in range(i, len(basis)):
                    mz = tuple(x + y for x, y in zip(basis[i], basis[j]))
                    w = 1.0 if i == j else 2.0
                    for mono_b, cb in b.terms.items():
                        m = tuple(x + y for x, y in zip(mz, mono_b))
                        add_var(m, ("e", bid, i, j), -w * cb)

        # master SOS block s0: parity filter on total degree only
        support_min = min((sum(m) for m in rows), default=0)
        lo = (support_min + 1) // 2
        bid0 = f"{cons.cid}:s0"
        basis0 = gram_basis(dim, d0 // 2, min_half_deg=min(lo, d0 // 2))
        gram_layout[bid0] = basis0
        problem.psd_blocks.append((bid0, len(basis0)))
        for i in range(len(basis0)):
            for j in range(i, len(basis0)):
                m = tuple(x + y for x, y in zip(basis0[i], basis0[j]))
                w = 1.0 if i == j else 2.0
                add_var(m, ("e", bid0, i, j), -w)

        for mono in sorted(rows, key=grlex_key):
            problem.equality_rows.append(rows[mono])

    for ident in identities:
        for v in sorted(ident.variables()):
            declare_scalar(v)
        for mono in sorted(ident.terms, key=grlex_key):
            expr = ident.terms[mono]
            terms = {("s", k): v for k, v in expr.items() if k is not None}
            problem.equality_rows.append((terms, -expr.get(None, 0.0)))

    problem.meta["gram_layout"] = gram_layout
    problem.validate()
    return problem


def solve(problem: SdpProblem, backend=None) -> SdpSolution:
    return (backend or default_backend()).solve(problem)


def certificate_from_solution(problem: SdpProblem, sol: SdpSolution, dim: int) -> SosCertificate:
    layout = problem.meta.get("gram_layout", {})
    grams = {
        bid: GramRepresentation(basis=layout[bid], gram=sol.block_values[bid])
        for bid in layout
        if bid in sol.block_values
    }
    # group free scalars back into multiplier polynomials by name prefix
    free = {}
    for name, value in sol.scalar_values.items():
        if "[" not in name or not name.endswith("]"):
            continue
        prefix, tag = name[:-1].split("[", 1)
        free.setdefault(prefix, {})[mono_from_tag(tag)] = value
    multipliers = {k: Polynomial(dim, v) for k, v in free.items()}
    return SosCertificate(
        gram_blocks=grams,
        free_multipliers=multipliers,
        residual_norm=sol.primal_residual,
        min_eigenvalues=dict(sol.min_eigenvalues),
        status=sol.status,
        solver_status=sol.solver_status,
        scalar_values=dict(sol.scalar_values),
    )


# -- top-level operations --------------------------------------------------

def sos_decompose(p: Polynomial, backend=None) -> SosCertificate:
    """Find a Gram representation p = Z^T Q Z, or report infeasibility."""
    if p.is_zero():
        raise ValueError("zero polynomial")
    if p.degree() % 2 != 0:
        raise ValueError(f"degree {p.degree()} is odd; not a candidate SOS")
    cons = PositivityConstraint(cid="sos", target=p)
    problem = assemble([cons])
    sol = solve(problem, backend)
    if sol.status != FEASIBLE:
        return SosCertificate(status=sol.status, solver_status=sol.solver_status)
    cert = certificate_from_solution(problem, sol, p.dim)
    gram = cert.gram_blocks["sos:s0"]
    recon = gram.polynomial(p.dim)
    cert.residual_norm = (recon - p).coeff_norm()
    return cert


def extract_sos_split(cert: SosCertificate, block: str) -> list:
    """Symmetric factorization of a Gram block into squared polynomials."""
    if block not in cert.gram_blocks:
        raise KeyError(f"no Gram block {block!r}")
    rep = cert.gram_blocks[block]
    Q = 0.5 * (rep.gram + rep.gram.T)
    scale = max(1.0, float(np.linalg.norm(Q)))
    w, V = np.linalg.eigh(Q)
    if w.min() < -GRAM_EIG_TOL * scale:
        raise NumericalInfeasibility(
            f"block {block!r} has eigenvalue {w.min():.3e} below tolerance"
        )
    w = np.clip(w, 0.0, None)
    dim = len(rep.basis[0])
    out = []
    for k in range(len(w) - 1, -1, -1):  # largest eigenvalue first
        if w[k] == 0.0:
            continue
        coeffs = np.sqrt(w[k]) * V[:, k]
        terms = {m: c for m, c in zip(rep.basis, coeffs) if c != 0.0}
        if terms:
            out.append(Polynomial(dim, terms))
    return out
