"""Polynomial switched systems on semi-algebraic partitions.

A system is a box, a family of regions {chi_i = 0, xi_ik >= 0}, explicit
boundary varieties chi_ij, and per-region vertex dynamics (simplical
uncertainty; a single vertex encodes the certain case).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial, PolyVector, parse_polynomial, parse_vector

WITNESS_TOL = 1e-9
SIMPLEX_TOL = 1e-12


class SystemFormatError(ValueError):
    pass


@dataclass
class SemiAlgebraicRegion:
    rid: int
    chi: Polynomial
    xi: list                 # list[Polynomial]
    witness: np.ndarray

    def contains(self, x, tol: float) -> bool:
        return abs(self.chi(x)) <= tol and all(g(x) >= -tol for g in self.xi)

    def contains_many(self, X, tol: float) -> np.ndarray:
        mask = np.abs(self.chi.eval_many(X)) <= tol
        for g in self.xi:
            mask &= g.eval_many(X) >= -tol
        return mask


@dataclass
class BoundaryVariety:
    i: int
    j: int
    chi: Polynomial
    witness: np.ndarray | None = None

    @property
    def pair(self):
        return (self.i, self.j)


@dataclass
class SubsystemDynamics:
    vertices: list            # list[PolyVector], length L_i >= 1

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("need at least one vertex field")
        dims = {v.dim for v in self.vertices}
        if len(dims) != 1:
            raise ValueError("vertex fields have mixed dimensions")

    @property
    def count(self) -> int:
        return len(self.vertices)


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)   # (name, status, detail)
    caveats: list = field(default_factory=list)

    def add(self, name, status, detail=""):
        self.checks.append((name, status, detail))

    @property
    def has_fail(self) -> bool:
        return any(s == "fail" for _, s, _ in self.checks)

    @property
    def has_warn(self) -> bool:
        return any(s == "warn" for _, s, _ in self.checks)

    def to_dict(self):
        return {
            "checks": [{"name": n, "status": s, "detail": d} for n, s, d in self.checks],
            "caveats": list(self.caveats),
        }


@dataclass
class SwitchedSystem:
    dimension: int
    box: tuple               # (lo array, hi array)
    regions: dict            # rid -> SemiAlgebraicRegion
    boundaries: list         # list[BoundaryVariety]
    dynamics: dict           # rid -> SubsystemDynamics
    origin_regions: set = field(default_factory=set)
    source_hash: str = ""

    def __post_init__(self):
        for b in self.boundaries:
            if b.i == b.j:
                raise SystemFormatError(f"boundary ({b.i},{b.j}) must join distinct regions")
            if b.i not in self.regions or b.j not in self.regions:
                raise SystemFormatError(f"boundary ({b.i},{b.j}) references unknown region")
        for rid in self.dynamics:
            if rid not in self.regions:
                raise SystemFormatError(f"dynamics for unknown region {rid}")
        for rid in self.regions:
            if rid not in self.dynamics:
                raise SystemFormatError(f"region {rid} has no dynamics")

    # -- queries ------------------------------------------------------
    def locate(self, x, tol: float) -> set:
        """Region ids whose tol-relaxed membership test passes at x."""
        if tol <= 0:
            raise ValueError("tol must be > 0")
        x = np.asarray(x, dtype=float)
        return {rid for rid, r in self.regions.items() if r.contains(x, tol)}

    def field_at(self, rid: int, theta) -> PolyVector:
        """Convex combination of the region's vertex fields."""
        dyn = self.dynamics[rid]
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (dyn.count,):
            raise ValueError(f"theta must have length {dyn.count}")
        if np.any(theta < 0) or abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"theta {theta.tolist()} is not on the simplex")
        comps = [Polynomial.zero(self.dimension) for _ in range(self.dimension)]
        for w, v in zip(theta, dyn.vertices):
            if w == 0.0:
                continue
            for k in range(self.dimension):
                comps[k] = comps[k] + v[k] * float(w)
        return PolyVector(comps)

    def boundary(self, i: int, j: int) -> BoundaryVariety:
        for b in self.boundaries:
            if {b.i, b.j} == {i, j}:
                return b
        raise KeyError(f"no boundary between regions {i} and {j}")

    def in_box(self, x) -> bool:
        lo, hi = self.box
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= lo) and np.all(x <= hi))

    # -- validation -----------------------------------------------------
    def validate(self, rng=None, samples: int = 100000) -> ValidationReport:
        rep = ValidationReport()
        rng = rng or np.random.default_rng(0)
        lo, hi = self.box
        for rid, r in sorted(self.regions.items()):
            ok = r.contains(r.witness, WITNESS_TOL)
            rep.add(f"region[{rid}].witness", "pass" if ok else "fail",
                    f"witness {r.witness.tolist()}")
        for b in self.boundaries:
            name = f"boundary[{b.i},{b.j}]"
            if b.witness is not None and abs(b.chi(b.witness)) <= WITNESS_TOL:
                rep.add(f"{name}.witness", "pass", f"witness {b.witness.tolist()}")
                w = b.witness
            else:
                # no usable witness: sample for a sign change / near-zero
                X = rng.uniform(lo, hi, size=(samples, self.dimension))
                vals = b.chi.eval_many(X)
                if vals.min() < 0 < vals.max() or np.abs(vals).min() <= WITNESS_TOL:
                    rep.add(f"{name}.witness", "pass", "zero located by sampling")
                    k = int(np.abs(vals).argmin())
                    w = X[k]
                else:
                    rep.add(f"{name}.witness", "warn",
                            f"no boundary witness found among {samples} samples")
                    w = None
            if w is not None:
                tol = 1e-6
                for side in (b.i, b.j):
                    if not self.regions[side].contains(w, tol):
                        rep.add(f"{name}.adjacency[{side}]", "warn",
                                f"boundary witness not in closure of region {side}")
        zero = np.zeros(self.dimension)
        for rid in sorted(self.origin_regions):
            r = self.regions[rid]
            ok = abs(r.chi(zero)) <= WITNESS_TOL and all(g(zero) >= -WITNESS_TOL for g in r.xi)
            rep.add(f"origin_region[{rid}]", "pass" if ok else "fail",
                    "origin satisfies region membership" if ok else
                    "origin violates region membership")
        rep.caveats.append(
            "covering regularity is checked by sampled witnesses only; "
            "it is not a proof of the nice-covering conditions"
        )
        rep.caveats.append(
            "local straight-line escape (covering condition 4) has no finite test "
            "and is not checked"
        )
        return rep


# -- serialization -----------------------------------------------------------

def parse_system(doc: dict, source_hash: str = "") -> SwitchedSystem:
    try:
        n = int(doc["dimension"])
        box_raw = doc["box"]
        lo = np.array([float(b[0]) for b in box_raw])
        hi = np.array([float(b[1]) for b in box_raw])
        if lo.shape != (n,) or np.any(lo >= hi):
            raise SystemFormatError("box must be n pairs [lo, hi] with lo < hi")
        regions = {}
        for rdoc in doc["regions"]:
            rid = int(rdoc["id"])
            regions[rid] = SemiAlgebraicRegion(
                rid=rid,
                chi=parse_polynomial(rdoc["chi"], n),
                xi=[parse_polynomial(s, n) for s in rdoc.get("xi", [])],
                witness=np.array([float(v) for v in rdoc["witness"]]),
            )
        boundaries = []
        for bdoc in doc.get("boundaries", []):
            boundaries.append(BoundaryVariety(
                i=int(bdoc["i"]),
                j=int(bdoc["j"]),
                chi=parse_polynomial(bdoc["chi_ij"], n),
                witness=(np.array([float(v) for v in bdoc["witness"]])
                         if "witness" in bdoc else None),
            ))
        dynamics = {}
        for rid_s, vertices in doc["dynamics"].items():
            dynamics[int(rid_s)] = SubsystemDynamics(
                vertices=[parse_vector(v, n) for v in vertices]
            )
        origin = {int(r) for r in doc.get("origin_regions", [])}
    except SystemFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SystemFormatError(f"malformed system description: {exc}") from exc
    return SwitchedSystem(
        dimension=n,
        box=(lo, hi),
        regions=regions,
        boundaries=boundaries,
        dynamics=dynamics,
        origin_regions=origin,
        source_hash=source_hash,
    )


def load_system(path) -> SwitchedSystem:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SystemFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_system(doc, source_hash=hashlib.sha256(raw).hexdigest())


def system_to_dict(sys: SwitchedSystem) -> dict:
    lo, hi = sys.box
    return {
        "dimension": sys.dimension,
        "box": [[float(a), float(b)] for a, b in zip(lo, hi)],
        "regions": [
            {
                "id": rid,
                "chi": r.chi.to_string(),
                "xi": [g.to_string() for g in r.xi],
                "witness": [float(v) for v in r.witness],
            }
            for rid, r in sorted(sys.regions.items())
        ],
        "boundaries": [
            {
                "i": b.i,
                "j": b.j,
                "chi_ij": b.chi.to_string(),
                **({"witness": [float(v) for v in b.witness]} if b.witness is not None else {}),
            }
            for b in sys.boundaries
        ],
        "dynamics": {
            str(rid): [v.to_strings() for v in dyn.vertices]
            for rid, dyn in sorted(sys.dynamics.items())
        },
        "origin_regions": sorted(sys.origin_regions),
    }
