"""Pluggable conic backend: block-PSD feasibility programs in, values out.

The native backend wraps cvxpy (CLARABEL first, SCS as fallback).  Problems
are small (blocks of size <= ~20), so expressions are built term by term.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_ERROR = "numerical_error"

# Per-solver option overrides, applied on every solve call.  Kept empty by
# default: pushing SCS below its stock tolerance tends to stall on problems
# whose Gram blocks are forced singular at the origin, returning a *worse*
# iterate than the stock stopping rule does.
SOLVER_OPTIONS: dict = {}
TIMEOUT = "timeout"


@dataclass
class SdpProblem:
    """Abstract conic feasibility problem.

    equality_rows entries are (terms, rhs) with terms mapping variable keys
    to coefficients.  Keys: ("s", name) for free scalars; ("e", block, i, j)
    with i <= j for entries of symmetric PSD blocks (the coefficient
    multiplies Q[i, j]; symmetric pairs must be accounted for by the caller).
    """

    psd_blocks: list = field(default_factory=list)   # (block_id, size)
    free_scalars: list = field(default_factory=list)
    equality_rows: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def validate(self):
        sizes = dict(self.psd_blocks)
        if any(s < 1 for s in sizes.values()):
            raise ValueError("PSD block sizes must be >= 1")
        scalars = set(self.free_scalars)
        for terms, _ in self.equality_rows:
            for key in terms:
                if key[0] == "s":
                    if key[1] not in scalars:
                        raise ValueError(f"row references undeclared scalar {key[1]!r}")
                elif key[0] == "e":
                    _, b, i, j = key
                    if b not in sizes:
                        raise ValueError(f"row references undeclared block {b!r}")
                    if not (0 <= i <= j < sizes[b]):
                        raise ValueError(f"entry ({i},{j}) out of range for block {b!r}")
                else:
                    raise ValueError(f"unknown variable key {key!r}")


@dataclass
class SdpSolution:
    status: str
    block_values: dict = field(default_factory=dict)
    scalar_values: dict = field(default_factory=dict)
    primal_residual: float = float("nan")
    min_eigenvalues: dict = field(default_factory=dict)
    solver_status: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


class BackendUnavailable(RuntimeError):
    pass


def _residual(problem: SdpProblem, blocks, scalars) -> float:
    worst = 0.0
    for terms, rhs in problem.equality_rows:
        acc = -rhs
        for key, coef in terms.items():
            if key[0] == "s":
                acc += coef * scalars[key[1]]
            else:
                _, b, i, j = key
                acc += coef * blocks[b][i, j]
        worst = max(worst, abs(acc))
    return worst


class CvxpyBackend:
    """Default conic backend via cvxpy."""

    def __init__(self, solvers=("CLARABEL", "SCS")):
        self.solvers = solvers

    def solve(self, problem: SdpProblem) -> SdpSolution:
        try:
            import cvxpy as cp
        except ImportError as exc:  # pragma: no cover
            raise BackendUnavailable("cvxpy is not installed") from exc

        problem.validate()
        blocks = {}
        for bid, size in problem.psd_blocks:
            if size == 1:
                v = cp.Variable((1, 1), name=str(bid))
                blocks[bid] = (v, [v[0, 0] >= 0])
            else:
                v = cp.Variable((size, size), PSD=True, name=str(bid))
                blocks[bid] = (v, [])
        scalars = {name: cp.Variable(name=f"s_{k}") for k, name in enumerate(problem.free_scalars)}

        cons = []
        for _, (v, extra) in blocks.items():
            cons.extend(extra)
        for terms, rhs in problem.equality_rows:
            expr = 0
            for key, coef in terms.items():
                if key[0] == "s":
                    expr = expr + coef * scalars[key[1]]
                else:
                    _, b, i, j = key
                    expr = expr + coef * blocks[b][0][i, j]
            cons.append(expr == rhs)

        if problem.objective:
            obj = 0
            for key, coef in problem.objective.items():
                if key[0] == "s":
                    obj = obj + coef * scalars[key[1]]
                else:
                    _, b, i, j = key
                    obj = obj + coef * blocks[b][0][i, j]
            objective = cp.Minimize(obj)
        else:
            objective = cp.Minimize(0)

        prob = cp.Problem(objective, cons)

        def package(solver, status):
            bvals = {}
            eigs = {}
            for bid, (v, _) in blocks.items():
                Q = np.atleast_2d(np.asarray(v.value, dtype=float))
                Q = 0.5 * (Q + Q.T)
                bvals[bid] = Q
                eigs[bid] = float(np.linalg.eigvalsh(Q).min()) if Q.size else 0.0
            svals = {name: float(var.value) for name, var in scalars.items()}
            return SdpSolution(
                status=FEASIBLE,
                block_values=bvals,
                scalar_values=svals,
                primal_residual=_residual(problem, bvals, svals),
                min_eigenvalues=eigs,
                solver_status=f"{solver}:{status}",
            )

        last_exc = None
        best_inaccurate = None
        saw_infeasible_inaccurate = None
        for solver in self.solvers:
            kwargs = SOLVER_OPTIONS.get(solver, {})
            try:
                prob.solve(solver=solver, **kwargs)
            except Exception as exc:  # solver-level failure; try the next one
                last_exc = exc
                continue
            status = prob.status
            if status == "optimal":
                return package(solver, status)
            if status == "optimal_inaccurate":
                # keep the best low-residual candidate but let the next
                # solver have a shot at a clean answer
                cand = package(solver, status)
                if best_inaccurate is None or cand.primal_residual < best_inaccurate.primal_residual:
                    best_inaccurate = cand
                continue
            if status == "infeasible":
                return SdpSolution(status=INFEASIBLE, solver_status=f"{solver}:{status}")
            if status == "infeasible_inaccurate":
                saw_infeasible_inaccurate = f"{solver}:{status}"
                continue
            if status in ("unbounded", "unbounded_inaccurate"):
                return SdpSolution(status=UNBOUNDED, solver_status=f"{solver}:{status}")
            last_exc = RuntimeError(f"solver status {status}")
        if best_inaccurate is not None:
            return best_inaccurate
        if saw_infeasible_inaccurate is not None:
            return SdpSolution(status=INFEASIBLE, solver_status=saw_infeasible_inaccurate)
        return SdpSolution(status=NUMERICAL_ERROR, solver_status=str(last_exc))


_default_backend = None


def default_backend() -> CvxpyBackend:
    global _default_backend
    if _default_backend is None:
        _default_backend = CvxpyBackend()
    return _default_backend
