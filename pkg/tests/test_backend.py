import numpy as np
import pytest

from swsos.backend import (FEASIBLE, INFEASIBLE, NUMERICAL_ERROR,
                           CvxpyBackend, SdpProblem, default_backend)


def _problem_psd_scalar(rhs):
    """One 1x1 PSD block q with the row q = rhs (feasible iff rhs >= 0)."""
    p = SdpProblem()
    p.psd_blocks.append(("Q", 1))
    p.equality_rows.append(({("e", "Q", 0, 0): 1.0}, rhs))
    return p


def test_feasible_scalar_block():
    sol = default_backend().solve(_problem_psd_scalar(2.0))
    assert sol.status == FEASIBLE
    assert abs(sol.block_values["Q"][0, 0] - 2.0) < 1e-6
    assert sol.feasible


def test_infeasible_scalar_block():
    sol = default_backend().solve(_problem_psd_scalar(-1.0))
    assert sol.status == INFEASIBLE
    assert not sol.feasible


def test_free_scalar_equality():
    p = SdpProblem()
    p.free_scalars.append("t")
    p.psd_blocks.append(("Q", 1))
    # t + q = 3 and t - q = 1  =>  t = 2, q = 1
    p.equality_rows.append(({("s", "t"): 1.0, ("e", "Q", 0, 0): 1.0}, 3.0))
    p.equality_rows.append(({("s", "t"): 1.0, ("e", "Q", 0, 0): -1.0}, 1.0))
    sol = default_backend().solve(p)
    assert sol.status == FEASIBLE
    assert abs(sol.scalar_values["t"] - 2.0) < 1e-6


def test_objective_breaks_upward_cone():
    # q >= 1 is feasible for any larger q; minimizing trace must pin q = 1
    p = SdpProblem()
    p.psd_blocks.append(("Q", 2))
    p.equality_rows.append(({("e", "Q", 0, 0): 1.0, ("e", "Q", 1, 1): -1.0}, 1.0))
    p.objective[("e", "Q", 0, 0)] = 1.0
    p.objective[("e", "Q", 1, 1)] = 1.0
    sol = default_backend().solve(p)
    assert sol.status == FEASIBLE
    assert abs(np.trace(sol.block_values["Q"]) - 1.0) < 1e-5


def test_validate_rejects_unknown_keys():
    p = SdpProblem()
    p.equality_rows.append(({("e", "missing", 0, 0): 1.0}, 0.0))
    with pytest.raises(ValueError):
        p.validate()


def test_validate_rejects_out_of_range_index():
    p = SdpProblem()
    p.psd_blocks.append(("Q", 1))
    p.equality_rows.append(({("e", "Q", 1, 1): 1.0}, 0.0))
    with pytest.raises(ValueError):
        p.validate()


def test_unknown_solver_name_is_skipped():
    backend = CvxpyBackend(solvers=("NOSUCHSOLVER", "SCS"))
    sol = backend.solve(_problem_psd_scalar(1.0))
    assert sol.status == FEASIBLE


def test_all_solvers_unavailable():
    backend = CvxpyBackend(solvers=("NOSUCHSOLVER",))
    sol = backend.solve(_problem_psd_scalar(1.0))
    assert sol.status == NUMERICAL_ERROR


def test_reported_residual_matches_solution():
    sol = default_backend().solve(_problem_psd_scalar(2.0))
    assert sol.primal_residual < 1e-6
    assert "Q" in sol.min_eigenvalues
