"""Thin conic-solver interface shared by the SDP and QP layers.

All convex programs in the toolkit are assembled as cvxpy problems and
routed through `solve`, which tries a chain of backends and normalizes
the outcome.  Any installed conic solver meeting the 1e-7 feasibility
tolerance qualifies; the default chain is Clarabel (deterministic,
interior point) with an SCS fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp

from .errors import SolverFailure

#: Required feasibility tolerance for any backend used here.
FEASIBILITY_TOL = 1e-7

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
FAILED = "failed"

_SOLVER_KWARGS = {
    "CLARABEL": {"tol_feas": 1e-9, "tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9},
    "SCS": {"eps": 1e-9, "max_iters": 200_000},
}


@dataclass(frozen=True)
class SolverChain:
    """Ordered list of cvxpy backend names to try."""

    names: tuple = ("CLARABEL", "SCS")

    def __post_init__(self):
        available = set(cp.installed_solvers())
        usable = tuple(n for n in self.names if n in available)
        if not usable:
            raise SolverFailure(
                f"none of the requested solvers {self.names} is installed"
            )
        object.__setattr__(self, "names", usable)


DEFAULT_CHAIN = SolverChain()


def solve(problem, chain=DEFAULT_CHAIN):
    """Solve a cvxpy problem, retrying along the chain.

    Returns one of OPTIMAL / INFEASIBLE / FAILED.  An accurate status from
    any backend is trusted immediately; "inaccurate" statuses fall through
    to the next backend and are used only as a last resort (callers are
    expected to re-verify certificates independently).
    """
    fallback_values = None
    fallback_status = FAILED
    for name in chain.names:
        try:
            problem.solve(solver=name, **_SOLVER_KWARGS.get(name, {}))
        except Exception:
            continue
        status = problem.status
        if status == cp.OPTIMAL:
            return OPTIMAL
        if status == cp.INFEASIBLE:
            return INFEASIBLE
        if status == cp.OPTIMAL_INACCURATE and fallback_values is None:
            fallback_values = [(v, v.value) for v in problem.variables()]
            fallback_status = OPTIMAL
        elif status in (cp.INFEASIBLE_INACCURATE,) and fallback_status == FAILED:
            fallback_status = INFEASIBLE
    if fallback_values is not None:
        for var, value in fallback_values:
            var.value = value
    return fallback_status
