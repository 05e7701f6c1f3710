"""Exact solvers: dense bounded-variable simplex, binary branch-and-bound and
an exhaustive enumeration oracle.

The simplex keeps every non-basic variable at zero by complementing
variables that sit at their upper bound (``z = u - y``), so box constraints
never become tableau rows.  That matters for branch-and-bound, where every
node relaxation lives in the unit box.  The loops live in ``_lp_kernels``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _lp_kernels as _k
from .cop_core import ConstraintSystem, ContractError, VarDomain, objective_value

LP_FEAS_TOL = 1e-7


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


_STATUS = {
    _k.OPTIMAL: Status.OPTIMAL,
    _k.INFEASIBLE: Status.INFEASIBLE,
    _k.UNBOUNDED: Status.UNBOUNDED,
    _k.NUMERICAL_FAILURE: Status.NUMERICAL_FAILURE,
}


class Sense(str, enum.Enum):
    LE = "<="
    GE = ">="


class NumericalFailure(RuntimeError):
    """Raised by callers that cannot continue after a solver breakdown."""


@dataclass
class SolveOutcome:
    status: Status
    assignment: np.ndarray | None = None
    objective: float | None = None
    nodes_explored: int = 0
    reduced_costs: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def solve_lp(c, A, b, sense=None, var_lower=None, var_upper=None) -> SolveOutcome:
    """Minimise ``c @ x`` subject to row constraints and variable bounds.

    ``sense`` is a sequence of ``Sense`` values (or ``"<="``/``">="``),
    defaulting to all ``<=``.  Bounds default to ``0 <= x < inf``.  The
    returned ``reduced_costs`` cover structural then slack columns, in the
    orientation of the final tableau (complemented where a variable sits at
    its upper bound), so optimality means all of them are non-negative.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    b = np.asarray(b, dtype=float).ravel()
    m = b.size
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        A = A.reshape(m, n)
    if A.shape != (m, n):
        raise ContractError(f"inconsistent LP shapes: c {c.shape}, A {A.shape}, b {b.shape}")
    sense = [Sense.LE] * m if sense is None else [Sense(s) for s in sense]
    if len(sense) != m:
        raise ContractError("need one sense per row")
    lower = np.zeros(n) if var_lower is None else np.asarray(var_lower, dtype=float).ravel()
    upper = np.full(n, np.inf) if var_upper is None else np.asarray(var_upper, dtype=float).ravel()
    if lower.shape != (n,) or upper.shape != (n,):
        raise ContractError("bound vectors must have one entry per variable")
    for arr in (c, A, b, lower):
        if not np.all(np.isfinite(arr)):
            raise ContractError("LP data must be finite")
    if np.any(np.isnan(upper)) or np.any(upper == -np.inf):
        raise ContractError("upper bounds must be real or +inf")
    is_ge = np.array([s is Sense.GE for s in sense], dtype=bool)
    code, x, reduced = _k.lp_core(c, np.ascontiguousarray(A), b, is_ge, lower, upper)
    status = _STATUS[int(code)]
    if status is not Status.OPTIMAL:
        return SolveOutcome(status)
    return SolveOutcome(status, x, objective_value(c, x), reduced_costs=reduced)


def _check_binary(system: ConstraintSystem):
    if system.var_domain is not VarDomain.BINARY:
        raise ContractError("binary solvers need a binary variable domain")


def solve_binary_bnb(system: ConstraintSystem, q, rho) -> SolveOutcome:
    """Depth-first branch-and-bound over ``{0,1}^N`` with LP-relaxation bounds.

    Branches on the fractional variable closest to 0.5 (lowest index on ties)
    and explores the rounded-nearest child first.  The first incumbent found
    is kept on objective ties, so results are deterministic.
    """
    _check_binary(system)
    q = np.asarray(q, dtype=float)
    if q.shape != (system.num_vars,) or not np.all(np.isfinite(q)):
        raise ContractError("objective must be a finite vector of length num_vars")
    A, b = system.linear_form(rho)
    code, x, nodes = _k.bnb_core(q, np.ascontiguousarray(A, dtype=float), np.asarray(b, dtype=float))
    status = _STATUS[int(code)]
    if status is not Status.OPTIMAL:
        return SolveOutcome(status, nodes_explored=int(nodes))
    return SolveOutcome(status, x, objective_value(q, x), nodes_explored=int(nodes))


MAX_ENUM_VARS = 20


def enumerate_binary_oracle(system: ConstraintSystem, q, rho) -> SolveOutcome:
    """Try every assignment in lexicographic order; the first minimum wins."""
    _check_binary(system)
    n = system.num_vars
    if n > MAX_ENUM_VARS:
        raise ContractError(f"enumeration is limited to {MAX_ENUM_VARS} variables, got {n}")
    q = np.asarray(q, dtype=float)
    if q.shape != (n,):
        raise ContractError("objective length must equal num_vars")
    A, b = system.linear_form(rho)
    found, x = _k.enumerate_core(q, np.ascontiguousarray(A, dtype=float), np.asarray(b, dtype=float))
    if not found:
        return SolveOutcome(Status.INFEASIBLE, nodes_explored=2**n)
    return SolveOutcome(Status.OPTIMAL, x, objective_value(q, x), nodes_explored=2**n)


def solve_cop(system: ConstraintSystem, q, rho) -> SolveOutcome:
    """Solve the COP of ``system`` under ``rho``: B&B for binary, simplex otherwise."""
    if system.var_domain is VarDomain.BINARY:
        return solve_binary_bnb(system, q, rho)
    A, b = system.linear_form(rho)
    out = solve_lp(q, A, b)
    if out.optimal:
        # Basic values can come back as -1e-17; snap them onto the domain.
        x = np.maximum(out.assignment, 0.0)
        out = SolveOutcome(out.status, x, objective_value(q, x), reduced_costs=out.reduced_costs)
    return out
